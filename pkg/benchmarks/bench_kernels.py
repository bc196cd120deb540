"""Benchmark the hot kernels under both backends.

The backend is fixed at import time by ARM_ILQG_BACKEND, so this script
re-executes itself in a subprocess per backend and prints a comparison
table. Run from the repository root:

    python benchmarks/bench_kernels.py
    python benchmarks/bench_kernels.py --batch 2000 --repeats 30
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def run_kernels(batch, repeats, joints=7, points=200, dim=14):
    from arm_ilqg.accel import backend_name
    from arm_ilqg.kernels import fk_positions_chain, quad_features

    rng = np.random.default_rng(0)
    theta, d, a, alpha = (rng.uniform(-1, 1, joints) for _ in range(4))
    Q = rng.uniform(-2, 2, (batch, joints))
    Z = rng.standard_normal((points, dim))

    # Warm-up pass so numba's compile time is not measured.
    fk_positions_chain(theta, d, a, alpha, Q[:2])
    quad_features(Z[:2])

    timings = {}
    for name, fn in (
        ("fk_batch", lambda: fk_positions_chain(theta, d, a, alpha, Q)),
        ("quad_features", lambda: quad_features(Z)),
    ):
        best = min(_timeit(fn) for _ in range(repeats))
        timings[name] = best
    return backend_name(), timings


def _timeit(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=1000, help="fk batch size")
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--backend", help=argparse.SUPPRESS)  # subprocess mode
    args = ap.parse_args()

    if args.backend:
        backend, timings = run_kernels(args.batch, args.repeats)
        print(json.dumps({"backend": backend, "timings": timings}))
        return

    results = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, ARM_ILQG_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, __file__, "--backend", backend,
             "--batch", str(args.batch), "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            print(f"{backend}: failed\n{proc.stderr}", file=sys.stderr)
            continue
        out = json.loads(proc.stdout)
        if out["backend"] != backend:
            print(f"{backend}: backend unavailable, ran as {out['backend']}")
            continue
        results[backend] = out["timings"]

    if len(results) < 2:
        return
    print(f"{'kernel':<16}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for kernel in results["numpy"]:
        t_np = results["numpy"][kernel]
        t_nb = results["numba"][kernel]
        print(f"{kernel:<16}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms"
              f"{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
