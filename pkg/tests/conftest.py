"""Shared test setup.

The suite pins the pure-numpy kernels so results are bit-identical to the
reference numbers baked into the acceptance tests; numba/numpy agreement
is covered separately in test_kernels.py via a subprocess.
"""

import os

os.environ["ARM_ILQG_BACKEND"] = "numpy"
