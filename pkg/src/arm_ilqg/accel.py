"""Backend selection for the numeric kernels.

Set ARM_ILQG_BACKEND=numpy to force the pure-numpy kernels; anything else
(or unset) uses numba when it imports cleanly.
"""

import os

_requested = os.environ.get("ARM_ILQG_BACKEND", "numba").lower()

if _requested == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
