"""Backend switch for the hot numeric kernels.

By default every kernel in :mod:`hyglb._kernels` is compiled with numba.
Setting the environment variable ``HYGLB_BACKEND=numpy`` before import makes
the same functions run as plain Python/NumPy instead.  The numpy path is much
slower (the kernels are written as explicit loops) but has no compilation
step, which is useful for debugging and as the reference side of
``benchmarks/bench_backends.py``.
"""

import os
import warnings

_requested = os.environ.get("HYGLB_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(
        f"HYGLB_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

NUMBA_ENABLED = _requested == "numba"

if NUMBA_ENABLED:
    try:
        from numba import njit, prange
    except ImportError:  # pragma: no cover
        warnings.warn("numba is not importable; falling back to the numpy backend")
        NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    def njit(*args, **kwargs):  # noqa: D103 - identity decorator
        if args and callable(args[0]):
            return args[0]

        def decorate(func):
            return func

        return decorate

    prange = range


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
