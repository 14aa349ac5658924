"""Backend selection for the hot kernels.

Every kernel in :mod:`semimvs.kernels` exists twice: a numba ``@njit`` loop
and a vectorised numpy version. ``SEMIMVS_BACKEND=numpy`` forces the numpy
path; the default is numba when it imports cleanly. ``SEMIMVS_THREADS`` caps
numba's thread pool.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

try:
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is often too old and only produces a warning
        numba.config.THREADING_LAYER = "omp"

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency
    numba = None
    HAVE_NUMBA = False

_backend = os.environ.get("SEMIMVS_BACKEND", "numba").strip().lower()
if _backend not in ("numba", "numpy"):
    raise ValueError(f"SEMIMVS_BACKEND must be 'numba' or 'numpy', got {_backend!r}")
if _backend == "numba" and not HAVE_NUMBA:
    _backend = "numpy"

if HAVE_NUMBA and os.environ.get("SEMIMVS_THREADS"):
    numba.set_num_threads(int(os.environ["SEMIMVS_THREADS"]))


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching; a no-op decorator without numba."""
    kwargs.setdefault("cache", True)
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    return numba.njit(*args, **kwargs)


if HAVE_NUMBA:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


def backend() -> str:
    return _backend


def use_numba() -> bool:
    return _backend == "numba"


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def using_backend(name: str):
    """Temporarily switch backend (tests and benchmarks)."""
    old = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(old)
