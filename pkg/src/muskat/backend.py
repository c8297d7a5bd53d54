"""Numerical backend selection.

Hot kernels ship in two variants: numba-compiled loops and pure-numpy
vectorized fallbacks.  The environment variable MUSKAT_NUMBA picks the
path: "0" forces numpy, "1" requires numba (import error surfaces),
unset or empty means numba when available.  MUSKAT_THREADS caps the
worker count of the compiled backend; kernels themselves run serially
so results are bitwise reproducible either way.
"""
from __future__ import annotations

import os

_flag = os.environ.get("MUSKAT_NUMBA", "").strip()

if _flag == "0":
    HAVE_NUMBA = False
else:
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:
        if _flag == "1":
            raise
        HAVE_NUMBA = False

if HAVE_NUMBA:
    _threads = os.environ.get("MUSKAT_THREADS", "").strip()
    if _threads:
        numba.set_num_threads(max(1, int(_threads)))

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)

else:

    def njit(*args, **kwargs):
        def deco(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return deco


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
