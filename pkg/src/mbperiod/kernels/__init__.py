"""Numeric kernel selection.

Two interchangeable implementations exist: a numba-compiled one and a
vectorized numpy fallback. Selection happens once at import time from the
MBPERIOD_KERNELS environment variable:

    MBPERIOD_KERNELS=numba   require the compiled kernels (error if numba
                             is not importable)
    MBPERIOD_KERNELS=numpy   force the fallback
    unset                    use numba when available, else the fallback

The active choice is exposed as BACKEND. benchmarks/bench_kernels.py times
the two implementations side by side.
"""

from __future__ import annotations

import os
import warnings

_ENV_VAR = "MBPERIOD_KERNELS"


def get_impl(name):
    """Import one implementation module by name ('numba' or 'numpy')."""
    if name == "numpy":
        from . import _reference

        return _reference
    if name == "numba":
        from . import _numba

        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    requested = os.environ.get(_ENV_VAR, "").strip().lower()
    if requested not in ("", "numba", "numpy"):
        warnings.warn(
            f"{_ENV_VAR}={requested!r} not recognized; using automatic selection",
            RuntimeWarning,
            stacklevel=2,
        )
        requested = ""
    if requested == "numpy":
        return "numpy", get_impl("numpy")
    if requested == "numba":
        return "numba", get_impl("numba")
    try:
        return "numba", get_impl("numba")
    except ImportError:
        return "numpy", get_impl("numpy")


BACKEND, _impl = _select()

profile_detail = _impl.profile_detail
solve_band = _impl.solve_band
nll_value = _impl.nll_value
bcd_rounds = _impl.bcd_rounds
