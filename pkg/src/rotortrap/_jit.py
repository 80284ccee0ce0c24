"""Optional numba acceleration.

Set ``ROTORTRAP_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
The kernels are written so that both paths execute the same arithmetic.
"""
import os
import warnings

DISABLE_JIT = os.environ.get("ROTORTRAP_DISABLE_JIT", "0").strip().lower() not in ("", "0", "false", "no")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None
    if not DISABLE_JIT:
        warnings.warn("numba could not be imported; falling back to pure numpy kernels")

USING_NUMBA = _numba is not None and not DISABLE_JIT


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    if USING_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)

    def decorator(func):
        return func

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return decorator


def py_func(kernel):
    """Return the uncompiled Python body of a kernel (for cross-checks)."""
    return getattr(kernel, "py_func", kernel)
