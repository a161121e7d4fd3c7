"""Optional numba acceleration.

Kernels are written once in a numba-compatible subset of Python and wrapped
with :func:`jit`.  Setting ``AMRSUMM_DISABLE_NUMBA=1`` (or running without
numba installed) leaves them as plain Python functions operating on numpy
arrays.
"""
import os


def _noop_jit(f):
    return f


def _disabled_by_env():
    return os.environ.get("AMRSUMM_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")


try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()

if USE_NUMBA:
    def jit(f):
        return numba.njit(cache=True, nogil=True)(f)
else:
    jit = _noop_jit


def python_impl(f):
    """Return the pure-Python body of a kernel, compiled or not."""
    return getattr(f, "py_func", f)
