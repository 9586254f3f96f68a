"""Numba shim: hot kernels are compiled with @njit when numba is available.

Setting the environment variable FMPP_NO_NUMBA=1 forces the pure
NumPy/Python fallback path (also used automatically when numba is not
installed).  Kernel modules expose both variants so the benchmark suite
can compare them; `fmpp._jit.USING_NUMBA` records which one is active.
"""
import os

_disabled = os.environ.get("FMPP_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _disabled:
        raise ImportError
    from numba import njit  # noqa: F401

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(func):
            return func

        return wrapper
