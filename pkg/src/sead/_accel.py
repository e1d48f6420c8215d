"""Backend selection for the hot kernels.

Set ``SEAD_NUMBA=0`` to force the pure-numpy path. When numba is not
importable the numpy path is used regardless of the flag.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba ships in the test env
    numba = None
    HAVE_NUMBA = False


def _flag_enabled(value):
    return value.strip().lower() not in ("0", "false", "no", "off", "")


USE_NUMBA = HAVE_NUMBA and _flag_enabled(os.environ.get("SEAD_NUMBA", "1"))


def njit(*args, **kwargs):
    """``numba.njit`` with cache and nogil on; identity when numba is absent."""
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)


def default_backend():
    return "numba" if USE_NUMBA else "numpy"


def resolve_backend(name=None):
    if name is None:
        return default_backend()
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return name
