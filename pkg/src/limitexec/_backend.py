"""Kernel backend selection.

Two interchangeable kernel modules exist: ``_kernels_numba`` (scalar loops
compiled with ``numba.njit``) and ``_kernels_numpy`` (vectorised numpy).  The
default is numba; set ``LIMITEXEC_BACKEND=numpy`` to force the fallback, which
is also used automatically when numba cannot be imported.
"""
import importlib
import logging
import os

log = logging.getLogger(__name__)

ENV_FLAG = "LIMITEXEC_BACKEND"
_VALID = ("numba", "numpy")
_cache = {}


def _load(name):
    if name not in _cache:
        _cache[name] = importlib.import_module(f"limitexec._kernels_{name}")
    return _cache[name]


def numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def backend_name():
    name = os.environ.get(ENV_FLAG, "numba").strip().lower() or "numba"
    if name not in _VALID:
        raise ValueError(f"{ENV_FLAG} must be one of {_VALID}, got {name!r}")
    if name == "numba" and not numba_available():
        log.warning("numba not importable; falling back to numpy kernels")
        name = "numpy"
    return name


def get_kernels(name=None):
    """Return the kernel module for ``name`` (default: the env-selected one)."""
    if name is None:
        name = backend_name()
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}")
    return _load(name)
