"""Kernel backend selection.

Two interchangeable implementations of the numeric kernels exist: a compiled
Cython module (``_ckernels``) and a plain numpy one (``pykernels``).  At import
we pick the compiled one when it built, otherwise fall back to numpy.  The
``CTD4_KERNELS`` environment variable forces the choice ("cython" or
"python"), and ``use()`` switches at runtime -- handy for parity tests and
benchmarks.

Code should grab the active backend through ``get()`` at call time rather than
holding a reference, so a switch takes effect everywhere at once.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import pykernels

_BACKENDS: dict[str, ModuleType] = {"python": pykernels}

try:  # pragma: no cover - depends on the build environment
    from . import _ckernels

    _BACKENDS["cython"] = _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

_active: ModuleType = _BACKENDS.get("cython", pykernels)

_forced = os.environ.get("CTD4_KERNELS")
if _forced:
    if _forced not in _BACKENDS:
        raise ImportError(
            f"CTD4_KERNELS={_forced!r} but available backends are "
            f"{sorted(_BACKENDS)}"
        )
    _active = _BACKENDS[_forced]


def available() -> tuple[str, ...]:
    """Names of the backends importable in this environment."""
    return tuple(sorted(_BACKENDS))


def get() -> ModuleType:
    """The active kernel module."""
    return _active


def name() -> str:
    return _active.NAME


def use(backend: str) -> ModuleType:
    """Switch the active backend by name and return it."""
    global _active
    if backend not in _BACKENDS:
        raise ValueError(
            f"unknown backend {backend!r}; available: {sorted(_BACKENDS)}"
        )
    _active = _BACKENDS[backend]
    return _active
