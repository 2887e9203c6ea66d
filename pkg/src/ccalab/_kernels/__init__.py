"""Hot-loop kernels: compiled extension when available, NumPy otherwise.

The active backend is chosen once at import. Both backends are pure
transformations of pre-generated uniform blocks and agree bit-for-bit, so the
choice affects speed only. Set ``CCALAB_BACKEND=numpy`` to force the fallback
(used by the benchmark for comparison).
"""
from __future__ import annotations

import os

from . import _purepy

try:
    from . import _fast
except ImportError:  # extension not built; the fallback covers everything
    _fast = None

_BACKENDS = {"numpy": _purepy}
if _fast is not None:
    _BACKENDS["compiled"] = _fast

if os.environ.get("CCALAB_BACKEND") in _BACKENDS:
    _active_name = os.environ["CCALAB_BACKEND"]
else:
    _active_name = "compiled" if _fast is not None else "numpy"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return _active_name


def use_backend(name: str) -> None:
    """Switch the active backend (benchmarks and cross-checks only)."""
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    _active_name = name


def simulate_columns(*args):
    return _BACKENDS[_active_name].simulate_columns(*args)


def eval_formula(*args):
    return _BACKENDS[_active_name].eval_formula(*args)


def cell_codes(*args):
    return _BACKENDS[_active_name].cell_codes(*args)
