"""Kernel dispatch: compiled Cython core when built, NumPy fallback otherwise.

Set ``VIDSAL_PURE_PYTHON=1`` to force the fallback at import time.
"""
from __future__ import annotations

import os
from functools import partial
from types import SimpleNamespace

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _make(name: str) -> SimpleNamespace:
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available; build the extension")
        return SimpleNamespace(
            name="compiled",
            slic_iterate=_compiled.slic_iterate,
            enforce_connectivity=partial(
                _fallback.enforce_connectivity, components=_compiled.components
            ),
            hs_iterate=_compiled.hs_iterate,
        )
    if name == "python":
        return SimpleNamespace(
            name="python",
            slic_iterate=_fallback.slic_iterate,
            enforce_connectivity=_fallback.enforce_connectivity,
            hs_iterate=_fallback.hs_iterate,
        )
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    return ["compiled", "python"] if _compiled is not None else ["python"]


def get_backend(name: str | None = None) -> SimpleNamespace:
    if name is None:
        return _active
    return _make(name)


_force_pure = os.environ.get("VIDSAL_PURE_PYTHON", "").strip() not in ("", "0")
_active = _make("python" if (_force_pure or _compiled is None) else "compiled")

BACKEND = _active.name
slic_iterate = _active.slic_iterate
enforce_connectivity = _active.enforce_connectivity
hs_iterate = _active.hs_iterate
