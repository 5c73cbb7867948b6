"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the numpy
implementation in ``_fallback`` takes over. Set ``SEAOONS_PURE_PYTHON=1`` to
force the fallback.
"""

import os

from . import _fallback

OK = _fallback.OK
SINGULAR = _fallback.SINGULAR
NO_CONVERGENCE = _fallback.NO_CONVERGENCE


def _load_compiled():
    try:
        from . import _core
    except ImportError:
        return None
    return _core


_compiled = _load_compiled()

if os.environ.get("SEAOONS_PURE_PYTHON", "") not in ("", "0") or _compiled is None:
    _impl = _fallback
else:
    _impl = _compiled

BACKEND = _impl.NAME
sym_eig = _impl.sym_eig
ball_step = _impl.ball_step
entropy_solve = _impl.entropy_solve


def available_backends():
    """Mapping of backend name to module, for tests and benchmarks."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
