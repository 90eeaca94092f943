"""Kernel backend selection.

The compiled extension is preferred when it imports; the numpy fallback is
always available.  ``HSAD_BACKEND=python`` (or ``compiled``) overrides the
default chosen at import time.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"python": _fallback}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

DEFAULT = os.environ.get("HSAD_BACKEND") or ("compiled" if _compiled is not None else "python")
if DEFAULT not in BACKENDS:
    raise ImportError(f"HSAD_BACKEND={DEFAULT!r} is not available; choose from {sorted(BACKENDS)}")


def get(name=None):
    name = name or DEFAULT
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; available: {sorted(BACKENDS)}") from None


def available():
    return sorted(BACKENDS)
