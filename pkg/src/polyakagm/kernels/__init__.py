"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The numba backend is used when numba imports cleanly, unless the environment
variable ``POLYAKAGM_DISABLE_NUMBA`` is set to a truthy value. Both backends
stay importable through :func:`get_backend` so they can be compared.
"""

from __future__ import annotations

import os

from . import _numpy

ENV_FLAG = "POLYAKAGM_DISABLE_NUMBA"


def _numba_module():
    try:
        from . import _numba
    except ImportError:
        return None
    return _numba


def numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


def get_backend(name: str | None = None):
    """Return the kernel module called ``name`` ("numba" or "numpy").

    With ``name=None`` the active backend is returned.
    """
    if name is None:
        name = "numpy" if numba_disabled() else "numba"
    if name == "numpy":
        return _numpy
    if name == "numba":
        mod = _numba_module()
        return _numpy if mod is None else mod
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    out = ["numpy"]
    if _numba_module() is not None:
        out.append("numba")
    return out


_active = get_backend()
BACKEND = _active.NAME

power_iteration = _active.power_iteration
soft_threshold = _active.soft_threshold
pep_kkt = _active.pep_kkt
pep_grid_max = _active.pep_grid_max
agm_logistic = _active.agm_logistic
agm_quadratic = _active.agm_quadratic

__all__ = [
    "BACKEND",
    "ENV_FLAG",
    "agm_logistic",
    "agm_quadratic",
    "available_backends",
    "get_backend",
    "numba_disabled",
    "pep_grid_max",
    "pep_kkt",
    "power_iteration",
    "soft_threshold",
]
