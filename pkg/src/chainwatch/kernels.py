"""Hot-kernel backend selection.

The compiled extension is preferred when it was built; otherwise (or when
CHAINWATCH_FORCE_PURE=1 is set) the numpy fallback is used. Both expose
the same functions with matching numerical contracts.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("CHAINWATCH_FORCE_PURE") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _kernels_py

BACKEND: str = _impl.BACKEND
HAVE_COMPILED: bool = BACKEND == "compiled"

LINREG = _kernels_py.LINREG
SCHOOLS_CENTERED = _kernels_py.SCHOOLS_CENTERED
SCHOOLS_NONCENTERED = _kernels_py.SCHOOLS_NONCENTERED
FUNNEL = _kernels_py.FUNNEL
NORMAL_TOY = _kernels_py.NORMAL_TOY

geyer_tau = _impl.geyer_tau
log_density = _impl.log_density
log_density_and_grad = _impl.log_density_and_grad
hmc_batch = _impl.hmc_batch
rwmh_batch = _impl.rwmh_batch


def available_backends() -> dict[str, object]:
    """Loaded backend modules by name (for benchmarks and parity tests)."""
    out: dict[str, object] = {"pure": _kernels_py}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out
