"""Backend selection for the trajectory kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation takes over. ``RVMSTAB_KERNEL=python`` forces the fallback.
Both backends share one calling convention, wrapped here.
"""

from __future__ import annotations

import logging
import os

import numpy as np

from . import _kernel_py
from ._kernel_py import COMPLETED, GRAZING, STEP_FAILURE, ZENO  # noqa: F401

log = logging.getLogger(__name__)

try:
    from . import _kernel as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

STATUS_NAMES = {COMPLETED: "completed", GRAZING: "grazing", STEP_FAILURE: "step_failure",
                ZENO: "zeno"}


def available_backends() -> list[str]:
    return (["compiled"] if _compiled is not None else []) + ["python"]


def default_backend() -> str:
    if os.environ.get("RVMSTAB_KERNEL", "").lower() == "python" or _compiled is None:
        return "python"
    return "compiled"


BACKEND = default_backend()
_threads = 1


def set_threads(n: int) -> None:
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    return _threads


def _resolve(backend):
    backend = backend or BACKEND
    if backend == "compiled" and _compiled is None:
        raise RuntimeError("compiled kernel is not built")
    if backend not in ("compiled", "python"):
        raise ValueError("unknown backend %r" % backend)
    return backend


def trace(states, signs, fields, dt, n_steps, stride=1, max_collisions=10**6, record=False,
          backend=None):
    """Integrate Cartesian phase-space states (n, 6) for ``n_steps`` steps of
    signed size ``dt`` in the equilibrium ``fields``.

    Returns (samples, status, collisions, events): samples has shape
    (n, n_steps // stride + 1, 6); a particle that stops early keeps its last
    state. ``events`` lists (particle, time, position, p_before, p_after)
    when ``record`` is set.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if _resolve(backend) == "compiled":
        return _compiled.trace(states, signs, fields.kernel_data(), fields.domain.levelset_spec,
                               float(dt), int(n_steps), int(stride), int(max_collisions),
                               bool(record), 100000, _threads)
    return _kernel_py.trace(states, signs, fields, fields.domain, float(dt), int(n_steps),
                            int(stride), int(max_collisions), record)


def deposit(rows_rz, vel, coef, sign, fields, dt, n_steps, tw, grid_spec, backend=None):
    """Time-weighted bilinear deposit of trajectories started at ``rows_rz``
    with cylindrical momenta ``vel``; see ``_kernel_py.deposit``."""
    rows_rz = np.ascontiguousarray(rows_rz, dtype=float)
    vel = np.ascontiguousarray(vel, dtype=float)
    coef = np.ascontiguousarray(coef, dtype=float)
    tw = np.ascontiguousarray(np.atleast_2d(tw), dtype=float)
    if tw.shape[1] != n_steps + 1:
        raise ValueError("time weights must have n_steps + 1 columns")
    if _resolve(backend) == "compiled":
        return _compiled.deposit(rows_rz, vel, coef, float(sign), fields.kernel_data(),
                                 fields.domain.levelset_spec, float(dt), int(n_steps), tw,
                                 tuple(grid_spec), _threads)
    return _kernel_py.deposit(rows_rz, vel, coef, sign, fields, fields.domain, float(dt),
                              int(n_steps), tw, grid_spec)
