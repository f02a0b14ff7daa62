"""Vanishing-viscosity regularisation ``u_t - eps u_xx = K_0(u)`` with ``u = 0`` on the boundary.

Each step treats diffusion implicitly (backward Euler, homogeneous
Dirichlet rows) and the nonlocal term explicitly::

    (I - eps dt D2) u^{n+1} = (1 - dt) u^n + dt * gain(u^n)
"""
from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import evolution
from .kernel import Kernel
from .operator import BoundaryData, Field, Operator

IMEX_BE = "IMEX_BE"


@dataclass(frozen=True)
class ViscousConfig:
    epsilon: float
    dt: float = 0.01
    T: float = 1.0
    store_every: int = 1
    scheme: str = IMEX_BE
    method: str = "auto"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not (0 < self.dt <= 1):
            raise ValueError(f"dt must lie in (0, 1], got {self.dt}")
        if self.scheme != IMEX_BE:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")


def diffusion_bands(n_int: int, epsilon: float, dt: float, h: float) -> np.ndarray:
    """Banded storage of ``I - eps*dt*D2`` on the interior unknowns."""
    r = epsilon * dt / h**2
    ab = np.empty((3, n_int))
    ab[0] = -r
    ab[1] = 1.0 + 2.0 * r
    ab[2] = -r
    ab[0, 0] = 0.0
    ab[2, -1] = 0.0
    return ab


def viscous_step(op: Operator, c: np.ndarray, t: float, dt: float, bands) -> np.ndarray:
    """One IMEX step on closure values ``c`` (edges held at 0).

    ``bands=None`` drops the diffusion solve, which is the ``eps = 0`` path
    and coincides with the explicit nonlocal step for zero data.
    """
    rhs = evolution._advance(op, c, t, dt)
    out = np.zeros_like(c)
    if bands is None:
        out[1:-1] = rhs[1:-1]
    else:
        out[1:-1] = solve_banded((1, 1), bands, rhs[1:-1], check_finite=False)
    return out


def solve_viscous(u0: Field, k: Kernel, cfg: ViscousConfig) -> evolution.SolveResult:
    """Integrate the regularised problem; ``info["energy"]`` carries the L2 balance terms."""
    g = u0.geometry
    if np.any(np.abs(u0.values[list(g.edges)]) > 1e-12):
        raise ValueError("u0 must vanish on the boundary nodes")
    start = _time.perf_counter()
    op = Operator(g, k, BoundaryData.zero(), method=cfg.method)
    steps = evolution.step_schedule(cfg.T, cfg.dt)
    c = u0.closure_values.copy()
    c[[0, -1]] = 0.0
    snaps = [Field.from_closure(g, c, u0.time)]
    t = u0.time
    e0 = float((c[1:-1] ** 2).sum() * g.h)
    work = 0.0
    bands_for = {}
    for n, dt in enumerate(steps, start=1):
        bands = bands_for.get(dt)
        if bands is None:
            bands = bands_for[dt] = diffusion_bands(g.n - 1, cfg.epsilon, dt, g.h)
            if np.any(bands[1] <= np.abs(bands[0]) + np.abs(bands[2])):
                raise np.linalg.LinAlgError("diffusion matrix is not diagonally dominant")
        Kc = op.apply(c, t)[0]
        work += dt * float((Kc[1:-1] * c[1:-1]).sum() * g.h)
        c = viscous_step(op, c, t, dt, bands)
        t = u0.time + (cfg.T if n == len(steps) else n * cfg.dt)
        if not np.all(np.isfinite(c)):
            raise evolution.SolverError("non-finite value", step=n)
        if n % cfg.store_every == 0 or n == len(steps):
            snaps.append(Field.from_closure(g, c, t))
    eT = float((c[1:-1] ** 2).sum() * g.h)
    info = {"energy": {"initial": e0, "final": eT, "nonlocal_work": work}, "epsilon": cfg.epsilon}
    return evolution._finish(snaps, cfg, k, g, BoundaryData.zero(), start, info)


@dataclass
class LayerRow:
    epsilon: float
    sup_dist: float
    u_eps_near_left: float
    u_eps_near_right: float
    u_limit_left: float
    u_limit_right: float
    boundary_max: float


@dataclass
class LayerReport:
    rows: list
    limit: evolution.SolveResult
    decreasing: bool
    nonincreasing: bool
    hypothesis: bool
    limit_positive: bool
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        dirichlet = all(r.boundary_max == 0.0 for r in self.rows)
        return self.nonincreasing and dirichlet and (self.limit_positive or not self.hypothesis)

    def table(self) -> list:
        cols = ("epsilon", "sup_dist", "u_eps_near_left", "u_eps_near_right",
                "u_limit_left", "u_limit_right")
        return [{c: getattr(r, c) for c in cols} for r in self.rows]


def boundary_layer_study(u0: Field, k: Kernel, epsilons, cfg: ViscousConfig) -> LayerReport:
    """Compare viscous runs along a decreasing ``epsilons`` list with the nonlocal limit."""
    eps = [float(e) for e in epsilons]
    if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be positive and strictly decreasing")
    limit = evolution.solve(u0, BoundaryData.zero(), k,
                            evolution.SolverConfig(dt=cfg.dt, T=cfg.T, store_every=cfg.store_every,
                                                   method=cfg.method))
    lim = limit.final.closure_values
    rows = []
    for e in eps:
        run = solve_viscous(u0, k, ViscousConfig(e, cfg.dt, cfg.T, cfg.store_every, cfg.scheme, cfg.method))
        c = run.final.closure_values
        bmax = max(float(np.abs(s.closure_values[[0, -1]]).max()) for s in run.snapshots)
        rows.append(LayerRow(e, float(np.abs(c[1:-1] - lim[1:-1]).max()), float(c[1]), float(c[-2]),
                             float(lim[0]), float(lim[-1]), bmax))
    d = [r.sup_dist for r in rows]
    c0 = u0.closure_values
    hyp = k.symmetric_support_radius() >= 1 and bool(np.all(c0 >= 0)) and bool(np.any(c0 > 0))
    notes = [] if hyp else ["positivity hypothesis unmet; boundary value not checked"]
    return LayerReport(
        rows=rows,
        limit=limit,
        decreasing=all(b < a for a, b in zip(d, d[1:])),
        nonincreasing=all(b <= a for a, b in zip(d, d[1:])),
        hypothesis=hyp,
        limit_positive=bool(lim[0] > 0 and lim[-1] > 0),
        notes=notes,
    )
