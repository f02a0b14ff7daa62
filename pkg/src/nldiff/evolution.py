"""Time integration of ``u_t = K_phi(u)``.

The explicit stepper writes the update as the convex combination
``(1 - dt) u + dt * gain`` so that, for ``dt <= 1`` and the direct
correlation path, ordered inputs stay ordered bit for bit. The Picard
solver iterates the integral form window by window and doubles as an
independent check on the stepper.
"""
from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import DomainGeometry
from .kernel import Kernel
from .operator import BoundaryData, Field, Operator, check_compatibility

EXPLICIT = "explicit"
PICARD = "picard"


class SolverError(RuntimeError):
    def __init__(self, msg: str, step: Optional[int] = None):
        super().__init__(msg if step is None else f"{msg} (step {step})")
        self.step = step


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.01
    T: float = 1.0
    mode: str = EXPLICIT
    picard_window: float = 0.25
    picard_tol: float = 1e-10
    picard_max_iter: int = 200
    picard_quadrature: str = "left"
    store_every: int = 1
    method: str = "auto"

    def __post_init__(self):
        if not (0 < self.dt <= 1):
            raise ValueError(f"dt must lie in (0, 1], got {self.dt}")
        if self.T < 0:
            raise ValueError("T must be nonnegative")
        if self.mode not in (EXPLICIT, PICARD):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0 < self.picard_window < 0.5):
            raise ValueError(f"picard_window must lie in (0, 1/2), got {self.picard_window}")
        if self.picard_quadrature not in ("left", "trapezoid"):
            raise ValueError(f"unknown picard quadrature {self.picard_quadrature!r}")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")


@dataclass
class SolveResult:
    snapshots: list
    diagnostics: list
    config: object
    kernel: Kernel
    geometry: DomainGeometry
    phi: Optional[BoundaryData]
    runtime: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    def closure_array(self) -> np.ndarray:
        return np.array([s.closure_values for s in self.snapshots])

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    def provenance(self) -> dict:
        return {"kernel": self.kernel.digest(), "geometry": self.geometry.digest()}


def diagnostics(u: Field) -> dict:
    c = u.closure_values
    return {
        "t": float(u.time),
        "sup": float(np.abs(c).max()),
        "min": float(c.min()),
        "mass": float(u.interior_values.sum() * u.geometry.h),
    }


def step_schedule(T: float, dt: float) -> list:
    """Step sizes covering ``[0, T]``; the last one is shortened if needed."""
    n = int(math.ceil(T / dt - 1e-9))
    steps = [dt] * n
    if n:
        steps[-1] = T - (n - 1) * dt
    return steps


def _check_dt(dt: float) -> None:
    if not (0 < dt <= 1):
        raise ValueError(f"dt must lie in (0, 1], got {dt}")


def _advance(op: Operator, c: np.ndarray, t: float, dt: float) -> np.ndarray:
    g = op.gain(op.extend(c, t))[0]
    return (1.0 - dt) * c + dt * g


def step_explicit(u: Field, phi: BoundaryData, k: Kernel, dt: float, method: str = "auto") -> Field:
    _check_dt(dt)
    op = Operator(u.geometry, k, phi, method=method)
    return Field.from_closure(u.geometry, _advance(op, u.closure_values, u.time, dt), u.time + dt)


def _finish(snaps, cfg, k, g, phi, t0, info=None) -> SolveResult:
    return SolveResult(
        snapshots=snaps,
        diagnostics=[diagnostics(s) for s in snaps],
        config=cfg,
        kernel=k,
        geometry=g,
        phi=phi,
        runtime=_time.perf_counter() - t0,
        info=info or {},
    )


def solve(u0: Field, phi: BoundaryData, k: Kernel, cfg: SolverConfig) -> SolveResult:
    """Integrate from ``u0`` on ``[0, cfg.T]``."""
    if cfg.mode == PICARD:
        return picard_solve(u0, phi, k, cfg)
    check_compatibility(u0, phi)
    start = _time.perf_counter()
    g = u0.geometry
    op = Operator(g, k, phi, method=cfg.method)
    c = u0.closure_values.copy()
    t = u0.time
    snaps = [Field.from_closure(g, c, t)]
    steps = step_schedule(cfg.T, cfg.dt)
    for n, dt in enumerate(steps, start=1):
        c = _advance(op, c, t, dt)
        t = u0.time + (cfg.T if n == len(steps) else n * cfg.dt)
        if not np.all(np.isfinite(c)):
            raise SolverError("non-finite value", step=n)
        if n % cfg.store_every == 0 or n == len(steps):
            snaps.append(Field.from_closure(g, c, t))
    return _finish(snaps, cfg, k, g, phi, start, {"method": op.method, "steps": len(steps)})


def _picard_window(op: Operator, c0: np.ndarray, times: np.ndarray, cfg: SolverConfig):
    dt = np.diff(times)
    U = np.repeat(c0[None, :], len(times), axis=0)
    updates = []
    for it in range(1, cfg.picard_max_iter + 1):
        K = op.apply(U, times)
        if cfg.picard_quadrature == "left":
            incr = dt[:, None] * K[:-1]
        else:
            incr = 0.5 * dt[:, None] * (K[:-1] + K[1:])
        new = np.empty_like(U)
        new[0] = c0
        new[1:] = c0 + np.cumsum(incr, axis=0)
        d = float(np.abs(new - U).max())
        if not math.isfinite(d):
            raise SolverError("non-finite Picard iterate", step=it)
        U = new
        updates.append(d)
        if d <= cfg.picard_tol:
            return U, updates
    raise SolverError(f"Picard iteration did not reach tol {cfg.picard_tol} in "
                      f"{cfg.picard_max_iter} iterations (last update {updates[-1]:.3e})")


def picard_solve(u0: Field, phi: BoundaryData, k: Kernel, cfg: SolverConfig) -> SolveResult:
    """Fixed-point iteration of ``u = u0 + int_0^t K_phi(u) ds`` on windows.

    Each window of length ``picard_window`` starts from the state reached
    at the end of the previous one. ``info["updates"]`` lists the sup-norm
    update of every iteration, per window.
    """
    check_compatibility(u0, phi)
    start = _time.perf_counter()
    g = u0.geometry
    op = Operator(g, k, phi, method=cfg.method)
    steps = step_schedule(cfg.T, cfg.dt)
    t_grid = u0.time + np.concatenate(([0.0], np.cumsum(steps)))
    if steps:
        t_grid[-1] = u0.time + cfg.T
    per_window = max(1, int(round(cfg.picard_window / cfg.dt)))
    c = u0.closure_values.copy()
    snaps = [Field.from_closure(g, c, u0.time)]
    updates = []
    n0 = 0
    while n0 < len(steps):
        n1 = min(n0 + per_window, len(steps))
        U, ups = _picard_window(op, c, t_grid[n0: n1 + 1], cfg)
        updates.append(ups)
        for m in range(1, n1 - n0 + 1):
            n = n0 + m
            if n % cfg.store_every == 0 or n == len(steps):
                snaps.append(Field.from_closure(g, U[m], t_grid[n]))
        c = U[-1].copy()
        n0 = n1
    info = {"method": op.method, "updates": updates, "iterations": [len(u) for u in updates]}
    return _finish(snaps, cfg, k, g, phi, start, info)


def update_ratios(updates: list) -> np.ndarray:
    """Successive update ratios ``d_{k+1} / d_k`` of one Picard window."""
    d = np.asarray(updates, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return d[1:] / d[:-1]


@dataclass(frozen=True)
class ComparisonReport:
    ok: bool
    max_violation: float
    violations: int
    strict_somewhere: bool
    worst: Optional[tuple] = None


def verify_comparison(a: SolveResult, b: SolveResult) -> ComparisonReport:
    """Check ``a <= b`` on every closure node of every stored snapshot, exactly."""
    if a.geometry.digest() != b.geometry.digest() or a.kernel.digest() != b.kernel.digest():
        raise ValueError("runs do not share geometry and kernel")
    ca, cb = a.config, b.config
    if (ca.dt, ca.T, ca.store_every) != (cb.dt, cb.T, cb.store_every):
        raise ValueError("runs do not share dt, T and output decimation")
    if not np.array_equal(a.times, b.times):
        raise ValueError("snapshot times differ")
    diff = a.closure_array() - b.closure_array()
    bad = diff > 0
    worst = None
    if bad.any():
        s, i = np.unravel_index(int(np.argmax(diff)), diff.shape)
        worst = (float(a.times[s]), float(a.geometry.closure_nodes[i]))
    return ComparisonReport(
        ok=not bad.any(),
        max_violation=float(max(diff.max(), 0.0)),
        violations=int(bad.sum()),
        strict_somewhere=bool((diff < 0).any()),
        worst=worst,
    )
