"""Moduli of continuity, their decay envelopes and positivity diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .evolution import SolveResult
from .geometry import LambdaGammaReport, max_gap
from .kernel import Kernel
from .operator import Field

LAMBDA_LT_1 = "LAMBDA_LT_1"
LAMBDA_EQ_1 = "LAMBDA_EQ_1"


def _values(u) -> np.ndarray:
    return u.interior_values if isinstance(u, Field) else np.asarray(u, dtype=float)


def modulus(u: Union[Field, np.ndarray], eta: float, h: Optional[float] = None) -> float:
    """Largest ``|u(x) - u(y)|`` over interior node pairs with ``|x - y| < eta``.

    ``u`` is a :class:`Field` or an array of interior values (then ``h`` is
    required).
    """
    if isinstance(u, Field):
        h = u.geometry.h
    elif h is None:
        raise ValueError("grid spacing needed for a bare array")
    v = _values(u)
    best = 0.0
    for m in range(1, min(max_gap(eta, h), len(v) - 1) + 1):
        best = max(best, float(np.abs(v[m:] - v[:-m]).max()))
    return best


def modulus_bound(omega0: Union[float, Callable[[float], float]], lam: float, gamma: float,
                   sup_u0: float, t: float, eta: float) -> float:
    """Envelope on the modulus at scale ``eta`` and time ``t`` for zero boundary data.

    With ``lam < 1``: ``omega0 * e^{-(1-lam)t} + gamma*sup_u0*(1 - e^{-(1-lam)t})/(1-lam)``;
    with ``lam = 1``: ``omega0 + gamma*sup_u0*t``. ``gamma = 0, lam = 1`` is the
    whole-space statement that the modulus never grows.
    """
    if not (0.0 <= lam <= 1.0) or not (0.0 <= gamma <= 1.0):
        raise ValueError(f"lambda and gamma must lie in [0, 1], got {lam}, {gamma}")
    w0 = omega0(eta) if callable(omega0) else float(omega0)
    if lam == 1.0:
        return w0 + gamma * sup_u0 * t
    a = 1.0 - lam
    decay = math.exp(-a * t)
    return w0 * decay + gamma * sup_u0 * (-math.expm1(-a * t)) / a


@dataclass
class ModulusReport:
    etas: np.ndarray
    times: np.ndarray
    omega: np.ndarray
    omega0: np.ndarray
    bound: np.ndarray
    branch: list
    tol_quad: float
    theta: Optional[np.ndarray] = None
    violations: int = 0
    worst_excess: float = -np.inf

    @property
    def ok(self) -> Optional[bool]:
        if self.theta is not None:
            return None
        return self.violations == 0

    def rows(self) -> list:
        out = []
        for s, t in enumerate(self.times):
            for e, eta in enumerate(self.etas):
                out.append({"t": float(t), "eta": float(eta), "omega": float(self.omega[s, e]),
                            "bound": float(self.bound[s, e]), "branch": self.branch[e]})
        return out


def theta_diagnostic(run: SolveResult, eta: float) -> float:
    """Largest boundary-data mass read from the ``eta``-strip of the extended boundary.

    The strip is the extended-boundary nodes within ``eta`` of the interval;
    the value is reported only, never checked against a bound.
    """
    g, k, phi = run.geometry, run.kernel, run.phi
    mask = g.boundary_mask & ((g.x < g.xl) & (g.x > g.xl - eta) | (g.x > g.xr) & (g.x < g.xr + eta))
    best = 0.0
    sel = np.flatnonzero(mask)
    pos = np.flatnonzero(g.boundary_mask)
    lookup = np.searchsorted(pos, sel)
    for s in run.snapshots:
        ext = np.zeros(g.size)
        ext[sel] = np.abs(phi.sample(g, s.time)[lookup])
        window = ext[g.pad - k.J: g.pad + g.n + k.J + 1]
        gain = np.correlate(window, k.weights, mode="valid")
        best = max(best, float(gain[1:-1].max(initial=0.0)))
    return best


def check_bounds(run: SolveResult, lg: list, tol_quad: Optional[float] = None) -> ModulusReport:
    """Measure the modulus of every snapshot against its envelope.

    ``lg`` holds one :class:`LambdaGammaReport` per scale. The default slack
    ``5*(h + dt)*sup|u0|`` absorbs quadrature and stepping error. Nonzero
    boundary data has no envelope: the report then carries the theta
    diagnostic and ``ok`` is ``None``.
    """
    g = run.geometry
    u0 = run.snapshots[0]
    sup0 = float(np.abs(u0.closure_values).max())
    dt = run.config.dt
    tol = 5.0 * (g.h + dt) * sup0 if tol_quad is None else float(tol_quad)
    etas = np.array([r.eta for r in lg])
    times = run.times
    omega = np.array([[modulus(s, e) for e in etas] for s in run.snapshots])
    omega0 = omega[0].copy()
    branch = [LAMBDA_EQ_1 if r.lam == 1.0 else LAMBDA_LT_1 for r in lg]
    phi = run.phi
    if phi is not None and not phi.is_zero:
        theta = np.array([theta_diagnostic(run, e) for e in etas])
        return ModulusReport(etas, times, omega, omega0, np.full_like(omega, np.nan), branch, tol,
                             theta=theta)
    bound = np.array([[modulus_bound(omega0[e], r.lam, r.gamma, sup0, t, r.eta)
                       for e, r in enumerate(lg)] for t in times])
    excess = omega - (bound + tol)
    return ModulusReport(etas, times, omega, omega0, bound, branch, tol,
                         violations=int((excess > 0).sum()), worst_excess=float(excess.max()))


@dataclass
class PositivityReport:
    x: np.ndarray
    first_positive_time: np.ndarray
    eta_supp: float
    hypothesis: bool
    nonzero_data: bool
    t_required: float
    all_positive_by: Optional[float]
    counterexample: list = field(default_factory=list)
    stays_positive: bool = True
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> Optional[bool]:
        """``True``/``False`` when the hypotheses hold, ``None`` otherwise."""
        if not (self.hypothesis and self.nonzero_data):
            return None
        return (self.all_positive_by is not None and self.all_positive_by <= self.t_required
                and self.stays_positive)

    def rows(self) -> list:
        return [{"x": float(a), "first_positive_time": float(b)}
                for a, b in zip(self.x, self.first_positive_time)]


def positivity_study(run: SolveResult, k: Kernel, tol_pos: float = 1e-12,
                     counterexample: bool = True) -> PositivityReport:
    """Track when each node of the closed interval turns positive.

    When every lattice weight on ``|z| <= eta_supp`` is positive, all nodes
    must exceed ``tol_pos`` by the first stored snapshot at or after
    ``ceil(diam / eta_supp)`` steps. Otherwise the nodes that never turn
    positive are returned as ``counterexample``.
    """
    g = run.geometry
    arr = run.closure_array()
    times = run.times
    u0 = arr[0]
    nonzero = bool(np.any(u0 > 0))
    notes = []
    if not nonzero:
        notes.append("initial data identically zero: positivity hypothesis unmet")
    if np.any(u0 < 0):
        notes.append("initial data has negative values")
    m = k.symmetric_support_radius()
    eta_supp = max(m, 0) * g.h
    hyp = m >= 1
    if not hyp and not counterexample:
        raise ValueError("kernel support holds no symmetric neighbourhood of 0")
    pos = arr > tol_pos
    first = np.full(g.n + 1, np.inf)
    hit = pos.any(axis=0)
    first[hit] = times[np.argmax(pos[:, hit], axis=0)]
    dt = run.config.dt
    k_min = math.ceil((g.xr - g.xl) / eta_supp - 1e-9) if hyp else None
    t_req = k_min * dt if hyp else math.inf
    all_pos = np.flatnonzero(pos.all(axis=1))
    by = float(times[all_pos[0]]) if len(all_pos) else None
    if hyp:
        due = np.flatnonzero(times >= t_req - 1e-12)
        if len(due):
            t_req = float(times[due[0]])
    # once positive a node must stay positive
    stays = bool(np.array_equal(np.maximum.accumulate(pos, axis=0), pos))
    never = g.closure_nodes[~hit].tolist()
    return PositivityReport(
        x=g.closure_nodes.copy(),
        first_positive_time=first,
        eta_supp=eta_supp,
        hypothesis=hyp,
        nonzero_data=nonzero,
        t_required=t_req,
        all_positive_by=by,
        counterexample=never if not hyp or by is None else [],
        stays_positive=stays,
        notes=notes,
    )
