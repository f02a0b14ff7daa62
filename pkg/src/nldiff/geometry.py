"""Grid geometry: the interval, its domain of influence and the lambda/gamma masses."""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernel import Kernel, build_kernel

INTERIOR = 0
EXTENDED_BOUNDARY = 1
EXTERIOR = 2

_GRID_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DomainGeometry:
    """Lattice ``x_i = xl + i*h`` on ``[xl, xr]`` padded by ``pad`` cells per side.

    Arrays indexed by ``k`` run over the extended lattice; closure node ``i``
    (``0 <= i <= n``) lives at ``k = i + pad``. The two nodes on the
    topological boundary are tagged ``EXTENDED_BOUNDARY`` since the open
    interval excludes them.
    """

    xl: float
    xr: float
    h: float
    n: int
    pad: int
    x: np.ndarray
    tags: np.ndarray

    @property
    def omega(self) -> tuple[float, float]:
        return (self.xl, self.xr)

    @property
    def size(self) -> int:
        return len(self.x)

    @property
    def closure(self) -> slice:
        return slice(self.pad, self.pad + self.n + 1)

    @property
    def interior(self) -> slice:
        return slice(self.pad + 1, self.pad + self.n)

    @property
    def edges(self) -> tuple[int, int]:
        return (self.pad, self.pad + self.n)

    @property
    def interior_nodes(self) -> np.ndarray:
        return self.x[self.interior]

    @property
    def closure_nodes(self) -> np.ndarray:
        return self.x[self.closure]

    @property
    def extended_nodes(self) -> np.ndarray:
        return self.x

    @property
    def boundary_mask(self) -> np.ndarray:
        return self.tags == EXTENDED_BOUNDARY

    def digest(self) -> str:
        hsh = hashlib.sha256()
        hsh.update(np.array([self.xl, self.xr, self.h], dtype=float).tobytes())
        hsh.update(self.tags.tobytes())
        return hsh.hexdigest()

    def compatible(self, k: Kernel) -> bool:
        return math.isclose(k.h, self.h, rel_tol=1e-12) and k.J <= self.pad


def build_geometry(omega: tuple[float, float], k: Kernel) -> DomainGeometry:
    xl, xr = map(float, omega)
    if not xl < xr:
        raise ValueError(f"empty interval ({xl}, {xr})")
    h = k.h
    if h >= xr - xl:
        raise ValueError(f"grid spacing {h} is not smaller than |Omega| = {xr - xl}")
    cells = (xr - xl) / h
    n = int(round(cells))
    if abs(cells - n) > _GRID_TOL * max(1.0, cells):
        raise ValueError(f"|Omega| = {xr - xl} is not a multiple of h = {h}")
    pad = k.J
    size = n + 1 + 2 * pad
    i = np.arange(size) - pad
    x = xl + i * h
    jmin, jmax = k.support_indices
    tags = np.full(size, EXTERIOR, dtype=np.int8)
    # dilation of the closed interval by the lattice support of the kernel
    tags[(i >= jmin) & (i <= n + jmax)] = EXTENDED_BOUNDARY
    tags[[pad, pad + n]] = EXTENDED_BOUNDARY
    tags[pad + 1: pad + n] = INTERIOR
    x.setflags(write=False)
    tags.setflags(write=False)
    return DomainGeometry(xl, xr, h, n, pad, x, tags)


@dataclass(frozen=True)
class LambdaGammaReport:
    eta: float
    lam: float
    gamma: float
    argmax_lambda: tuple[float, float]
    argmax_gamma: tuple[float, float]
    refine_error: Optional[float] = None


def max_gap(eta: float, h: float) -> int:
    """Largest lattice gap ``m`` with ``m*h < eta``."""
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    return max(int(math.ceil(eta / h - _GRID_TOL)) - 1, 0)


def _first_argmax(values: np.ndarray) -> tuple[int, int]:
    # values[m, i] for pair (i, i+m); lexicographic order on (x, y) = (i, i+m)
    top = values.max()
    ms, iis = np.nonzero(values == top)
    order = np.lexsort((ms, iis))
    return int(iis[order[0]]), int(ms[order[0]])


def pair_masses(g: DomainGeometry, k: Kernel, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """Intersection and symmetric-difference masses for every interior pair.

    Row ``m`` holds pairs ``(x_i, x_{i+m})``; a translate ``x + z`` counts as
    inside when it falls on a node of the closed interval.
    """
    n = g.n
    mmax = min(max_gap(eta, g.h), n - 2)
    inter = np.full((mmax + 1, n - 1), -np.inf)
    sym = np.full((mmax + 1, n - 1), -np.inf)
    for m in range(mmax + 1):
        i = np.arange(1, n - m)
        inter[m, : len(i)] = k.window_mass(-i, n - i - m)
        sym[m, : len(i)] = k.window_mass(-i - m, -i - 1) + k.window_mass(n - i - m + 1, n - i)
    return inter, sym


def lambda_gamma(g: DomainGeometry, k: Kernel, eta: float, refine: bool = False) -> LambdaGammaReport:
    if not g.compatible(k):
        raise ValueError("kernel and geometry do not share the lattice")
    inter, sym = pair_masses(g, k, eta)
    il, ml = _first_argmax(inter)
    ig, mg = _first_argmax(sym)
    node = lambda i: float(g.xl + (i + 1) * g.h)
    lam = float(min(inter.max(), 1.0))
    gamma = float(min(max(sym.max(), 0.0), 1.0))
    err = None
    if refine:
        if k.spec is None:
            raise ValueError("refinement needs the kernel spec")
        k2 = build_kernel(k.spec, g.h / 2)
        fine = lambda_gamma(build_geometry(g.omega, k2), k2, eta)
        err = max(abs(fine.lam - lam), abs(fine.gamma - gamma))
    return LambdaGammaReport(
        eta=float(eta),
        lam=lam,
        gamma=gamma,
        argmax_lambda=(node(il), node(il + ml)),
        argmax_gamma=(node(ig), node(ig + mg)),
        refine_error=err,
    )


class LambdaCondition(enum.Enum):
    FORCES_LAMBDA_LT_1 = "forces_lambda_lt_1"
    FORCES_LAMBDA_EQ_1 = "forces_lambda_eq_1"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LambdaVerdict:
    kind: LambdaCondition
    outside_mass: float
    bound: float
    witness: Optional[float] = None


def check_lambda_conditions(g: DomainGeometry, k: Kernel) -> LambdaVerdict:
    """Apply the two sufficient conditions deciding the lambda branch.

    ``outside_mass`` is the kernel mass off the offset set reachable from
    the interval, ``(xl - xr, xr - xl)``; a positive value caps lambda by
    ``1 - outside_mass``. Failing that, a node whose translated interval
    swallows the whole support forces lambda = 1.
    """
    if not g.compatible(k):
        raise ValueError("kernel and geometry do not share the lattice")
    n, J = g.n, k.J
    out = float(k.window_mass(-J, -n) + k.window_mass(n, J))
    bound = 1.0 - out
    if out > 0:
        return LambdaVerdict(LambdaCondition.FORCES_LAMBDA_LT_1, out, bound)
    jmin, jmax = k.support_indices
    lo, hi = max(1, 1 - jmin), min(n - 1, n - 1 - jmax)
    if lo <= hi:
        return LambdaVerdict(LambdaCondition.FORCES_LAMBDA_EQ_1, out, bound, witness=float(g.xl + lo * g.h))
    return LambdaVerdict(LambdaCondition.INCONCLUSIVE, out, bound)
