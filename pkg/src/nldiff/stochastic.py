"""Compound-Poisson particle oracle.

A particle starts at a node drawn from ``u0``, receives ``N ~ Poisson(t)``
jumps drawn from the kernel weights and is histogrammed on the lattice. In
the absorbing mode it is removed at the first jump landing off the open
interval, which is the particle picture of zero boundary data.

Randomness is counter based: draw ``r`` of particle ``i`` is a hash of
``(seed, i, r)``, so the output does not depend on how particles are split
among workers, nor on which backend runs the walk.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .kernel import Kernel
from .operator import Field

WHOLE_SPACE = "whole"
DIRICHLET_ABSORBING = "dirichlet"
BLOCK = 1 << 16


@dataclass(frozen=True)
class McConfig:
    particles: int
    t_final: float
    seed: int = 0
    mode: str = DIRICHLET_ABSORBING
    reflect_jumps: bool = False
    workers: Optional[int] = None

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("need at least one particle")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")
        if self.mode not in (WHOLE_SPACE, DIRICHLET_ABSORBING):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")


@dataclass
class McDensity:
    x: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    h: float
    particles: int
    surviving_fraction: float
    mean_jumps: float
    mode: str

    @property
    def absorbed_fraction(self) -> float:
        return 1.0 - self.surviving_fraction

    def summary(self) -> dict:
        return {"surviving_fraction": self.surviving_fraction, "mean_jumps": self.mean_jumps}


def poisson_cdf(t: float, tail: float = 1e-16) -> np.ndarray:
    """Cumulative Poisson(t) table, cut where the remaining tail is below ``tail``."""
    if t == 0:
        return np.array([1.0])
    kmax = int(t + 12.0 * math.sqrt(t) + 40)
    k = np.arange(kmax + 1)
    logp = -t + k * math.log(t) - np.array([math.lgamma(v + 1) for v in k])
    cdf = np.minimum(np.cumsum(np.exp(logp)), 1.0)
    stop = int(np.searchsorted(cdf, 1.0 - tail)) + 1
    cdf = cdf[: min(stop, len(cdf))].copy()
    cdf[-1] = 1.0
    return cdf


def _cdf(weights: np.ndarray) -> np.ndarray:
    c = np.cumsum(weights)
    c /= c[-1]
    c[-1] = 1.0
    return c


def simulate(u0: Field, k: Kernel, cfg: McConfig, backend: Optional[str] = None) -> McDensity:
    """Estimate the particle density at ``cfg.t_final``."""
    g = u0.geometry
    if not g.compatible(k):
        raise ValueError("kernel and geometry do not share the lattice")
    c0 = u0.closure_values
    if np.any(c0 < 0):
        raise ValueError("initial density must be nonnegative")
    mass = float(c0.sum() * g.h)
    if abs(mass - 1.0) > 1e-10:
        raise ValueError(f"initial density has mass {mass}, expected 1")
    core = _backend.get(backend)
    start_cdf = _cdf(c0)
    pcdf = poisson_cdf(cfg.t_final)
    jcdf = _cdf(k.weights)
    absorbing = cfg.mode == DIRICHLET_ABSORBING
    M = int(cfg.particles)
    blocks = [(b, min(BLOCK, M - b)) for b in range(0, M, BLOCK)]

    def run(block):
        first, count = block
        return core.walk(np.uint64(cfg.seed), first, count, start_cdf, pcdf, jcdf,
                         k.J, g.n, absorbing, bool(cfg.reflect_jumps))

    workers = min(cfg.workers or _backend.threads(), len(blocks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    pos = np.concatenate([p[0] for p in parts])
    alive = np.concatenate([p[1] for p in parts]).astype(bool)
    jumps = np.concatenate([p[2] for p in parts])
    mean_jumps = float(jumps.sum()) / M

    if absorbing:
        idx = np.arange(1, g.n)
        counts = np.bincount(pos[alive] - 1, minlength=g.n - 1)[: g.n - 1]
        surviving = float(alive.sum()) / M
    else:
        lo, hi = int(pos.min()), int(pos.max())
        idx = np.arange(lo, hi + 1)
        counts = np.bincount(pos - lo, minlength=hi - lo + 1)
        surviving = 1.0
    p = counts / M
    return McDensity(
        x=g.xl + idx * g.h,
        density=p / g.h,
        stderr=np.sqrt(p * (1.0 - p) / M) / g.h,
        counts=counts,
        h=g.h,
        particles=M,
        surviving_fraction=surviving,
        mean_jumps=mean_jumps,
        mode=cfg.mode,
    )


@dataclass(frozen=True)
class DensityComparison:
    l1: float
    zscores: np.ndarray
    aggregated_stderr: float


def compare_density(mc: McDensity, u: Field) -> DensityComparison:
    """L1 distance on the interior nodes of ``u``.

    Bins of ``mc`` outside that node set count with ``u = 0``.
    ``aggregated_stderr`` is the expected L1 norm of pure sampling noise,
    ``sum sqrt(2/pi) * stderr * h``.
    """
    g = u.geometry
    if not math.isclose(mc.h, g.h, rel_tol=1e-12):
        raise ValueError("bin width differs from the grid spacing")
    pos = (mc.x - g.xl) / g.h
    ipos = np.rint(pos).astype(np.int64)
    if len(pos) and np.abs(pos - ipos).max() > 1e-6:
        raise ValueError("histogram bins are not aligned with the grid")
    ref = u.interior_values
    est = np.zeros_like(ref)
    err = np.zeros_like(ref)
    inside = (ipos >= 1) & (ipos <= g.n - 1)
    est[ipos[inside] - 1] = mc.density[inside]
    err[ipos[inside] - 1] = mc.stderr[inside]
    l1 = float(np.abs(est - ref).sum() * g.h + np.abs(mc.density[~inside]).sum() * g.h)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(err > 0, (est - ref) / err, 0.0)
    agg = float(math.sqrt(2.0 / math.pi) * err.sum() * g.h)
    return DensityComparison(l1=l1, zscores=z, aggregated_stderr=agg)
