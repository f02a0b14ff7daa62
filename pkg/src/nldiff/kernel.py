"""Lattice representation of the jump measure.

The jump density is sampled on the offset lattice ``z_j = j*h`` with the
midpoint rule (density at the cell centre times ``h``), truncated to the
smallest symmetric window ``[-J, J]`` whose discarded mass stays below
``tail_tol`` and renormalised so the weights sum to one.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

FAMILIES = ("box", "gaussian", "indicator", "tabulated")

# relative slack for deciding whether a lattice offset sits on an interval end
_EDGE_TOL = 1e-9
# gaussian densities are sampled out to this many standard deviations
_GAUSS_REACH = 40.0


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of a jump density before discretisation.

    ``box(a, b)`` is the uniform density on the closed interval ``[a, b]``;
    ``indicator(a, b)`` is the characteristic function of the open interval
    ``(a, b)`` (rescaled to unit mass). ``tabulated`` holds ``(offset,
    density)`` rows read as a piecewise-constant density.
    """

    family: str
    a: Optional[float] = None
    b: Optional[float] = None
    sigma: Optional[float] = None
    samples: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    tail_tol: float = 1e-10

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (0.0 <= self.tail_tol < 1.0):
            raise ValueError(f"tail_tol must lie in [0, 1), got {self.tail_tol}")
        if self.family in ("box", "indicator"):
            if self.a is None or self.b is None or not self.a < self.b:
                raise ValueError(f"{self.family} kernel requires a < b")
        elif self.family == "gaussian":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError("gaussian kernel requires sigma > 0")
        else:
            if self.samples is None:
                raise ValueError("tabulated kernel requires samples")
            s = np.asarray(self.samples, dtype=float)
            if s.ndim != 2 or s.shape[1] != 2 or len(s) < 1:
                raise ValueError("tabulated samples must be an (n, 2) array")
            if np.any(s[:, 1] < 0):
                raise ValueError("tabulated density has negative values")
            if np.any(np.diff(s[:, 0]) <= 0):
                raise ValueError("tabulated offsets must be strictly increasing")
            object.__setattr__(self, "samples", s)

    @classmethod
    def box(cls, a: float, b: float, tail_tol: float = 1e-10) -> "KernelSpec":
        return cls("box", a=a, b=b, tail_tol=tail_tol)

    @classmethod
    def indicator(cls, a: float, b: float, tail_tol: float = 1e-10) -> "KernelSpec":
        return cls("indicator", a=a, b=b, tail_tol=tail_tol)

    @classmethod
    def gaussian(cls, sigma: float, tail_tol: float = 1e-10) -> "KernelSpec":
        return cls("gaussian", sigma=sigma, tail_tol=tail_tol)

    @classmethod
    def tabulated(cls, samples, tail_tol: float = 1e-10) -> "KernelSpec":
        return cls("tabulated", samples=np.asarray(samples, dtype=float), tail_tol=tail_tol)

    @classmethod
    def from_table(cls, path, tail_tol: float = 1e-10) -> "KernelSpec":
        """Read a two-column ``offset density`` text file."""
        data = np.loadtxt(Path(path), ndmin=2)
        return cls.tabulated(data, tail_tol=tail_tol)

    def density(self, z: np.ndarray) -> np.ndarray:
        """Unnormalised density evaluated at the offsets ``z``."""
        z = np.asarray(z, dtype=float)
        if self.family == "box":
            span = self.b - self.a
            tol = _EDGE_TOL * span
            inside = (z >= self.a - tol) & (z <= self.b + tol)
            return np.where(inside, 1.0 / span, 0.0)
        if self.family == "indicator":
            tol = _EDGE_TOL * (self.b - self.a)
            inside = (z > self.a + tol) & (z < self.b - tol)
            return np.where(inside, 1.0, 0.0)
        if self.family == "gaussian":
            s = self.sigma
            return np.exp(-0.5 * (z / s) ** 2) / (s * np.sqrt(2.0 * np.pi))
        # piecewise constant: each sample owns the cell between neighbouring midpoints
        off, dens = self.samples[:, 0], self.samples[:, 1]
        if len(off) == 1:
            return np.where(np.isclose(z, off[0]), dens[0], 0.0)
        mids = 0.5 * (off[1:] + off[:-1])
        lo = off[0] - (mids[0] - off[0])
        hi = off[-1] + (off[-1] - mids[-1])
        idx = np.searchsorted(mids, z, side="right")
        return np.where((z >= lo) & (z < hi), dens[idx], 0.0)

    def raw_reach(self, h: float) -> tuple[int, int]:
        """Lattice index range that can carry nonzero raw weight."""
        if self.family in ("box", "indicator"):
            lo, hi = self.a, self.b
        elif self.family == "gaussian":
            lo, hi = -_GAUSS_REACH * self.sigma, _GAUSS_REACH * self.sigma
        else:
            off = self.samples[:, 0]
            pad = (off[1] - off[0]) if len(off) > 1 else 0.0
            pad_hi = (off[-1] - off[-2]) if len(off) > 1 else 0.0
            lo, hi = off[0] - pad, off[-1] + pad_hi
        return int(np.floor(lo / h)) - 1, int(np.ceil(hi / h)) + 1


@dataclass(frozen=True, eq=False)
class Kernel:
    """Normalised lattice weights on offsets ``j*h`` for ``j = -J..J``."""

    weights: np.ndarray
    h: float
    truncated_mass: float = 0.0
    spec: Optional[KernelSpec] = None

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) % 2 != 1:
            raise ValueError("kernel weights must be a 1-D array of odd length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("kernel weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        cum = np.concatenate(([0.0], np.cumsum(w)))
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)
        nz = np.flatnonzero(w > 0)
        if len(nz) == 0:
            raise ValueError("kernel has no mass")
        J = (len(w) - 1) // 2
        object.__setattr__(self, "_support", (int(nz[0]) - J, int(nz[-1]) - J))

    @classmethod
    def from_weights(cls, weights: dict, h: float) -> "Kernel":
        """Build a kernel directly from ``{offset_index: weight}`` (renormalised)."""
        if h <= 0:
            raise ValueError("h must be positive")
        J = max(abs(int(j)) for j in weights)
        w = np.zeros(2 * J + 1)
        for j, v in weights.items():
            w[int(j) + J] = v
        return cls(_renormalise(w), h)

    @property
    def J(self) -> int:
        return (len(self.weights) - 1) // 2

    @property
    def effective_radius(self) -> float:
        return self.J * self.h

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.J, self.J + 1) * self.h

    @property
    def support_indices(self) -> tuple[int, int]:
        """Smallest and largest offset index carrying positive weight."""
        return self._support

    def window_mass(self, lo, hi):
        """Mass of offset indices ``lo..hi`` inclusive (vectorised, clamped)."""
        J = self.J
        jmin, jmax = self.support_indices
        lo, hi = np.asarray(lo), np.asarray(hi)
        full = (lo <= jmin) & (hi >= jmax)
        a = np.clip(lo + J, 0, 2 * J + 1)
        b = np.clip(hi + J + 1, 0, 2 * J + 1)
        part = np.where(b > a, self._cum[b] - self._cum[np.minimum(a, b)], 0.0)
        # a window holding the whole support carries exactly unit mass
        return np.where(full, 1.0, np.maximum(part, 0.0))

    def symmetric_support_radius(self) -> int:
        """Largest ``m`` with every weight at ``|j| <= m`` positive (-1 if w_0 = 0)."""
        J = self.J
        m = -1
        while m + 1 <= J and self.weights[J + m + 1] > 0 and self.weights[J - m - 1] > 0:
            m += 1
        return m

    def digest(self) -> str:
        hsh = hashlib.sha256()
        hsh.update(np.float64(self.h).tobytes())
        hsh.update(self.weights.tobytes())
        return hsh.hexdigest()


def _renormalise(w: np.ndarray) -> np.ndarray:
    total = w.sum()
    if not total > 0:
        raise ValueError("kernel has no mass on the lattice")
    return w / total


def build_kernel(spec: KernelSpec, h: float) -> Kernel:
    """Discretise ``spec`` on the lattice of spacing ``h``."""
    if not h > 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    lo, hi = spec.raw_reach(h)
    J_raw = max(abs(lo), abs(hi))
    j = np.arange(-J_raw, J_raw + 1)
    raw = spec.density(j * h) * h
    total = raw.sum()
    if not total > 0:
        raise ValueError("kernel support contains no lattice offset")

    # mass outside |j| <= J, for every J, relative to the full lattice mass
    mag = np.abs(j)
    outside = np.zeros(J_raw + 2)
    np.add.at(outside, mag, raw)
    tail = (total - np.cumsum(outside[: J_raw + 1])) / total
    tail = np.maximum(tail, 0.0)
    ok = np.flatnonzero(tail <= spec.tail_tol)
    J = int(ok[0])
    nz = np.flatnonzero(raw[np.abs(j) <= J] > 0)
    # shrink to the occupied window so J reflects the real reach
    kept = raw[J_raw - J: J_raw + J + 1]
    occupied = np.abs(np.arange(-J, J + 1)[nz]).max()
    kept = kept[J - occupied: J + occupied + 1]
    return Kernel(_renormalise(kept.copy()), h, truncated_mass=float(tail[J]), spec=spec)


def mass_on_set(k: Kernel, member: Callable[[np.ndarray], np.ndarray]) -> float:
    """Total weight of the offsets ``z`` for which ``member(z)`` holds."""
    mask = np.asarray(member(k.offsets), dtype=bool)
    if mask.shape == ():
        mask = np.full(k.offsets.shape, bool(mask))
    return float(min(max(k.weights[mask].sum(), 0.0), 1.0))
