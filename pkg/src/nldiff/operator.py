"""The discrete Dirichlet operator and the extension by boundary data.

A solution :class:`Field` stores ``u`` on the closed-interval nodes and zero
elsewhere. :func:`extend` builds the array the operator actually reads:
``u`` on interior nodes, the boundary data on the extended boundary
(the two topological boundary nodes included) and zero on exterior nodes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.signal import fftconvolve

from . import _backend
from .geometry import EXTERIOR, DomainGeometry
from .kernel import Kernel

FFT_THRESHOLD = 256
COMPAT_TOL = 1e-12


class CompatibilityError(ValueError):
    """Initial data and boundary data disagree on the topological boundary."""


@dataclass(eq=False)
class Field:
    geometry: DomainGeometry
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.geometry.size,):
            raise ValueError(f"field has shape {v.shape}, geometry needs ({self.geometry.size},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        if np.any(v[self.geometry.tags == EXTERIOR] != 0):
            raise ValueError("field must vanish on exterior nodes")
        if self.time < 0:
            raise ValueError("field time must be nonnegative")
        self.values = v

    @classmethod
    def zeros(cls, g: DomainGeometry, t: float = 0.0) -> "Field":
        return cls(g, np.zeros(g.size), t)

    @classmethod
    def from_function(cls, g: DomainGeometry, f: Callable, t: float = 0.0) -> "Field":
        v = np.zeros(g.size)
        v[g.closure] = np.broadcast_to(f(g.closure_nodes), (g.n + 1,))
        return cls(g, v, t)

    @classmethod
    def from_closure(cls, g: DomainGeometry, closure_values, t: float = 0.0) -> "Field":
        v = np.zeros(g.size)
        v[g.closure] = closure_values
        return cls(g, v, t)

    @property
    def closure_values(self) -> np.ndarray:
        return self.values[self.geometry.closure]

    @property
    def interior_values(self) -> np.ndarray:
        return self.values[self.geometry.interior]

    def sup(self) -> float:
        return float(np.abs(self.closure_values).max())


class BoundaryData:
    """Dirichlet data ``phi(x, t)`` on the extended boundary.

    ``phi`` is called with an array of node coordinates and a scalar time.
    ``sup`` bounds ``|phi|``; when omitted it is sampled at ``t = 0`` and is
    only trustworthy for time-independent data.
    """

    def __init__(self, phi: Callable, sup: Optional[float] = None,
                 time_dependent: bool = True, name: str = "custom", params: Optional[dict] = None):
        self.phi = phi
        self.time_dependent = time_dependent
        self.name = name
        self.params = params or {}
        self._sup = sup
        self._cache: dict = {}

    @classmethod
    def zero(cls) -> "BoundaryData":
        return cls(lambda x, t: np.zeros_like(x), sup=0.0, time_dependent=False, name="zero")

    @classmethod
    def constant(cls, c: float) -> "BoundaryData":
        return cls(lambda x, t: np.full_like(x, c, dtype=float), sup=abs(c),
                   time_dependent=False, name="constant", params={"value": c})

    @classmethod
    def affine(cls, slope: float, intercept: float = 0.0) -> "BoundaryData":
        """Affine exterior extension, the whole-space harness for linear data."""
        return cls(lambda x, t: slope * x + intercept, time_dependent=False, name="affine",
                   params={"slope": slope, "intercept": intercept})

    @classmethod
    def from_values(cls, g: DomainGeometry, values) -> "BoundaryData":
        """Time-independent data given node by node on the extended lattice of ``g``."""
        table = np.asarray(values, dtype=float)
        xs = g.x

        def phi(x, t):
            idx = np.rint((x - xs[0]) / g.h).astype(int)
            return table[idx]

        return cls(phi, sup=float(np.abs(table[g.boundary_mask]).max(initial=0.0)),
                   time_dependent=False, name="tabulated")

    @property
    def is_zero(self) -> bool:
        return self.name == "zero"

    def sample(self, g: DomainGeometry, t: float) -> np.ndarray:
        """Values on the ``EXTENDED_BOUNDARY`` nodes of ``g`` at time ``t``."""
        key = (id(g), None if not self.time_dependent else float(t))
        hit = self._cache.get(key)
        if hit is not None and hit[0] is g:
            return hit[1]
        vals = np.asarray(self.phi(g.x[g.boundary_mask], float(t)), dtype=float)
        vals = np.broadcast_to(vals, (int(g.boundary_mask.sum()),)).copy()
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"boundary data is not finite at t = {t}")
        if not self.time_dependent:
            self._cache[key] = (g, vals)
        return vals

    def bounded_sup(self, g: DomainGeometry) -> float:
        if self._sup is not None:
            return float(self._sup)
        return float(np.abs(self.sample(g, 0.0)).max(initial=0.0))


def check_compatibility(u0: Field, phi: BoundaryData, tol: float = COMPAT_TOL) -> None:
    """Raise unless ``u0`` matches ``phi(., 0)`` on the two boundary nodes."""
    g = u0.geometry
    e = list(g.edges)
    want = np.asarray(phi.phi(g.x[e], 0.0), dtype=float)
    got = u0.values[e]
    if np.any(np.abs(got - want) > tol):
        raise CompatibilityError(
            f"u0 = {got.tolist()} but phi(., 0) = {np.broadcast_to(want, (2,)).tolist()} on the boundary")


class Operator:
    """Precomputed application of ``K_phi`` on one geometry/kernel pair.

    ``method`` is ``"direct"``, ``"fft"`` or ``"auto"`` (FFT above
    ``FFT_THRESHOLD`` half-width). Only the direct path keeps the rounding
    monotone, which the exact comparison checks rely on.
    """

    def __init__(self, g: DomainGeometry, k: Kernel, phi: BoundaryData,
                 method: str = "auto", backend: Optional[str] = None):
        if not g.compatible(k):
            raise ValueError("kernel and geometry do not share the lattice")
        if method == "auto":
            method = "fft" if k.J > FFT_THRESHOLD else "direct"
        if method not in ("direct", "fft"):
            raise ValueError(f"unknown method {method!r}")
        self.g, self.k, self.phi = g, k, phi
        self.method = method
        self.core = _backend.get(backend)
        self._mask = g.boundary_mask
        self._lo = g.pad - k.J
        self._hi = g.pad + g.n + k.J + 1

    def extend(self, closure: np.ndarray, times) -> np.ndarray:
        """Batch extension: rows of closure values at the given times."""
        g = self.g
        closure = np.atleast_2d(closure)
        times = np.broadcast_to(np.asarray(times, dtype=float), (closure.shape[0],))
        ext = np.zeros((closure.shape[0], g.size))
        ext[:, g.interior] = closure[:, 1:-1]
        if self.phi.time_dependent:
            for r, t in enumerate(times):
                ext[r, self._mask] = self.phi.sample(g, t)
        else:
            ext[:, self._mask] = self.phi.sample(g, 0.0)
        return ext

    def gain(self, ext: np.ndarray) -> np.ndarray:
        """Weighted sums ``sum_j w_j ext(x + z_j)`` at every closure node."""
        window = np.ascontiguousarray(ext[:, self._lo: self._hi])
        nout = self.g.n + 1
        if self.method == "fft":
            return fftconvolve(window, self.k.weights[::-1][None, :], mode="valid", axes=1)
        out = np.empty((window.shape[0], nout))
        self.core.correlate(window, self.k.weights, 0, out)
        return out

    def apply(self, closure: np.ndarray, times) -> np.ndarray:
        closure = np.atleast_2d(closure)
        return self.gain(self.extend(closure, times)) - closure


def _operator_for(u: Field, phi: BoundaryData, k: Kernel, method: str) -> Operator:
    if not u.geometry.compatible(k):
        raise ValueError("field geometry and kernel do not match")
    return Operator(u.geometry, k, phi, method=method)


def extend(u: Field, phi: BoundaryData, t: Optional[float] = None) -> Field:
    """The extension ``u~``: ``u`` inside, ``phi(., t)`` on the extended boundary, 0 outside."""
    g = u.geometry
    t = u.time if t is None else t
    v = np.zeros(g.size)
    v[g.interior] = u.interior_values
    v[g.boundary_mask] = phi.sample(g, t)
    return Field(g, v, t)


def apply_K(u: Field, phi: BoundaryData, k: Kernel, method: str = "auto") -> Field:
    """``K_phi(u)`` on every node of the closed interval (zero elsewhere)."""
    op = _operator_for(u, phi, k, method)
    out = op.apply(u.closure_values, u.time)[0]
    return Field.from_closure(u.geometry, out, u.time)
