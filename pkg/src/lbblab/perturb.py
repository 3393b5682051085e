"""Boundary-graph diffeomorphisms between a curved domain and its polygonal
approximation, with measured Lipschitz closeness.

A patch is a strip under a C^2 graph x2 = phi(x1); the map keeps x1 and
rescales x2 by phi_h/phi, where phi_h is the piecewise-affine interpolant of
phi at the patch nodes.  Outside the strip the map is the identity; epsilon
is the sampled sup of the spectral norm of the displacement gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "GraphBoundaryPatch",
    "GraphMap",
    "LipschitzMapEstimate",
    "NotADiffeomorphism",
    "PiecewiseAffine",
    "build_graph_map",
    "estimate_eps",
    "interpolate_boundary",
    "polygon_disk_eps",
]


class NotADiffeomorphism(ValueError):
    """The rescaling factor is not positive on the patch."""


@dataclass(frozen=True)
class GraphBoundaryPatch:
    """A C^2 boundary graph phi >= eta0 > 0 over [a, b] with interpolation nodes."""

    interval: tuple[float, float]
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    ddphi: Callable[[np.ndarray], np.ndarray]
    eta0: float
    nodes: np.ndarray

    def __post_init__(self):
        a, b = self.interval
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if self.eta0 <= 0:
            raise ValueError("eta0 must be positive")
        if len(nodes) < 2 or (np.diff(nodes) <= 0).any():
            raise ValueError("nodes must be strictly increasing")
        if not (math.isclose(nodes[0], a, abs_tol=1e-14) and math.isclose(nodes[-1], b, abs_tol=1e-14)):
            raise ValueError("nodes must span the patch interval")
        xs = np.linspace(a, b, 257)
        if (np.asarray(self.phi(xs)) < self.eta0 - 1e-12).any():
            raise ValueError("phi drops below its stated lower bound eta0")


class PiecewiseAffine:
    """Piecewise-affine interpolant with one-sided slopes at the nodes."""

    def __init__(self, nodes: np.ndarray, values: np.ndarray):
        self.nodes = np.asarray(nodes, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.slopes = np.diff(self.values) / np.diff(self.nodes)

    def interval_of(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, len(self.slopes) - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = self.interval_of(x)
        return self.values[i] + self.slopes[i] * (x - self.nodes[i])

    def derivative(self, x, interval=None):
        x = np.asarray(x, dtype=float)
        i = self.interval_of(x) if interval is None else interval
        return self.slopes[i]


def interpolate_boundary(patch: GraphBoundaryPatch) -> PiecewiseAffine:
    """Piecewise-affine interpolant of phi at the patch nodes."""
    return PiecewiseAffine(patch.nodes, np.asarray(patch.phi(patch.nodes), dtype=float))


class GraphMap:
    """F(x1, x2) = (x1, (phi_h/phi)(x1) * x2) on the strip, identity outside."""

    def __init__(self, patch: GraphBoundaryPatch, phi_h: PiecewiseAffine):
        self.patch = patch
        self.phi_h = phi_h

    def _interp(self, x1, interval):
        if interval is None:
            return self.phi_h(x1)
        return self.phi_h.values[interval] + self.phi_h.slopes[interval] * (
            np.asarray(x1) - self.phi_h.nodes[interval]
        )

    def ratio(self, x1, interval=None):
        return self._interp(x1, interval) / self.patch.phi(x1)

    def ratio_derivative(self, x1, interval=None):
        x1 = np.asarray(x1, dtype=float)
        p = np.asarray(self.patch.phi(x1), dtype=float)
        dp = np.asarray(self.patch.dphi(x1), dtype=float)
        ph = self._interp(x1, interval)
        dph = self.phi_h.derivative(x1, interval=interval)
        return (dph * p - ph * dp) / (p * p)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = pts.copy()
        a, b = self.patch.interval
        inside = (pts[:, 0] >= a) & (pts[:, 0] <= b) & (pts[:, 1] >= 0)
        x1 = pts[inside, 0]
        out[inside, 1] = self.ratio(x1) * pts[inside, 1]
        return out

    def invert(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = pts.copy()
        a, b = self.patch.interval
        inside = (pts[:, 0] >= a) & (pts[:, 0] <= b) & (pts[:, 1] >= 0)
        x1 = pts[inside, 0]
        out[inside, 1] = pts[inside, 1] / self.ratio(x1)
        return out

    def displacement_gradient(self, x1, x2, interval=None) -> np.ndarray:
        """DG = DF - I at (x1, x2), shape (..., 2, 2)."""
        r = self.ratio(x1, interval=interval)
        dr = self.ratio_derivative(x1, interval=interval)
        g = np.zeros((*np.broadcast(np.asarray(x1), np.asarray(x2)).shape, 2, 2))
        g[..., 1, 0] = np.asarray(x2) * dr
        g[..., 1, 1] = r - 1.0
        return g


def build_graph_map(patch: GraphBoundaryPatch, phi_h: PiecewiseAffine) -> GraphMap:
    """Assemble the patch map, rejecting non-positive interpolants."""
    if (phi_h.values <= 0).any():
        raise NotADiffeomorphism("interpolant is not positive on the patch")
    return GraphMap(patch, phi_h)


@dataclass(frozen=True)
class LipschitzMapEstimate:
    """Sampled Lipschitz closeness of one map (or the max over a patchwork).

    eps_forward = sup ||DF - I||, eps_inverse = sup ||DF^-1 - I|| (spectral
    norms), eps = max of both, jacobian_deviation = sup |1 - det DF|.  The
    Neumann bound eps0/(1 - eps0) is infinite when eps_forward >= 1.
    """

    eps_forward: float
    eps_inverse: float
    eps: float
    jacobian_deviation: float
    sample_count: int
    neumann_inverse_bound: float

    @staticmethod
    def combine(parts: list["LipschitzMapEstimate"]) -> "LipschitzMapEstimate":
        return LipschitzMapEstimate(
            eps_forward=max(p.eps_forward for p in parts),
            eps_inverse=max(p.eps_inverse for p in parts),
            eps=max(p.eps for p in parts),
            jacobian_deviation=max(p.jacobian_deviation for p in parts),
            sample_count=sum(p.sample_count for p in parts),
            neumann_inverse_bound=max(p.neumann_inverse_bound for p in parts),
        )


def spectral_norm_2x2(mats: np.ndarray) -> np.ndarray:
    """Largest singular value of stacked 2x2 matrices, closed form."""
    a, b = mats[..., 0, 0], mats[..., 0, 1]
    c, d = mats[..., 1, 0], mats[..., 1, 1]
    s1 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.sqrt(np.maximum(s1 * s1 - 4.0 * det * det, 0.0))
    return np.sqrt(np.maximum(0.5 * (s1 + disc), 0.0))


def estimate_eps(graph_map: GraphMap, grid_density: int = 512) -> LipschitzMapEstimate:
    """Sample the displacement gradient on a tensor grid over the strip.

    x1 samples are distributed per subinterval (slopes are one-sided at the
    interpolation nodes); each x1 carries grid_density
    x2-levels from 0 up to phi(x1).  This is a lower-bound estimator of the
    true sup that stabilizes under grid refinement.
    """
    if grid_density < 100:
        raise ValueError("grid density must be at least 100 per axis")
    patch = graph_map.patch
    a, b = patch.interval
    xs, ivl = [], []
    for i in range(len(patch.nodes) - 1):
        x0, x1 = patch.nodes[i], patch.nodes[i + 1]
        count = max(4, int(round(grid_density * (x1 - x0) / (b - a))) + 1)
        xs.append(np.linspace(x0, x1, count))
        ivl.append(np.full(count, i))
    x = np.concatenate(xs)
    ivl = np.concatenate(ivl)
    r = graph_map.ratio(x, interval=ivl)
    if (r <= 0).any():
        raise NotADiffeomorphism("mapped boundary crosses zero on the patch")
    dr = graph_map.ratio_derivative(x, interval=ivl)
    phi = np.asarray(patch.phi(x), dtype=float)
    t = np.linspace(0.0, 1.0, grid_density)
    x2dr = np.multiply.outer(t, phi * dr)  # x2 * r'
    rr = np.broadcast_to(r - 1.0, x2dr.shape)
    fwd = np.zeros((*x2dr.shape, 2, 2))
    fwd[..., 1, 0] = x2dr
    fwd[..., 1, 1] = rr
    eps_fwd = float(spectral_norm_2x2(fwd).max())
    inv = np.zeros_like(fwd)
    inv[..., 1, 0] = -x2dr / r
    inv[..., 1, 1] = 1.0 / r - 1.0
    eps_inv = float(spectral_norm_2x2(inv).max())
    jac_dev = float(np.abs(1.0 - r).max())
    neumann = eps_fwd / (1.0 - eps_fwd) if eps_fwd < 1.0 else float("inf")
    return LipschitzMapEstimate(
        eps_forward=eps_fwd,
        eps_inverse=eps_inv,
        eps=max(eps_fwd, eps_inv),
        jacobian_deviation=jac_dev,
        sample_count=int(x2dr.size),
        neumann_inverse_bound=neumann,
    )


def circle_patches(n: int) -> list[tuple[GraphBoundaryPatch, PiecewiseAffine]]:
    """Four graph patches covering the unit circle against the inscribed n-gon.

    Each quarter is rotated so its arc is the graph x2 = sqrt(1 - x1^2);
    the interpolation nodes are the rotated polygon vertices, so the
    interpolant is exactly the chord chain of the polygon.
    """
    if n < 8:
        raise ValueError("patches stay graphs only for n >= 8")
    splits = [int(round(j * n / 4.0)) for j in range(5)]
    out = []

    def phi(x):
        return np.sqrt(1.0 - np.asarray(x) ** 2)

    def dphi(x):
        x = np.asarray(x)
        return -x / np.sqrt(1.0 - x**2)

    def ddphi(x):
        x = np.asarray(x)
        return -((1.0 - x**2) ** -1.5)

    for j in range(4):
        k0, k1 = splits[j], splits[j + 1]
        th0, th1 = 2.0 * math.pi * k0 / n, 2.0 * math.pi * k1 / n
        alpha = math.pi / 2.0 - 0.5 * (th0 + th1)
        nodes = np.array(
            sorted(math.cos(2.0 * math.pi * k / n + alpha) for k in range(k0, k1 + 1))
        )
        width = th1 - th0
        patch = GraphBoundaryPatch(
            interval=(float(nodes[0]), float(nodes[-1])),
            phi=phi,
            dphi=dphi,
            ddphi=ddphi,
            eta0=math.cos(0.5 * width) * (1.0 - 1e-12),
            nodes=nodes,
        )
        out.append((patch, interpolate_boundary(patch)))
    return out


def polygon_disk_eps(n: int, grid_density: int = 512) -> LipschitzMapEstimate:
    """Measured epsilon of the disk-to-inscribed-n-gon patchwork (max over
    the four patches)."""
    parts = [
        estimate_eps(build_graph_map(patch, phi_h), grid_density=grid_density)
        for patch, phi_h in circle_patches(n)
    ]
    return LipschitzMapEstimate.combine(parts)
