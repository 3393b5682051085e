"""Reference-cell quadrature: tensor Gauss-Legendre and collapsed triangle rules."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .elements import Family


@dataclass(frozen=True)
class QuadratureRule:
    family: Family
    points: np.ndarray
    weights: np.ndarray
    exactness: int

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)


def _gauss_01(m: int):
    x, w = leggauss(m)
    return 0.5 * (x + 1.0), 0.5 * w


@functools.lru_cache(maxsize=None)
def quad_rule(family: Family, exactness: int) -> QuadratureRule:
    """Rule integrating polynomials up to `exactness` on the reference cell.

    Quads use an m x m Gauss-Legendre tensor grid on [0,1]^2 with
    m = ceil((exactness+1)/2).  Triangles use the collapsed (Duffy) rule
    x = u(1-v), y = v whose Jacobian (1-v) raises the v-degree by one.
    """
    if exactness < 0:
        raise ValueError("exactness must be nonnegative")
    family = Family(family)
    if family is Family.QUAD:
        m = (exactness + 2) // 2
        x, w = _gauss_01(m)
        X, Y = np.meshgrid(x, x, indexing="ij")
        W = np.multiply.outer(w, w)
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        return QuadratureRule(family, pts, W.ravel(), exactness)
    mu = (exactness + 2) // 2
    mv = (exactness + 3) // 2
    u, wu = _gauss_01(mu)
    v, wv = _gauss_01(mv)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.multiply.outer(wu, wv) * (1.0 - V)
    pts = np.stack([(U * (1.0 - V)).ravel(), V.ravel()], axis=1)
    return QuadratureRule(family, pts, W.ravel(), exactness)
