import math

import numpy as np
import pytest

from lbblab.fem.elements import Family, reference_element
from lbblab.fem.quadrature import quad_rule


def tri_monomial_integral(p, q):
    """Exact integral of x^p y^q over the reference triangle."""
    return math.factorial(p) * math.factorial(q) / math.factorial(p + q + 2)


def test_quad_midpoint_rule():
    r = quad_rule(Family.QUAD, 1)
    assert len(r.weights) == 1
    assert r.weights[0] == pytest.approx(1.0)
    assert np.allclose(r.points[0], [0.5, 0.5])


def test_triangle_rule_constant():
    r = quad_rule(Family.TRIANGLE, 4)
    assert r.weights.sum() == pytest.approx(0.5, abs=1e-15)


def test_triangle_rule_x3y5():
    r = quad_rule(Family.TRIANGLE, 8)
    val = (r.points[:, 0] ** 3 * r.points[:, 1] ** 5 * r.weights).sum()
    assert val == pytest.approx(
        math.factorial(3) * math.factorial(5) / math.factorial(10), rel=1e-13
    )


@pytest.mark.parametrize("exactness", range(0, 11))
def test_triangle_exactness_vs_factorial_oracle(exactness):
    r = quad_rule(Family.TRIANGLE, exactness)
    assert (r.weights > 0).all()
    for p in range(exactness + 1):
        for q in range(exactness + 1 - p):
            val = (r.points[:, 0] ** p * r.points[:, 1] ** q * r.weights).sum()
            assert val == pytest.approx(tri_monomial_integral(p, q), abs=1e-13)


@pytest.mark.parametrize("exactness", range(0, 11))
def test_quad_exactness(exactness):
    r = quad_rule(Family.QUAD, exactness)
    assert (r.weights > 0).all()
    for p in range(exactness + 1):
        for q in range(exactness + 1):
            if p + q > exactness and max(p, q) > exactness:
                continue
            val = (r.points[:, 0] ** p * r.points[:, 1] ** q * r.weights).sum()
            assert val == pytest.approx(1.0 / ((p + 1) * (q + 1)), abs=1e-13)


@pytest.mark.parametrize(
    "family,degree",
    [(Family.TRIANGLE, d) for d in range(1, 6)]
    + [(Family.QUAD, d) for d in (1, 2, 3, 6, 10, 16)],
)
def test_nodal_basis_properties(family, degree):
    ref = reference_element(family, degree)
    vals = ref.eval(ref.nodes)
    assert np.allclose(vals, np.eye(ref.n_basis), atol=1e-10)
    rng = np.random.default_rng(degree)
    pts = rng.uniform(0.05, 0.45, size=(30, 2))
    assert np.allclose(ref.eval(pts).sum(axis=1), 1.0, atol=1e-11)
    assert np.allclose(ref.grad(pts).sum(axis=1), 0.0, atol=1e-9)


@pytest.mark.parametrize("family,degree", [(Family.TRIANGLE, 4), (Family.QUAD, 5)])
def test_gradients_match_finite_differences(family, degree):
    ref = reference_element(family, degree)
    rng = np.random.default_rng(0)
    pts = rng.uniform(0.1, 0.4, size=(12, 2))
    g = ref.grad(pts)
    h = 1e-6
    for d, e in enumerate(np.eye(2)):
        fd = (ref.eval(pts + h * e) - ref.eval(pts - h * e)) / (2 * h)
        assert np.allclose(g[:, :, d], fd, atol=5e-6)


def test_basis_dimensions():
    assert reference_element(Family.TRIANGLE, 4).n_basis == 15
    assert reference_element(Family.TRIANGLE, 0).n_basis == 1
    assert reference_element(Family.QUAD, 3).n_basis == 16
    assert reference_element(Family.QUAD, 0).n_basis == 1


def test_quad_lattice_is_gauss_lobatto():
    ref = reference_element(Family.QUAD, 2)
    xs = sorted(set(np.round(ref.nodes[:, 0], 14)))
    assert xs == pytest.approx([0.0, 0.5, 1.0])
    ref4 = reference_element(Family.QUAD, 4)
    xs4 = np.array(sorted(set(np.round(ref4.nodes[:, 0], 14))))
    # interior Lobatto points of degree 4: roots of P4' mapped to [0,1]
    assert np.allclose(xs4, [0.0, (1 - math.sqrt(3.0 / 7.0)) / 2, 0.5,
                             (1 + math.sqrt(3.0 / 7.0)) / 2, 1.0], atol=1e-12)
