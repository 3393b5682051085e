import math

import pytest

from lbblab.analytic import (
    Kind,
    NoReference,
    beta_disk,
    beta_epitrochoid,
    corner_upper_bound,
    cosserat_interval,
    polygon_bounds,
    polygon_gap_bound,
    rectangle_reference,
)


def test_disk_value():
    v = beta_disk()
    assert v.value == pytest.approx(0.7071067811865476, abs=1e-16)
    assert v.value**2 == pytest.approx(0.5, abs=1e-15)
    assert v.kind is Kind.EXACT


def test_epitrochoid_values():
    assert beta_epitrochoid(3, 1.0).value == pytest.approx(math.sqrt(1.0 / 6.0), abs=1e-14)
    assert beta_epitrochoid(2, 1.0).value == pytest.approx(
        math.sqrt(0.5 - 0.25 * math.sqrt(2.0)), abs=1e-15
    )
    # even case n=2 happens to equal sin(pi/8)
    assert beta_epitrochoid(2, 1.0).value == pytest.approx(math.sin(math.pi / 8), abs=1e-14)
    # large-n limit with c=1: sqrt(1/2 - 1/4) = 1/2
    assert beta_epitrochoid(10**7 + 1, 1.0).value == pytest.approx(0.5, abs=1e-6)
    # c -> 0 recovers the disk
    assert beta_epitrochoid(5, 1e-14).value == pytest.approx(beta_disk().value, abs=1e-13)


def test_epitrochoid_monotone_in_c():
    vals = [beta_epitrochoid(4, c).value for c in (0.2, 0.5, 0.8, 1.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        beta_epitrochoid(1, 0.5)
    with pytest.raises(ValueError):
        beta_epitrochoid(3, 1.5)


def test_polygon_bounds():
    low, up = polygon_bounds(4)
    assert low.value == pytest.approx(math.sin(math.pi / 8), abs=1e-14)
    assert up.value == pytest.approx(math.sqrt(0.5), abs=1e-16)
    lows = [polygon_bounds(n)[0].value for n in range(3, 200)]
    assert all(a < b for a, b in zip(lows, lows[1:]))
    assert all(v < 1 / math.sqrt(2) for v in lows)
    assert polygon_bounds(10**9)[0].value == pytest.approx(1 / math.sqrt(2), abs=1e-8)
    assert polygon_gap_bound(16) == pytest.approx(math.pi / 32, abs=1e-16)


def test_corner_upper_bound():
    assert corner_upper_bound(math.pi / 3).value == pytest.approx(
        math.sqrt(0.5 - 3 * math.sqrt(3.0) / (4 * math.pi)), abs=1e-14
    )
    assert corner_upper_bound(math.pi / 3).value == pytest.approx(0.294113, abs=2e-6)
    assert corner_upper_bound(math.pi).value == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert corner_upper_bound(math.pi / 2).value == pytest.approx(
        math.sqrt(0.5 - 1 / math.pi), abs=1e-14
    )
    for omega in (0.3, 1.0, 2.0, 3.0):
        assert corner_upper_bound(omega).value < 1 / math.sqrt(2)
    with pytest.raises(ValueError):
        corner_upper_bound(0.0)


def test_cosserat_interval():
    lo, hi = cosserat_interval(math.pi / 2)
    assert lo == pytest.approx(0.5 - 1 / math.pi, abs=1e-15)
    assert hi == pytest.approx(0.5 + 1 / math.pi, abs=1e-15)
    assert (lo, hi) == pytest.approx((0.18169, 0.81831), abs=1e-5)
    assert cosserat_interval(math.pi) == pytest.approx((0.5, 0.5), abs=1e-15)
    lo3, hi3 = cosserat_interval(math.pi / 3)
    half = math.sin(math.pi / 3) / (2 * math.pi / 3)
    assert half == pytest.approx(3 * math.sqrt(3) / (4 * math.pi), abs=1e-15)
    assert (lo3, hi3) == pytest.approx((0.5 - half, 0.5 + half), abs=1e-15)


def test_rectangle_reference():
    assert rectangle_reference(4).value == pytest.approx(0.218444, abs=1e-12)
    assert rectangle_reference(2).value == pytest.approx(0.387262, abs=1e-12)
    assert rectangle_reference(4).kind is Kind.NUMERICAL
    with pytest.raises(NoReference):
        rectangle_reference(3)


def test_reference_ordering_invariant():
    # lower bound <= exact <= upper bound where all exist (disk vs polygon)
    low, up = polygon_bounds(32)
    assert low.value <= beta_disk().value <= up.value
