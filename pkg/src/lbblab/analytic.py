"""Closed-form inf-sup values, bounds, and essential-spectrum intervals.

These are the reference quantities the experiments are checked against:
the disk value, the epitrochoid family, two-sided polygon bounds, corner
upper bounds, Cosserat essential-spectrum intervals, and two tabulated
rectangle values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "Kind",
    "NoReference",
    "ReferenceValue",
    "beta_disk",
    "beta_epitrochoid",
    "corner_upper_bound",
    "cosserat_interval",
    "polygon_bounds",
    "polygon_gap_bound",
    "rectangle_reference",
]


class Kind(str, Enum):
    EXACT = "exact"
    UPPER_BOUND = "upper-bound"
    LOWER_BOUND = "lower-bound"
    NUMERICAL = "numerical-reference"


class NoReference(LookupError):
    """No tabulated reference for the requested configuration."""


@dataclass(frozen=True)
class ReferenceValue:
    value: float
    kind: Kind
    provenance: str

    def __float__(self) -> float:
        return self.value


def beta_disk() -> ReferenceValue:
    """Inf-sup constant of the unit disk: 1/sqrt(2)."""
    return ReferenceValue(math.sqrt(0.5), Kind.EXACT, "disk")


def beta_epitrochoid(n: int, c: float) -> ReferenceValue:
    """Exact value for the epitrochoid image of the disk under z - (c/n) z^n.

    beta^2 = 1/2 - (c/4)(1 + 1/n) for odd n, 1/2 - (c/4) sqrt(1 + 2/n) for
    even n.
    """
    if n < 2:
        raise ValueError("epitrochoid index must be at least 2")
    if not 0.0 < c <= 1.0:
        raise ValueError("c must lie in (0, 1]")
    if n % 2 == 1:
        sq = 0.5 - 0.25 * c * (1.0 + 1.0 / n)
    else:
        sq = 0.5 - 0.25 * c * math.sqrt(1.0 + 2.0 / n)
    return ReferenceValue(math.sqrt(sq), Kind.EXACT, f"epitrochoid(n={n}, c={c})")


def polygon_bounds(n: int) -> tuple[ReferenceValue, ReferenceValue]:
    """Two-sided bounds for the regular n-gon inscribed in the unit circle:
    sin(pi/4 - pi/(2n)) <= beta <= 1/sqrt(2)."""
    if n < 3:
        raise ValueError("polygon needs at least 3 edges")
    low = math.sin(math.pi / 4.0 - math.pi / (2.0 * n))
    return (
        ReferenceValue(low, Kind.LOWER_BOUND, f"regular polygon n={n}"),
        ReferenceValue(math.sqrt(0.5), Kind.UPPER_BOUND, f"regular polygon n={n}"),
    )


def polygon_gap_bound(n: int) -> float:
    """First-order bound pi/(2n) on 1/sqrt(2) - beta(n-gon)."""
    if n < 3:
        raise ValueError("polygon needs at least 3 edges")
    return math.pi / (2.0 * n)


def corner_upper_bound(omega: float) -> ReferenceValue:
    """Upper bound sqrt(1/2 - sin(omega)/(2 omega)) from a corner of opening omega."""
    if not 0.0 < omega < 2.0 * math.pi:
        raise ValueError("corner opening must lie in (0, 2*pi)")
    return ReferenceValue(
        math.sqrt(0.5 - math.sin(omega) / (2.0 * omega)),
        Kind.UPPER_BOUND,
        f"corner omega={omega}",
    )


def cosserat_interval(omega: float) -> tuple[float, float]:
    """Essential-spectrum interval [1/2 - sin(w)/(2w), 1/2 + sin(w)/(2w)]
    contributed by a corner of opening w."""
    if not 0.0 < omega < 2.0 * math.pi:
        raise ValueError("corner opening must lie in (0, 2*pi)")
    half = math.sin(omega) / (2.0 * omega)
    return (0.5 - half, 0.5 + half)


_RECTANGLE_TABLE = {
    4.0: 0.218444,
    2.0: 0.387262,
}


def rectangle_reference(aspect: float) -> ReferenceValue:
    """Tabulated numerical references for rectangles of aspect 4:1 and 2:1."""
    try:
        value = _RECTANGLE_TABLE[float(aspect)]
    except KeyError:
        raise NoReference(f"no tabulated value for aspect ratio {aspect}") from None
    return ReferenceValue(value, Kind.NUMERICAL, f"rectangle {aspect:g}:1")
