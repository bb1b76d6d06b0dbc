"""Symmetric quadrature rules on triangles.

Rules are generated with the Grundmann-Moller construction for the
2-simplex, which is fully symmetric under vertex permutations and exact
for all polynomials up to the requested total degree.  Weights are
computed in exact rational arithmetic and rounded once, so the tables
carry no transcription error.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np

MIN_DEGREE = 2
MAX_DEGREE = 10


@dataclass(frozen=True)
class TriangleRule:
    """Quadrature nodes in barycentric coordinates, weights summing to 1."""

    degree: int
    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,), sum == 1 (area-fraction convention)

    @property
    def npoints(self) -> int:
        return self.points.shape[0]


def _compositions(total: int, parts: int):
    """All tuples of `parts` nonnegative integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Return a symmetric rule exact for polynomials of total degree <= degree.

    Supported degrees are MIN_DEGREE..MAX_DEGREE; anything else raises
    ValueError.
    """
    if not MIN_DEGREE <= degree <= MAX_DEGREE:
        raise ValueError(
            f"quadrature degree must be in [{MIN_DEGREE}, {MAX_DEGREE}], got {degree}"
        )
    n = 2                       # simplex dimension
    s = (degree - 1 + 1) // 2   # smallest s with 2s+1 >= degree
    d = 2 * s + 1

    # Grundmann-Moller: sum_i c_i sum_{|beta|=s-i} f((2*beta+1)/(d+n-2i)),
    # c_i = (-1)^i 2^{-2s} (d+n-2i)^d / (i! (d+n-i)!).  The c_i sum to the
    # simplex volume 1/2; normalizing makes the weights area fractions.
    by_point: dict[tuple[Fraction, Fraction, Fraction], Fraction] = {}
    for i in range(s + 1):
        denom = d + n - 2 * i
        coeff = (
            Fraction((-1) ** i)
            * Fraction(denom**d, 4**s)
            / (factorial(i) * factorial(d + n - i))
        )
        for beta in _compositions(s - i, n + 1):
            pt = tuple(Fraction(2 * b + 1, denom) for b in beta)
            by_point[pt] = by_point.get(pt, Fraction(0)) + coeff

    total = sum(by_point.values())
    assert total == Fraction(1, 2)
    pts = np.array([[float(c) for c in pt] for pt in sorted(by_point)])
    wts = np.array([float(by_point[pt] / total) for pt in sorted(by_point)])
    return TriangleRule(degree=degree, points=pts, weights=wts)


def map_to_triangle(rule: TriangleRule, coords: np.ndarray) -> np.ndarray:
    """Map barycentric rule points onto triangles.

    coords has shape (..., 3, 2); the result has shape (..., nq, 2).
    """
    return np.einsum("qa,...ad->...qd", rule.points, coords)


# Midpoint subdivision of the reference triangle, children in barycentric rows.
_CHILDREN = np.array([
    [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.5, 0.0, 0.5]],
    [[0.5, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]],
    [[0.5, 0.0, 0.5], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]],
    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
])

MAX_SUBDIVISION = 4


@lru_cache(maxsize=None)
def composite_rule(degree: int, level: int) -> TriangleRule:
    """Rule applied on 4^level congruent subtriangles.

    Sharply varying integrands (the anchored weights) are resolved by
    subdividing rather than raising the polynomial degree; the composite
    is still a plain rule on the reference triangle.
    """
    if not 0 <= level <= MAX_SUBDIVISION:
        raise ValueError(f"subdivision level must be in [0, {MAX_SUBDIVISION}]")
    base = triangle_rule(degree)
    pts, wts = base.points, base.weights
    for _ in range(level):
        pts = np.concatenate([pts @ child for child in _CHILDREN])
        wts = np.tile(wts / 4.0, 4)
    return TriangleRule(degree=degree, points=pts, weights=wts)


def quadrature_integrate(triangle, integrand, degree: int) -> float:
    """Integrate a scalar callable over one mesh triangle.

    `triangle` must expose `coords` (3x2 vertex array) and `area`;
    `integrand(x, y)` is evaluated at the mapped quadrature nodes.
    """
    rule = triangle_rule(degree)
    xy = map_to_triangle(rule, np.asarray(triangle.coords, dtype=float))
    vals = np.asarray([integrand(x, y) for x, y in xy], dtype=float)
    return float(triangle.area * np.dot(rule.weights, vals))
