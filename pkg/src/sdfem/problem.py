"""Continuous convection-diffusion problem data.

The model equation on the unit square is

    -eps * (u_xx + u_yy) + b * u_x + c * u = f,    u = 0 on the boundary,

with constant coefficients eps, b, c and a lower convection bound beta
(b >= beta > 0).  Right-hand sides and exact solutions are stored as
evaluable fields so that quadrature order can be raised freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


class SmoothField:
    """Scalar field on the unit square with analytic partial derivatives.

    Wraps a dict mapping derivative orders (l, m) to vectorized callables;
    order (0, 0) is the field itself.  Only the orders supplied are
    available, which is all the downstream diagnostics need.
    """

    def __init__(self, derivs: Mapping[tuple[int, int], Evaluator]):
        if (0, 0) not in derivs:
            raise ValueError("field needs its own values under order (0, 0)")
        self._derivs = dict(derivs)

    def __call__(self, x, y):
        return self._derivs[(0, 0)](x, y)

    def d(self, l: int, m: int) -> Evaluator:
        """Return the (d^l/dx^l)(d^m/dy^m) evaluator."""
        try:
            return self._derivs[(l, m)]
        except KeyError:
            raise KeyError(f"derivative order ({l}, {m}) not provided") from None

    @property
    def orders(self):
        return frozenset(self._derivs)


def constant_field(value: float) -> SmoothField:
    v = float(value)
    full = lambda x, y: np.broadcast_to(np.float64(v), np.broadcast_shapes(np.shape(x), np.shape(y))).copy()
    zero = lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y)))
    orders = {(l, m): zero for l in range(3) for m in range(3 - l)}
    orders[(0, 0)] = full
    return SmoothField(orders)


def sine_product_field() -> SmoothField:
    """sin(pi x) sin(pi y) with derivatives through total order 2."""
    pi = np.pi
    return SmoothField({
        (0, 0): lambda x, y: np.sin(pi * x) * np.sin(pi * y),
        (1, 0): lambda x, y: pi * np.cos(pi * x) * np.sin(pi * y),
        (0, 1): lambda x, y: pi * np.sin(pi * x) * np.cos(pi * y),
        (2, 0): lambda x, y: -pi**2 * np.sin(pi * x) * np.sin(pi * y),
        (1, 1): lambda x, y: pi**2 * np.cos(pi * x) * np.cos(pi * y),
        (0, 2): lambda x, y: -pi**2 * np.sin(pi * x) * np.sin(pi * y),
    })


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data of the model problem."""

    epsilon: float
    b: float = 1.0
    c: float = 1.0
    beta: float = 1.0
    f: Evaluator = field(default=constant_field(1.0))
    u_exact: Optional[SmoothField] = None

    def __post_init__(self):
        for name in ("b", "c", "beta"):
            if callable(getattr(self, name)):
                raise TypeError(f"coefficient {name} must be a constant, not a callable")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.c > 0:
            raise ValueError("c must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.b < self.beta:
            raise ValueError("convection coefficient b must satisfy b >= beta")

    def check_mesh_compatible(self, n_intervals: int, strict: bool = True) -> None:
        """Reject eps > 1/N pairings in strict mode."""
        if strict and self.epsilon > 1.0 / n_intervals:
            raise ValueError(
                f"strict mode requires epsilon <= 1/N (epsilon={self.epsilon}, N={n_intervals})"
            )


def manufactured_rhs(u: SmoothField, spec: ProblemSpec) -> Evaluator:
    """Apply the differential operator to a smooth u.

    Returns f(x, y) = -eps*(u_xx + u_yy) + b*u_x + c*u, evaluable pointwise;
    with this f the exact solution of the problem is u (when u vanishes on
    the boundary).
    """
    u_val, u_x = u.d(0, 0), u.d(1, 0)
    u_xx, u_yy = u.d(2, 0), u.d(0, 2)

    def rhs(x, y):
        return (-spec.epsilon * (u_xx(x, y) + u_yy(x, y))
                + spec.b * u_x(x, y) + spec.c * u_val(x, y))

    return rhs


def make_problem(preset: str, epsilon: float, b: float = 1.0, c: float = 1.0,
                 beta: float = 1.0) -> ProblemSpec:
    """Build a named preset problem.

    Presets:
      constant-f        f == 1, no exact solution.
      manufactured-sine u = sin(pi x) sin(pi y) with matching right-hand side.
    """
    if preset == "constant-f":
        return ProblemSpec(epsilon=epsilon, b=b, c=c, beta=beta, f=constant_field(1.0))
    if preset == "manufactured-sine":
        u = sine_product_field()
        base = ProblemSpec(epsilon=epsilon, b=b, c=c, beta=beta)
        return ProblemSpec(epsilon=epsilon, b=b, c=c, beta=beta,
                           f=manufactured_rhs(u, base), u_exact=u)
    raise ValueError(f"unknown problem preset {preset!r} "
                     "(available: constant-f, manufactured-sine)")


PRESETS = ("constant-f", "manufactured-sine")
