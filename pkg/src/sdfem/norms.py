"""Energy norm, nodal interpolation, and anisotropic interpolation diagnostics.

The SD energy norm is |||v|||^2 = eps*|v|_1^2 + ||v||^2 + sum_K delta_K
||b v_x||_K^2.  For piecewise linears every term has a closed form, so no
quadrature enters the norm itself; interpolation-error reports integrate
non-polynomial fields with symmetric rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import FEFunction, StabilizationConfig, element_deltas, _eval_field
from .mesh import Region, ShishkinMesh
from .problem import ProblemSpec, SmoothField
from .quadrature import composite_rule, map_to_triangle, triangle_rule

INTERP_GATE_RTOL = 1e-8

# Interior sample points for the p=inf pseudo-sup: 10 symmetric interior
# points plus the three edge midpoints; vertices are added separately.
_INF_SAMPLE_EXTRA = np.array([
    [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5],
])


def element_energy_sq(v: FEFunction, problem: ProblemSpec,
                      config: StabilizationConfig) -> np.ndarray:
    """Per-element contributions to |||v|||^2 (exact P1 integrals)."""
    mesh = v.mesh
    area = mesh.tri_area
    delta = element_deltas(mesh, config)
    vl = v.element_values()
    vg = v.element_gradients()
    sv = vl.sum(axis=1)
    grad_sq = area * (vg[:, 0] ** 2 + vg[:, 1] ** 2)
    mass_sq = (area / 12.0) * ((vl * vl).sum(axis=1) + sv * sv)
    conv_sq = delta * problem.b ** 2 * vg[:, 0] ** 2 * area
    return problem.epsilon * grad_sq + mass_sq + conv_sq


def energy_norm(v: FEFunction, problem: ProblemSpec,
                config: StabilizationConfig) -> float:
    """SD energy norm |||v|||."""
    return float(np.sqrt(element_energy_sq(v, problem, config).sum()))


def nodal_interpolant(w, mesh: ShishkinMesh) -> FEFunction:
    """Piecewise linear matching w at every node (boundary values kept)."""
    xy = mesh.node_coords
    vals = _eval_field(w, xy[:, 0], xy[:, 1])
    return FEFunction(mesh, vals)


def energy_norm_error(u: SmoothField, uh: FEFunction, problem: ProblemSpec,
                      config: StabilizationConfig, degree: int = 6) -> float:
    """|||u - uh||| by element quadrature (u smooth, uh piecewise linear)."""
    mesh = uh.mesh
    rule = triangle_rule(degree)
    pts = map_to_triangle(rule, mesh.tri_coords)
    x, y = pts[:, :, 0], pts[:, :, 1]
    uh_at = np.einsum("ta,qa->tq", uh.element_values(), rule.points)
    g = uh.element_gradients()
    e = _eval_field(u.d(0, 0), x, y) - uh_at
    ex = _eval_field(u.d(1, 0), x, y) - g[:, 0][:, None]
    ey = _eval_field(u.d(0, 1), x, y) - g[:, 1][:, None]
    delta = element_deltas(mesh, config)
    w, area = rule.weights, mesh.tri_area
    int_e2 = np.einsum("tq,q,t->t", e * e, w, area)
    int_ex2 = np.einsum("tq,q,t->t", ex * ex, w, area)
    int_ey2 = np.einsum("tq,q,t->t", ey * ey, w, area)
    total = (problem.epsilon * (int_ex2 + int_ey2) + int_e2
             + delta * problem.b ** 2 * int_ex2)
    return float(np.sqrt(total.sum()))


@dataclass
class InterpolationReport:
    """Per-element interpolation errors against the anisotropic bounds.

    For each element the three measured norms ||w - w^I||, ||(w - w^I)_x||,
    ||(w - w^I)_y|| in L^p(K) are compared with the corresponding
    h_x/h_y-weighted sums of second-derivative norms; `ratio*` are the
    empirical constants.
    """

    p: float
    region: np.ndarray
    lhs: np.ndarray          # (T, 3): value, x-derivative, y-derivative errors
    rhs: np.ndarray          # (T, 3): bound values
    ratio: np.ndarray        # (T, 3)
    quad_disagreement: float
    quad_level: int = 0
    per_region_max: dict = field(default_factory=dict)

    def worst_ratio(self, region: Region | None = None) -> float:
        if region is None:
            return float(np.nanmax(self.ratio))
        mask = self.region == region
        return float(np.nanmax(self.ratio[mask])) if mask.any() else float("nan")


def _lp_element_norms(vals: np.ndarray, weights: np.ndarray, area: np.ndarray,
                      p: float) -> np.ndarray:
    """Element L^p norms of pointwise values sampled at rule points.

    The symmetric rules carry some negative weights, so a vanishing
    integrand can yield a tiny negative sum; clamp before taking the root.
    """
    s = np.maximum(np.einsum("tq,q->t", np.abs(vals) ** p, weights), 0.0)
    return s ** (1.0 / p) * area ** (1.0 / p)


def _interp_tables(w: SmoothField, mesh: ShishkinMesh, p: float, degree: int,
                   level: int = 0):
    rule = composite_rule(degree, level)
    pts = map_to_triangle(rule, mesh.tri_coords)
    x, y = pts[:, :, 0], pts[:, :, 1]
    vertex_vals = _eval_field(w.d(0, 0), mesh.tri_coords[:, :, 0], mesh.tri_coords[:, :, 1])
    wi_at = np.einsum("ta,qa->tq", vertex_vals, rule.points)
    wi_grad = np.einsum("ta,tad->td", vertex_vals, mesh.tri_grad)

    e = _eval_field(w.d(0, 0), x, y) - wi_at
    ex = _eval_field(w.d(1, 0), x, y) - wi_grad[:, 0][:, None]
    ey = _eval_field(w.d(0, 1), x, y) - wi_grad[:, 1][:, None]
    wxx = _eval_field(w.d(2, 0), x, y)
    wxy = _eval_field(w.d(1, 1), x, y)
    wyy = _eval_field(w.d(0, 2), x, y)

    area, wq = mesh.tri_area, rule.weights
    lhs = np.stack([_lp_element_norms(v, wq, area, p) for v in (e, ex, ey)], axis=1)
    d2 = np.stack([_lp_element_norms(v, wq, area, p) for v in (wxx, wxy, wyy)], axis=1)
    return lhs, d2


def _interp_tables_inf(w: SmoothField, mesh: ShishkinMesh):
    bary = np.vstack([triangle_rule(4).points, _INF_SAMPLE_EXTRA, np.eye(3)])
    pts = np.einsum("qa,tad->tqd", bary, mesh.tri_coords)
    x, y = pts[:, :, 0], pts[:, :, 1]
    vertex_vals = _eval_field(w.d(0, 0), mesh.tri_coords[:, :, 0], mesh.tri_coords[:, :, 1])
    wi_at = np.einsum("ta,qa->tq", vertex_vals, bary)
    wi_grad = np.einsum("ta,tad->td", vertex_vals, mesh.tri_grad)

    def sup(vals):
        return np.abs(vals).max(axis=1)

    lhs = np.stack([
        sup(_eval_field(w.d(0, 0), x, y) - wi_at),
        sup(_eval_field(w.d(1, 0), x, y) - wi_grad[:, 0][:, None]),
        sup(_eval_field(w.d(0, 1), x, y) - wi_grad[:, 1][:, None]),
    ], axis=1)
    d2 = np.stack([
        sup(_eval_field(w.d(2, 0), x, y)),
        sup(_eval_field(w.d(1, 1), x, y)),
        sup(_eval_field(w.d(0, 2), x, y)),
    ], axis=1)
    return lhs, d2


def interpolation_error_report(w: SmoothField, mesh: ShishkinMesh, p: float = 2.0,
                               degree: int = 6) -> InterpolationReport:
    """Measure the anisotropic interpolation bounds elementwise.

    p must lie in (1, inf]; p = inf uses dense sampling (a lower bound of
    the true sup).  Finite-p integrals run at `degree` and are re-checked
    at degree 10.
    """
    if not p > 1:
        raise ValueError(f"p must be > 1, got {p}")
    level = 0
    if np.isinf(p):
        lhs, d2 = _interp_tables_inf(w, mesh)
        disagreement = 0.0
    else:
        # Escalate by element subdivision until the degree-6/degree-10 pair
        # agrees; fixed-order rules alone can miss the gate on the coarsest
        # meshes.
        for level in range(4):
            lhs, d2 = _interp_tables(w, mesh, p, degree, level)
            lhs10, d210 = _interp_tables(w, mesh, p, 10, level)
            scale = max(lhs10.max(), d210.max())
            disagreement = float(max(
                np.abs(lhs - lhs10).max(), np.abs(d2 - d210).max()
            ) / scale) if scale > 0 else 0.0
            if disagreement <= INTERP_GATE_RTOL:
                break

    hx = np.diff(mesh.x_coords)[mesh.tri_cell[:, 0]]
    hy = np.diff(mesh.y_coords)[mesh.tri_cell[:, 1]]
    rhs = np.stack([
        hx**2 * d2[:, 0] + hx * hy * d2[:, 1] + hy**2 * d2[:, 2],
        hx * d2[:, 0] + hy * d2[:, 1],
        hx * d2[:, 1] + hy * d2[:, 2],
    ], axis=1)

    atol = 1e-12 * max(1.0, float(lhs.max()), float(rhs.max()))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0.0, lhs / np.where(rhs > 0.0, rhs, 1.0),
                         np.where(lhs <= atol, 0.0, np.inf))

    report = InterpolationReport(
        p=p, region=mesh.tri_region.copy(), lhs=lhs, rhs=rhs, ratio=ratio,
        quad_disagreement=disagreement, quad_level=level,
    )
    for reg in Region:
        mask = report.region == reg
        if mask.any():
            report.per_region_max[reg] = tuple(np.nanmax(ratio[mask], axis=0))
    return report
