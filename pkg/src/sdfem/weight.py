"""Anchored weight function and the weighted-norm estimates it supports.

The weight centered at a mesh node (x*, y*) is

    omega(x, y) = g(u) * g(s) * g(-s),   u = (x - x*)/sigma_x,
                                         s = (y - y*)/sigma_y,

with g(r) = 2/(1 + e^r).  The y factors combine to 2/(1 + cosh s), so
omega and its inverse have simple closed forms:

    omega^{-1}(x, y) = (1 + e^u) * (1 + cosh s) / 4.

All derivatives used below are analytic; no finite differences enter the
measured constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .assembly import (FEFunction, StabilizationConfig, bilinear_apply,
                       element_deltas)
from .mesh import ShishkinMesh
from .norms import element_energy_sq
from .problem import ProblemSpec
from .quadrature import (MAX_SUBDIVISION, composite_rule, map_to_triangle,
                         triangle_rule)

QUAD_GATE_RTOL = 1e-6
ESCALATED_DEGREE = 10

IV_ORDERS = ((1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
V_ORDERS = ((1, 0), (2, 0), (1, 1))


class QuadratureConvergenceError(RuntimeError):
    """Degree-6 and degree-10 results of a weighted integral disagree."""


class WeightPropertyError(RuntimeError):
    """A sign property of the weight function failed at a sample point."""


def sigma_params(epsilon: float, n: int, k: float, strict: bool = True) -> tuple[float, float]:
    """Localization scales (sigma_x, sigma_y) for the weight.

    sigma_x = k*max(1/N, eps*ln^2 N); sigma_y is k/sqrt(N) in the strongly
    perturbed regime eps <= 1/N^2 and k*max(N^{-3/2} eps^{-1/2}, sqrt(eps))
    for 1/N^2 <= eps <= 1/N.  Both branches agree at eps = 1/N^2.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if strict and epsilon > 1.0 / n:
        raise ValueError(
            f"sigma parameters assume epsilon <= 1/N (epsilon={epsilon}, N={n})"
        )
    log_n = np.log(float(n))
    sigma_x = k * max(1.0 / n, epsilon * log_n**2)
    if epsilon <= 1.0 / n**2:
        sigma_y = k * n**-0.5
    else:
        sigma_y = k * max(n**-1.5 * epsilon**-0.5, epsilon**0.5)
    return float(sigma_x), float(sigma_y)


@dataclass(frozen=True)
class WeightSpec:
    """Anchor node and localization scales of the weight function."""

    star: tuple[float, float]
    k: float
    sigma_x: float
    sigma_y: float

    def __post_init__(self):
        if self.sigma_x <= 0 or self.sigma_y <= 0:
            raise ValueError("sigma_x and sigma_y must be positive")


def make_weight_spec(star: tuple[float, float], epsilon: float, n: int, k: float,
                     strict: bool = True) -> WeightSpec:
    sx, sy = sigma_params(epsilon, n, k, strict=strict)
    return WeightSpec(star=(float(star[0]), float(star[1])), k=float(k),
                      sigma_x=sx, sigma_y=sy)


def _g(r):
    # 2/(1+e^r) without overflow for large |r|
    return 2.0 * expit(-np.asarray(r, dtype=float))


def _x_factor(u, order: int):
    """g(u) and derivatives: g' = g(g-2)/2, g'' = g'(g-1)."""
    g = _g(u)
    if order == 0:
        return g
    gp = 0.5 * g * (g - 2.0)
    if order == 1:
        return gp
    if order == 2:
        return gp * (g - 1.0)
    raise ValueError(f"x-factor derivative order {order} > 2")


def _y_factor(s, order: int):
    """psi(s) = g(s) g(-s) = 2/(1+cosh s) and derivatives."""
    s = np.asarray(s, dtype=float)
    gp, gm = _g(s), _g(-s)
    if order == 0:
        return gp * gm
    prod, diff = gp * gm, gp - gm
    if order == 1:
        return 0.5 * prod * diff
    if order == 2:
        diff_p = 0.5 * (gp * (gp - 2.0) + gm * (gm - 2.0))
        return 0.5 * prod * (0.5 * diff * diff + diff_p)
    raise ValueError(f"y-factor derivative order {order} > 2")


def weight_eval(spec: WeightSpec, x, y, l: int = 0, m: int = 0):
    """Partial derivative d^l/dx^l d^m/dy^m of omega (orders l + m <= 2)."""
    if l < 0 or m < 0 or l + m > 2:
        raise ValueError(f"derivative orders must satisfy l+m <= 2, got ({l}, {m})")
    u = (np.asarray(x, dtype=float) - spec.star[0]) / spec.sigma_x
    s = (np.asarray(y, dtype=float) - spec.star[1]) / spec.sigma_y
    return (_x_factor(u, l) / spec.sigma_x**l) * (_y_factor(s, m) / spec.sigma_y**m)


def weight_inv_eval(spec: WeightSpec, x, y, l: int = 0, m: int = 0):
    """Partial derivative of omega^{-1} = (1+e^u)(1+cosh s)/4."""
    if l < 0 or m < 0 or l + m > 2:
        raise ValueError(f"derivative orders must satisfy l+m <= 2, got ({l}, {m})")
    u = (np.asarray(x, dtype=float) - spec.star[0]) / spec.sigma_x
    s = (np.asarray(y, dtype=float) - spec.star[1]) / spec.sigma_y
    xf = np.exp(u) if l >= 1 else 1.0 + np.exp(u)
    if m == 0:
        yf = 1.0 + np.cosh(s)
    elif m == 1:
        yf = np.sinh(s)
    else:
        yf = np.cosh(s)
    return 0.25 * xf * yf / (spec.sigma_x**l * spec.sigma_y**m)


def star_node(mesh: ShishkinMesh, spec: WeightSpec) -> int:
    """Interior mesh node at the anchor; the anchor must be a node."""
    xs, ys = spec.star
    i = int(np.argmin(np.abs(mesh.x_coords - xs)))
    j = int(np.argmin(np.abs(mesh.y_coords - ys)))
    if abs(mesh.x_coords[i] - xs) > 1e-12 or abs(mesh.y_coords[j] - ys) > 1e-12:
        raise ValueError(f"anchor {spec.star} is not a mesh node")
    node = mesh.node_id(i, j)
    if mesh.boundary_mask[node]:
        raise ValueError(f"anchor {spec.star} lies on the boundary")
    return node


def _subdivision_levels(mesh: ShishkinMesh, spec: WeightSpec) -> np.ndarray:
    """Per-element subdivision so the weight varies mildly per subtriangle.

    The weight's log-derivative is bounded by 1/sigma in each direction, so
    level L with (h/sigma)/2^L <= 1/2 keeps fixed-order rules well inside
    the 1e-6 agreement gate.
    """
    hx = np.diff(mesh.x_coords)[mesh.tri_cell[:, 0]]
    hy = np.diff(mesh.y_coords)[mesh.tri_cell[:, 1]]
    stretch = np.maximum(hx / spec.sigma_x, hy / spec.sigma_y)
    levels = np.ceil(np.log2(np.maximum(2.0 * stretch, 1.0))).astype(int)
    return np.minimum(levels, MAX_SUBDIVISION)


class _QuadBlock:
    """One group of elements sharing a (possibly composite) rule."""

    def __init__(self, mesh: ShishkinMesh, spec: WeightSpec, degree: int,
                 level: int, idx: np.ndarray):
        self.idx = idx
        self.rule = composite_rule(degree, level)
        pts = map_to_triangle(self.rule, mesh.tri_coords[idx])
        self.x, self.y = pts[:, :, 0], pts[:, :, 1]
        self.area = mesh.tri_area[idx]
        self.inv = {
            (l, m): weight_inv_eval(spec, self.x, self.y, l, m)
            for l, m in ((0, 0), (1, 0), (0, 1), (2, 0), (0, 2))
        }

    def fe_at_points(self, v: FEFunction) -> np.ndarray:
        return np.einsum("ta,qa->tq", v.element_values()[self.idx], self.rule.points)

    def integrate(self, vals: np.ndarray, elem_scale: np.ndarray | None = None) -> float:
        scale = self.area if elem_scale is None else self.area * elem_scale
        return float(np.einsum("tq,q,t->", vals, self.rule.weights, scale))


class _ElementQuad:
    """Blockwise quadrature over a mesh, subdivided where the weight is sharp."""

    def __init__(self, mesh: ShishkinMesh, spec: WeightSpec, degree: int):
        levels = _subdivision_levels(mesh, spec)
        self.blocks = [
            _QuadBlock(mesh, spec, degree, lvl, np.flatnonzero(levels == lvl))
            for lvl in np.unique(levels)
        ]


def _gate(name: str, coarse: float, fine: float, scale: float) -> float:
    denom = max(abs(fine), 1e-14 * scale) if scale > 0 else 1.0
    rel = abs(coarse - fine) / denom
    if rel > QUAD_GATE_RTOL:
        raise QuadratureConvergenceError(
            f"weighted integral {name!r} changed by {rel:.2e} relative "
            f"between quadrature degrees (gate {QUAD_GATE_RTOL})"
        )
    return rel


def _gate_terms(coarse: dict[str, float], fine: dict[str, float]) -> float:
    scale = sum(abs(v) for v in fine.values())
    return max(_gate(name, coarse[name], fine[name], scale) for name in coarse)


def _weighted_norm_terms(G: FEFunction, spec: WeightSpec, problem: ProblemSpec,
                         config: StabilizationConfig, degree: int) -> dict[str, float]:
    mesh = G.mesh
    grads = G.element_gradients()
    delta = element_deltas(mesh, config)
    b, c, eps = problem.b, problem.c, problem.epsilon
    terms = dict.fromkeys(("eps_gx", "eps_gy", "invx_g", "mass", "stab"), 0.0)
    for blk in _ElementQuad(mesh, spec, degree).blocks:
        gvals = blk.fe_at_points(G)
        gx2 = grads[blk.idx, 0][:, None] ** 2
        gy2 = grads[blk.idx, 1][:, None] ** 2
        inv, invx = blk.inv[(0, 0)], blk.inv[(1, 0)]
        terms["eps_gx"] += eps * blk.integrate(inv * gx2)
        terms["eps_gy"] += eps * blk.integrate(inv * gy2)
        terms["invx_g"] += 0.5 * b * blk.integrate(invx * gvals**2)
        terms["mass"] += c * blk.integrate(inv * gvals**2)
        terms["stab"] += b * b * blk.integrate(inv * gx2, elem_scale=delta[blk.idx])
    return terms


def weighted_energy_norm(G: FEFunction, spec: WeightSpec, problem: ProblemSpec,
                         config: StabilizationConfig, quad_degree: int = 6) -> float:
    """Weighted SD norm |||G|||_omega (the localized-energy norm).

    Every term is integrated at `quad_degree` and re-checked at degree 10;
    disagreement beyond 1e-6 relative raises QuadratureConvergenceError.
    """
    terms, _ = _gated_norm_terms(G, spec, problem, config, quad_degree)
    return float(np.sqrt(sum(terms.values())))


def _gated_norm_terms(G, spec, problem, config, quad_degree):
    terms = _weighted_norm_terms(G, spec, problem, config, quad_degree)
    if quad_degree == ESCALATED_DEGREE:
        return terms, 0.0
    fine = _weighted_norm_terms(G, spec, problem, config, ESCALATED_DEGREE)
    worst = _gate_terms(terms, fine)
    return fine, worst


def _a_sd_weighted_terms(G: FEFunction, spec: WeightSpec, problem: ProblemSpec,
                         config: StabilizationConfig, degree: int,
                         interp: FEFunction | None = None) -> dict[str, float]:
    """Quadrature terms of a_sd(w, G) with w = omega^{-1} G, or of
    a_sd(w - w^I, G) when the nodal interpolant w^I is supplied.

    On each element G is linear, so w_x, w_y and Lap w come from the
    product rule with analytic inverse-weight derivatives; subtracting the
    interpolant removes a piecewise linear, leaving its Laplacian term
    untouched.
    """
    mesh = G.mesh
    grads = G.element_gradients()
    igrads = interp.element_gradients() if interp is not None else None
    delta = element_deltas(mesh, config)
    b, c, eps = problem.b, problem.c, problem.epsilon
    terms = dict.fromkeys(("gal_diff", "gal_conv", "gal_mass", "stab"), 0.0)
    for blk in _ElementQuad(mesh, spec, degree).blocks:
        gvals = blk.fe_at_points(G)
        gx = grads[blk.idx, 0][:, None]
        gy = grads[blk.idx, 1][:, None]
        inv = blk.inv

        w_val = inv[(0, 0)] * gvals
        w_x = inv[(1, 0)] * gvals + inv[(0, 0)] * gx
        w_y = inv[(0, 1)] * gvals + inv[(0, 0)] * gy
        lap_w = ((inv[(2, 0)] + inv[(0, 2)]) * gvals
                 + 2.0 * (inv[(1, 0)] * gx + inv[(0, 1)] * gy))

        if interp is not None:
            w_val = w_val - blk.fe_at_points(interp)
            w_x = w_x - igrads[blk.idx, 0][:, None]
            w_y = w_y - igrads[blk.idx, 1][:, None]

        terms["gal_diff"] += eps * blk.integrate(w_x * gx + w_y * gy)
        terms["gal_conv"] += b * blk.integrate(w_x * gvals)
        terms["gal_mass"] += c * blk.integrate(w_val * gvals)
        terms["stab"] += b * b * blk.integrate(
            (-eps * lap_w + b * w_x + c * w_val) * gx, elem_scale=delta[blk.idx])
    return terms


def _gated_a_sd(G, spec, problem, config, quad_degree, interp=None):
    terms = _a_sd_weighted_terms(G, spec, problem, config, quad_degree, interp)
    if quad_degree == ESCALATED_DEGREE:
        return sum(terms.values()), 0.0
    fine = _a_sd_weighted_terms(G, spec, problem, config, ESCALATED_DEGREE, interp)
    worst = _gate_terms(terms, fine)
    return sum(fine.values()), worst


@dataclass(frozen=True)
class LemmaQuantities:
    """Measured quantities of the weighted estimate of the Green function.

    a_w       = a_sd(omega^{-1} G, G)
    point_val = (omega^{-1} G)(x*) = G(x*)
    defect    = a_sd(omega^{-1} G - (omega^{-1} G)^I, G)
    and the squared weighted / plain energy norms of G.  Discrete duality
    forces a_w - defect - point_val = 0 up to solver and quadrature error.
    """

    a_w: float
    point_val: float
    defect: float
    weighted_norm_sq: float
    energy_norm_sq: float
    quad_disagreement: float

    @property
    def lemma4_ratio(self) -> float:
        return self.a_w / self.weighted_norm_sq

    @property
    def lemma6_ratio(self) -> float:
        return abs(self.defect) / self.weighted_norm_sq

    @property
    def identity_residual(self) -> float:
        return self.a_w - self.defect - self.point_val


def lemma_quantities(G: FEFunction, spec: WeightSpec, mesh: ShishkinMesh,
                     problem: ProblemSpec, config: StabilizationConfig,
                     quad_degree: int = 6) -> LemmaQuantities:
    """Evaluate the weighted bilinear quantities for one Green function."""
    if G.mesh is not mesh:
        raise ValueError("G does not live on the supplied mesh")
    node = star_node(mesh, spec)
    point_val = float(G.values[node])  # omega(x*) = 1 exactly

    inv_at_nodes = weight_inv_eval(spec, mesh.node_coords[:, 0], mesh.node_coords[:, 1])
    interp = FEFunction(mesh, inv_at_nodes * G.values)

    a_w, worst1 = _gated_a_sd(G, spec, problem, config, quad_degree)
    defect, worst2 = _gated_a_sd(G, spec, problem, config, quad_degree, interp=interp)
    norm_terms, worst3 = _gated_norm_terms(G, spec, problem, config, quad_degree)

    return LemmaQuantities(
        a_w=a_w,
        point_val=point_val,
        defect=defect,
        weighted_norm_sq=sum(norm_terms.values()),
        energy_norm_sq=float(element_energy_sq(G, problem, config).sum()),
        quad_disagreement=max(worst1, worst2, worst3),
    )


def interpolated_pairing(G: FEFunction, spec: WeightSpec, mesh: ShishkinMesh,
                         problem: ProblemSpec, config: StabilizationConfig) -> float:
    """a_sd((omega^{-1} G)^I, G), exact on P1; equals G(x*) by duality."""
    inv_at_nodes = weight_inv_eval(spec, mesh.node_coords[:, 0], mesh.node_coords[:, 1])
    interp = FEFunction(mesh, inv_at_nodes * G.values)
    return bilinear_apply(mesh, problem, config, interp, G)


@dataclass
class WeightPropertyReport:
    """Sampled checks of the weight-function properties.

    Sign checks are hard requirements; the per-element variation ratios and
    the derivative-bound constants are measurements whose stability across
    meshes is asserted by the calling tests.
    """

    spec: WeightSpec
    n_samples: int
    omega_min: float
    omega_max: float
    inv_x_min: float
    omega_at_star: float
    elem_ratio_inv_max: float
    elem_ratio_invx_max: float
    iv_constants: dict = field(default_factory=dict)
    v_constants: dict = field(default_factory=dict)
    omega_min_near_star: float = float("nan")

    @property
    def iv_max(self) -> float:
        return max(self.iv_constants.values())

    @property
    def v_max(self) -> float:
        return max(self.v_constants.values())


def weight_property_report(spec: WeightSpec, mesh: ShishkinMesh,
                           n_samples: int = 10_000, seed: int = 0) -> WeightPropertyReport:
    """Verify the weight's sign properties and measure its bound constants.

    Raises WeightPropertyError if omega leaves (0, 8) or (omega^{-1})_x
    fails to be positive at any sample.  The derivative-bound constants are
    the largest sampled ratios |d^{l+m} omega| / (sigma_x^{-l} sigma_y^{-m}
    omega) and, for l >= 1, the same ratios against |omega_x|.
    """
    rng = np.random.default_rng(seed)
    pts = rng.random((n_samples, 2))
    x = np.concatenate([pts[:, 0], mesh.node_coords[:, 0]])
    y = np.concatenate([pts[:, 1], mesh.node_coords[:, 1]])

    om = weight_eval(spec, x, y)
    inv_x = weight_inv_eval(spec, x, y, 1, 0)
    if not (np.all(om > 0.0) and np.all(om < 8.0)):
        raise WeightPropertyError("omega left the open interval (0, 8)")
    if not np.all(inv_x > 0.0):
        raise WeightPropertyError("(omega^{-1})_x is not positive everywhere")

    node = star_node(mesh, spec)
    omega_at_star = float(weight_eval(spec, *spec.star))

    # Per-element variation ratios at quadrature points plus vertices.
    rule = triangle_rule(6)
    bary = np.vstack([rule.points, np.eye(3)])
    ep = np.einsum("qa,tad->tqd", bary, mesh.tri_coords)
    inv_el = weight_inv_eval(spec, ep[:, :, 0], ep[:, :, 1])
    invx_el = weight_inv_eval(spec, ep[:, :, 0], ep[:, :, 1], 1, 0)
    ratio_inv = inv_el.max(axis=1) / inv_el.min(axis=1)
    ratio_invx = invx_el.max(axis=1) / invx_el.min(axis=1)

    # omega on the triangles that touch the anchor node.
    touching = np.any(mesh.tri_vertices == node, axis=1)
    om_near = weight_eval(spec, ep[touching, :, 0], ep[touching, :, 1])

    iv = {}
    for l, m in IV_ORDERS:
        d = weight_eval(spec, x, y, l, m)
        iv[(l, m)] = float(np.max(
            np.abs(d) * spec.sigma_x**l * spec.sigma_y**m / om))
    om_x = np.abs(weight_eval(spec, x, y, 1, 0))
    v = {}
    for l, m in V_ORDERS:
        d = weight_eval(spec, x, y, l, m)
        v[(l, m)] = float(np.max(
            np.abs(d) * spec.sigma_x ** (l - 1) * spec.sigma_y**m / om_x))

    return WeightPropertyReport(
        spec=spec,
        n_samples=int(x.size),
        omega_min=float(om.min()),
        omega_max=float(om.max()),
        inv_x_min=float(inv_x.min()),
        omega_at_star=omega_at_star,
        elem_ratio_inv_max=float(ratio_inv.max()),
        elem_ratio_invx_max=float(ratio_invx.max()),
        iv_constants=iv,
        v_constants=v,
        omega_min_near_star=float(om_near.min()),
    )
