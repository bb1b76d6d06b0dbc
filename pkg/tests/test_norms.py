import numpy as np
import pytest
import sympy

from sdfem.assembly import FEFunction, StabilizationConfig, bilinear_apply
from sdfem.mesh import Region, build_mesh, transition_params
from sdfem.norms import (energy_norm, interpolation_error_report,
                         nodal_interpolant)
from sdfem.problem import ProblemSpec, SmoothField, make_problem, sine_product_field


def hat_function(mesh, i, j):
    values = np.zeros(mesh.n_nodes)
    values[mesh.node_id(i, j)] = 1.0
    return FEFunction(mesh, values)


def symbolic_element_energy(coords, nodal, eps, bcoef, delta):
    """eps*|v|_1^2 + ||v||^2 + delta*||b v_x||^2 on one triangle via sympy."""
    x, y = sympy.symbols("x y")
    (x0, y0), (x1, y1), (x2, y2) = coords
    basis = []
    denom = sympy.Matrix([[1, x0, y0], [1, x1, y1], [1, x2, y2]]).det()
    for a, (xa, ya) in enumerate(coords):
        others = [coords[(a + 1) % 3], coords[(a + 2) % 3]]
        num = sympy.Matrix([[1, x, y],
                            [1, others[0][0], others[0][1]],
                            [1, others[1][0], others[1][1]]]).det()
        full = sympy.Matrix([[1, xa, ya],
                             [1, others[0][0], others[0][1]],
                             [1, others[1][0], others[1][1]]]).det()
        basis.append(num / full)
    v = sum(sympy.nsimplify(val, rational=True) * phi for val, phi in zip(nodal, basis))
    vx, vy = sympy.diff(v, x), sympy.diff(v, y)
    integrand = (sympy.Rational(sympy.nsimplify(eps, rational=True)) * (vx**2 + vy**2)
                 + v**2 + sympy.nsimplify(delta * bcoef**2, rational=True) * vx**2)
    # integrate over the triangle: y from edge to edge after ordering; use
    # the affine map to the reference triangle instead, which is robust
    u, w = sympy.symbols("u w")
    xm = x0 + (x1 - x0) * u + (x2 - x0) * w
    ym = y0 + (y1 - y0) * u + (y2 - y0) * w
    jac = sympy.Abs((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
    mapped = integrand.subs({x: xm, y: ym}, simultaneous=True)
    return float(jac * sympy.integrate(sympy.integrate(mapped, (w, 0, 1 - u)), (u, 0, 1)))


class TestEnergyNorm:
    def test_zero(self, mesh24, problem24, config):
        assert energy_norm(FEFunction.zeros(mesh24), problem24, config) == 0.0

    def test_homogeneity(self, mesh24, problem24, config, rng):
        v = FEFunction.from_interior(mesh24, rng.standard_normal((mesh24.n - 1) ** 2))
        base = energy_norm(v, problem24, config)
        for alpha in (-3.0, 0.5, 7.25):
            scaled = FEFunction(mesh24, alpha * v.values)
            assert energy_norm(scaled, problem24, config) == pytest.approx(
                abs(alpha) * base, rel=1e-13)

    def test_hat_function_against_symbolic_oracle(self):
        mesh = build_mesh(6, transition_params(1e-2, 1.0, 6, strict=False))
        prob = ProblemSpec(epsilon=1e-2, b=1.0, c=1.0)
        config = StabilizationConfig(0.25)
        i = j = 3
        hat = hat_function(mesh, i, j)
        node = mesh.node_id(i, j)
        expected = 0.0
        from sdfem.assembly import element_deltas

        deltas = element_deltas(mesh, config)
        for t in range(mesh.n_triangles):
            verts = list(mesh.tri_vertices[t])
            if node not in verts:
                continue
            nodal = [1.0 if v == node else 0.0 for v in verts]
            expected += symbolic_element_energy(
                [tuple(c) for c in mesh.tri_coords[t]], nodal,
                prob.epsilon, prob.b, float(deltas[t]))
        assert energy_norm(hat, prob, config) ** 2 == pytest.approx(expected, rel=1e-12)

    def test_galerkin_equals_norm_when_delta_zero(self, mesh24, rng):
        # with delta = 0 and c = 1: a(v, v) = eps|v|_1^2 + ||v||^2 = |||v|||^2
        prob = make_problem("constant-f", 1e-4)
        cfg = StabilizationConfig(0.0)
        for _ in range(5):
            v = FEFunction.from_interior(mesh24, rng.standard_normal((mesh24.n - 1) ** 2))
            a_vv = bilinear_apply(mesh24, prob, cfg, v, v)
            norm_sq = energy_norm(v, prob, cfg) ** 2
            assert a_vv == pytest.approx(norm_sq, rel=1e-12)


class TestNodalInterpolant:
    def test_reproduces_linears_everywhere(self, mesh24):
        w = lambda x, y: 2.0 * x + 3.0 * y
        interp = nodal_interpolant(w, mesh24)
        for x, y in [(0.05, 0.93), (0.5, 0.5), (0.87, 0.13)]:
            assert interp(x, y) == pytest.approx(w(x, y), abs=1e-13)
        assert not interp.zero_on_boundary

    def test_matches_at_nodes(self, mesh24):
        w = sine_product_field()
        interp = nodal_interpolant(w, mesh24)
        expected = w(mesh24.node_coords[:, 0], mesh24.node_coords[:, 1])
        assert np.abs(interp.values - expected).max() == 0.0

    def test_product_with_fe_function(self, mesh24, rng):
        g = FEFunction.from_interior(mesh24, rng.standard_normal((mesh24.n - 1) ** 2))
        scale = lambda x, y: 1.0 + x * y
        product = nodal_interpolant(
            lambda x, y: scale(x, y) * np.array(
                [g(xx, yy) for xx, yy in zip(np.atleast_1d(x), np.atleast_1d(y))]
            ).reshape(np.shape(x)), mesh24)
        xy = mesh24.node_coords
        expected = scale(xy[:, 0], xy[:, 1]) * g.values
        assert np.allclose(product.values, expected, rtol=1e-12)


def midpoint_composite_integral(coords, fn, subdivisions=1500):
    """Second-order composite midpoint rule over one triangle (oracle)."""
    a, b, c = (np.asarray(v, dtype=float) for v in coords)
    s = subdivisions
    ii, jj = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    up = ii + jj <= s - 1
    cx_up = (3 * ii[up] + 1) / (3.0 * s)
    cy_up = (3 * jj[up] + 1) / (3.0 * s)
    down = ii + jj <= s - 2
    cx_dn = (3 * ii[down] + 2) / (3.0 * s)
    cy_dn = (3 * jj[down] + 2) / (3.0 * s)
    cx = np.concatenate([cx_up, cx_dn])
    cy = np.concatenate([cy_up, cy_dn])
    pts = a[None, :] + cx[:, None] * (b - a)[None, :] + cy[:, None] * (c - a)[None, :]
    e1, e2 = b - a, c - a
    area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    return area / s**2 * float(fn(pts[:, 0], pts[:, 1]).sum())


class TestInterpolationReport:
    def test_linear_field_is_exact(self, mesh24):
        lin = SmoothField({
            (0, 0): lambda x, y: 2.0 * x + 3.0 * y,
            (1, 0): lambda x, y: np.full_like(np.asarray(x, dtype=float), 2.0),
            (0, 1): lambda x, y: np.full_like(np.asarray(x, dtype=float), 3.0),
            (2, 0): lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            (1, 1): lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            (0, 2): lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        })
        report = interpolation_error_report(lin, mesh24, p=2.0)
        assert report.lhs.max() <= 1e-13
        assert report.ratio.max() == 0.0

    def test_x_squared_against_midpoint_oracle(self):
        mesh = build_mesh(12, transition_params(1e-4, 1.0, 12))
        quad = SmoothField({
            (0, 0): lambda x, y: np.asarray(x, dtype=float) ** 2,
            (1, 0): lambda x, y: 2.0 * np.asarray(x, dtype=float),
            (0, 1): lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            (2, 0): lambda x, y: np.full_like(np.asarray(x, dtype=float), 2.0),
            (1, 1): lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            (0, 2): lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
        })
        report = interpolation_error_report(quad, mesh, p=2.0)
        for t in (0, 7, 150):
            coords = mesh.tri_coords[t]
            vtx = coords[:, 0] ** 2
            mat = np.vstack([coords.T, np.ones(3)])

            def err_sq(x, y):
                lam = np.linalg.solve(mat, np.vstack([x, y, np.ones_like(x)]))
                return (x**2 - vtx @ lam) ** 2

            oracle = np.sqrt(midpoint_composite_integral(coords, err_sq))
            assert report.lhs[t, 0] == pytest.approx(oracle, rel=2e-6)

    def test_sine_ratio_stable_across_meshes(self):
        w = sine_product_field()
        maxima = {}
        for n in (12, 24, 48):
            mesh = build_mesh(n, transition_params(1e-4, 1.0, n))
            report = interpolation_error_report(w, mesh, p=2.0)
            assert report.quad_disagreement <= 1e-8
            maxima[n] = report.per_region_max
        for region in Region:
            for comp in range(3):
                vals = [maxima[n][region][comp] for n in (12, 24, 48)]
                drift = max(abs(v - vals[0]) / vals[0] for v in vals)
                assert drift < 0.10

    def test_sup_norm_path(self, mesh24):
        report = interpolation_error_report(sine_product_field(), mesh24, p=np.inf)
        assert np.isfinite(report.ratio).all()
        assert report.worst_ratio() < 1.5

    def test_invalid_p_rejected(self, mesh24):
        with pytest.raises(ValueError):
            interpolation_error_report(sine_product_field(), mesh24, p=1.0)
        with pytest.raises(ValueError):
            interpolation_error_report(sine_product_field(), mesh24, p=0.5)

    def test_worst_ratio_by_region(self, mesh24):
        report = interpolation_error_report(sine_product_field(), mesh24, p=2.0)
        overall = report.worst_ratio()
        per_region = [report.worst_ratio(region) for region in Region]
        assert overall == pytest.approx(max(per_region))
