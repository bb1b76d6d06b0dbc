import math

import numpy as np
import pytest

from sdfem.mesh import (Region, Triangle, build_mesh, classify_point,
                        transition_params)


class TestTransitionParams:
    def test_formula_values_n24(self):
        tp = transition_params(1e-4, 1.0, 24)
        assert tp.lambda_x == pytest.approx(2.5 * 1e-4 * math.log(24), rel=1e-15)
        assert tp.lambda_y == pytest.approx(2.5 * 1e-2 * math.log(24), rel=1e-15)
        assert tp.lambda_x == pytest.approx(7.94513e-4, rel=1e-5)
        assert tp.lambda_y == pytest.approx(7.94513e-2, rel=1e-5)
        assert not tp.capped_x and not tp.capped_y

    def test_formula_values_n96(self):
        tp = transition_params(1e-6, 1.0, 96)
        assert tp.lambda_x == pytest.approx(1.14109e-5, rel=1e-5)
        assert tp.lambda_y == pytest.approx(1.14109e-2, rel=1e-5)

    def test_capped_case(self):
        tp = transition_params(1.0, 1.0, 6, strict=False)
        assert tp.lambda_x == 0.5 and tp.capped_x
        assert tp.lambda_y == 1.0 / 3.0 and tp.capped_y

    @pytest.mark.parametrize("n", [5, 7, 10, 0, -6])
    def test_rejects_bad_n(self, n):
        with pytest.raises(ValueError):
            transition_params(1e-4, 1.0, n)

    def test_strict_rejects_large_epsilon(self):
        with pytest.raises(ValueError):
            transition_params(0.1, 1.0, 24)       # eps > 1/N
        with pytest.raises(ValueError):
            transition_params(1e-2, 1.0, 24)      # capped lambda_y
        tp = transition_params(1e-2, 1.0, 24, strict=False)
        assert tp.capped_y and not tp.capped_x


class TestMeshGeometry:
    def test_transition_coordinates_exact(self, mesh24):
        tp = mesh24.transition
        n = mesh24.n
        assert mesh24.x_coords[0] == 0.0 and mesh24.x_coords[n] == 1.0
        assert mesh24.x_coords[n // 2] == 1.0 - tp.lambda_x
        assert mesh24.y_coords[n // 3] == tp.lambda_y
        assert mesh24.y_coords[2 * n // 3] == 1.0 - tp.lambda_y

    def test_coordinates_strictly_increasing(self, mesh24):
        assert np.all(np.diff(mesh24.x_coords) > 0)
        assert np.all(np.diff(mesh24.y_coords) > 0)

    def test_band_spacing_uniform(self, mesh24):
        hx, hy = mesh24.cell_sizes()
        n = mesh24.n
        # spacing comes from differencing O(1) coordinates, so uniformity
        # holds to a few ulps of 1.0 in absolute terms
        for band, nominal in ((hx[: n // 2], mesh24.coarse_hx),
                              (hx[n // 2:], mesh24.fine_hx),
                              (hy[: n // 3], mesh24.fine_hy),
                              (hy[n // 3: 2 * n // 3], mesh24.coarse_hy),
                              (hy[2 * n // 3:], mesh24.fine_hy)):
            assert np.allclose(band, nominal, rtol=1e-12, atol=1e-15)

    def test_mesh_size_values_n24(self, mesh24):
        lam_x = mesh24.transition.lambda_x
        assert mesh24.coarse_hx == pytest.approx((1.0 - lam_x) / 12.0, rel=1e-15)
        assert mesh24.coarse_hx == pytest.approx(8.32671e-2, rel=1e-5)
        assert mesh24.fine_hx == pytest.approx(6.62094e-5, rel=1e-5)

    def test_mesh_size_bounds(self):
        for n, eps in ((12, 1e-4), (24, 1e-5), (48, 1e-6)):
            m = build_mesh(n, transition_params(eps, 1.0, n))
            assert 1.0 / n <= m.coarse_hx <= 2.0 / n
            assert 1.0 / n <= m.coarse_hy <= 3.0 / n
            rho_term = 2.5 * eps * math.log(n) / n
            assert m.fine_hx == pytest.approx(2.0 * rho_term, rel=1e-12)
            assert m.fine_hy == pytest.approx(3.0 * 2.5 * math.sqrt(eps) * math.log(n) / n, rel=1e-12)
            hx, hy = m.cell_sizes()
            for v in hx:
                assert min(abs(v - m.coarse_hx), abs(v - m.fine_hx)) < 1e-14
            for v in hy:
                assert min(abs(v - m.coarse_hy), abs(v - m.fine_hy)) < 1e-14

    def test_triangle_count_and_area(self, mesh24):
        assert mesh24.n_triangles == 2 * 24 * 24
        assert np.all(mesh24.tri_area > 0)
        assert abs(mesh24.tri_area.sum() - 1.0) <= 1e-12

    def test_capped_mesh_is_uniform(self):
        m = build_mesh(6, transition_params(1.0, 1.0, 6, strict=False))
        assert np.allclose(np.diff(m.x_coords), 1.0 / 6.0, rtol=1e-13)

    def test_determinism(self):
        a = build_mesh(24, transition_params(1e-4, 1.0, 24))
        b = build_mesh(24, transition_params(1e-4, 1.0, 24))
        assert np.array_equal(a.x_coords, b.x_coords)
        assert np.array_equal(a.y_coords, b.y_coords)
        assert np.array_equal(a.tri_vertices, b.tri_vertices)
        assert np.array_equal(a.tri_area, b.tri_area)


class TestTriangles:
    def test_vertex_pattern(self, mesh24):
        n = mesh24.n
        t1 = mesh24.triangle(0)
        assert isinstance(t1, Triangle)
        assert t1.kind == 1 and t1.cell == (0, 0)
        assert t1.vertices == (0, 1, n + 1)
        t2 = mesh24.triangle(1)
        assert t2.kind == 2 and t2.vertices == (n + 1, 1, n + 2)

    def test_cell_pair_shares_region(self, mesh24):
        regions = mesh24.tri_region.reshape(-1, 2)
        assert np.all(regions[:, 0] == regions[:, 1])

    def test_barycenter_classification_matches_labels(self, mesh24):
        bary = mesh24.tri_coords.mean(axis=1)
        for t in range(0, mesh24.n_triangles, 7):
            reg = classify_point(mesh24.transition, bary[t, 0], bary[t, 1])
            assert reg == Region(int(mesh24.tri_region[t]))

    def test_region_areas_tile_square(self, mesh24):
        tp = mesh24.transition
        areas = {r: mesh24.tri_area[mesh24.tri_region == r].sum() for r in Region}
        lx, ly = tp.lambda_x, tp.lambda_y
        assert areas[Region.S] == pytest.approx((1 - lx) * (1 - 2 * ly), rel=1e-12)
        assert areas[Region.X] == pytest.approx(lx * (1 - 2 * ly), rel=1e-12)
        assert areas[Region.Y] == pytest.approx((1 - lx) * 2 * ly, rel=1e-12)
        assert areas[Region.XY] == pytest.approx(lx * 2 * ly, rel=1e-12)


@pytest.fixture(scope="module")
def tp():
    return transition_params(1e-4, 1.0, 24)


class TestClassifyPoint:

    def test_examples(self, tp):
        assert classify_point(tp, 0.1, 0.5) == Region.S
        assert classify_point(tp, 0.9995, 0.5) == Region.X
        assert classify_point(tp, 0.99, 0.01) == Region.Y

    def test_tie_break_to_refined_side(self, tp):
        assert classify_point(tp, 1.0 - tp.lambda_x, 0.5) == Region.X
        assert classify_point(tp, 0.5, tp.lambda_y) == Region.Y
        assert classify_point(tp, 0.5, 1.0 - tp.lambda_y) == Region.Y
        assert classify_point(tp, 1.0 - tp.lambda_x, tp.lambda_y) == Region.XY

    def test_corners(self, tp):
        assert classify_point(tp, 1.0, 0.0) == Region.XY
        assert classify_point(tp, 0.0, 0.5) == Region.S

    def test_outside_rejected(self, tp):
        with pytest.raises(ValueError):
            classify_point(tp, -0.1, 0.5)
        with pytest.raises(ValueError):
            classify_point(tp, 0.5, 1.5)


def test_node_indexing(mesh24):
    n = mesh24.n
    assert mesh24.node_id(0, 0) == 0
    assert mesh24.node_id(n, n) == mesh24.n_nodes - 1
    i, j = mesh24.node_ij(mesh24.node_id(3, 7))
    assert (i, j) == (3, 7)
    assert mesh24.interior_nodes.size == (n - 1) ** 2
    with pytest.raises(ValueError):
        mesh24.node_id(n + 1, 0)


def test_build_mesh_input_validation():
    tp = transition_params(1e-4, 1.0, 24)
    with pytest.raises(ValueError):
        build_mesh(12, tp)
    with pytest.raises(ValueError):
        build_mesh(24)
