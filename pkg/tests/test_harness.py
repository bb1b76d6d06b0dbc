import numpy as np
import pytest

from sdfem.harness import (SCALING_COLUMNS, StudyConfig,
                           bound_for_region, coercivity_check, emit_plot,
                           green_scaling_study, lemma_k_sweep, place_star,
                           scaling_rows_as_dicts, write_csv)
from sdfem.mesh import Region, classify_point


class TestPlaceStar:
    def test_center_policy(self, mesh24):
        i, j = place_star(mesh24, "center-omega-s")
        x, y = mesh24.x_coords[i], mesh24.y_coords[j]
        assert abs(y - 0.5) < mesh24.coarse_hy
        assert classify_point(mesh24.transition, x, y) == Region.S
        assert not mesh24.boundary_mask[mesh24.node_id(i, j)]

    def test_mid_x_policy(self, mesh24):
        i, j = place_star(mesh24, "mid-omega-x")
        x, y = mesh24.x_coords[i], mesh24.y_coords[j]
        assert classify_point(mesh24.transition, x, y) == Region.X
        assert not mesh24.boundary_mask[mesh24.node_id(i, j)]

    def test_explicit_policy(self, mesh24):
        assert place_star(mesh24, "node:3,7") == (3, 7)
        with pytest.raises(ValueError):
            place_star(mesh24, "node:0,7")
        with pytest.raises(ValueError):
            place_star(mesh24, "nowhere")


@pytest.fixture(scope="module")
def rows():
    config = StudyConfig(epsilons=(1e-4,), ns=(12, 24), k=16.0)
    return green_scaling_study(config)


class TestScalingStudy:

    def test_row_contents(self, rows):
        assert len(rows) == 2
        for row in rows:
            assert row.region == Region.S
            assert row.ratio > 0 and np.isfinite(row.ratio)
            assert row.theorem_margin >= 0.0
            assert row.bound == bound_for_region(Region.S, row.n,
                                                 row.bound / row.n**2)

    def test_csv_schema(self, rows, tmp_path):
        path = write_csv(tmp_path / "study.csv", SCALING_COLUMNS,
                         scaling_rows_as_dicts(rows))
        header = path.read_text().splitlines()[0]
        assert header == "N,epsilon,k,region,enorm_sq,wnorm_sq,bound,ratio"

    def test_reproducible_bytes(self, rows, tmp_path):
        config = StudyConfig(epsilons=(1e-4,), ns=(12, 24), k=16.0)
        rows2 = green_scaling_study(config)
        p1 = write_csv(tmp_path / "a.csv", SCALING_COLUMNS, scaling_rows_as_dicts(rows))
        p2 = write_csv(tmp_path / "b.csv", SCALING_COLUMNS, scaling_rows_as_dicts(rows2))
        assert p1.read_bytes() == p2.read_bytes()

    def test_row_independence(self, rows):
        solo = green_scaling_study(StudyConfig(epsilons=(1e-4,), ns=(24,), k=16.0))
        paired = [r for r in rows if r.n == 24]
        assert paired[0].enorm_sq == solo[0].enorm_sq
        assert paired[0].wnorm_sq == solo[0].wnorm_sq

    def test_failed_rows_are_skipped(self):
        # eps > 1/N is rejected in strict mode; the sweep must survive it
        config = StudyConfig(epsilons=(1e-2,), ns=(12, 24), k=16.0)
        rows = green_scaling_study(config)
        assert rows == []

    def test_mid_x_bound_uses_nlogn(self):
        config = StudyConfig(epsilons=(1e-4,), ns=(12,), k=16.0,
                             placement="mid-omega-x")
        rows = green_scaling_study(config)
        assert rows[0].region == Region.X
        assert rows[0].bound == pytest.approx(12 * np.log(12))


class TestLemmaSweep:
    def test_k0_found(self):
        config = StudyConfig(epsilons=(1e-4,), ns=(24,), k_grid=(4.0, 8.0, 16.0, 32.0))
        result = lemma_k_sweep(config)
        assert result.k0 is not None and result.k0 <= 32.0
        tail = [r for r in result.rows if r.k >= result.k0]
        for row in tail:
            assert row.quantities.lemma4_ratio >= 0.25
            assert row.quantities.lemma6_ratio <= 1.0 / 16.0

    def test_row_lookup(self):
        config = StudyConfig(epsilons=(1e-4,), ns=(12,), k_grid=(8.0, 16.0))
        result = lemma_k_sweep(config)
        assert result.row_at(8.0).k == 8.0
        with pytest.raises(KeyError):
            result.row_at(3.0)


class TestCoercivity:
    def test_min_ratio_above_half(self):
        config = StudyConfig(epsilons=(1e-2, 1e-4), ns=(12,), trials=40, seed=7)
        report = coercivity_check(config)
        assert report.passed
        assert report.min_ratio >= 0.5 - 1e-10
        assert set(report.per_case) == {(1e-2, 12), (1e-4, 12)}
        assert report.trials >= 40

    def test_seed_reproducibility(self):
        config = StudyConfig(epsilons=(1e-4,), ns=(12,), trials=10, seed=3)
        r1 = coercivity_check(config)
        r2 = coercivity_check(config)
        assert r1.min_ratio == r2.min_ratio

    def test_pure_galerkin_also_coercive(self):
        config = StudyConfig(epsilons=(1e-4,), ns=(12,), trials=20, seed=5, c_star=0.0)
        report = coercivity_check(config)
        assert report.min_ratio >= 1.0 - 1e-12  # a(v,v) = |||v|||^2 exactly


class TestEmitPlot:
    def test_plot_rows(self, tmp_path):
        csv_path = tmp_path / "data.csv"
        csv_path.write_text("N,ratio\n12,0.5\n24,0.45\n48,0.47\n96,0.52\n")
        out = emit_plot(csv_path, "N", "ratio", "xy", tmp_path / "plot.svg")
        text = out.read_text()
        assert text.lstrip().startswith("<?xml")
        assert "</svg>" in text

    def test_empty_table(self, tmp_path):
        csv_path = tmp_path / "empty.csv"
        csv_path.write_text("N,ratio\n")
        out = emit_plot(csv_path, "N", "ratio")
        assert out.exists() and out.stat().st_size > 0

    def test_missing_column_rejected(self, tmp_path):
        csv_path = tmp_path / "data.csv"
        csv_path.write_text("N,ratio\n12,0.5\n")
        with pytest.raises(ValueError):
            emit_plot(csv_path, "N", "nothere")
