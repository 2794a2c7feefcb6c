import dataclasses
import json
import math

import numpy as np
import pandas as pd
import pytest

from app.config_loader import deep_merge, load_sweep_config
from app.core.exact_oracle import tension_from_free_energies
from app.errors import ConfigError, OutputError
from app.experiments import SweepOrchestrator, SweepWriter, expand_grid
from app.experiments.analysis import fit_log_tension, is_strictly_decreasing, log_tension_frame
from app.models import CSV_COLUMNS, SweepConfig, SweepRow, build_model

FAST_OPTIMIZER = {"depth": 1, "restarts": 1, "max_iters": 60, "polish_iters": 50}


def make_config(tmp_path, **sections) -> SweepConfig:
    document = {
        "model": {"n_sites": 2, "mass": 1.0, "coupling": 1.0, "hopping": 1.0},
        "grid": {"T": [1.0, 2.0], "epsilon": [0.0, 0.5], "mu": [0.0]},
        "optimizer": FAST_OPTIMIZER,
        "mode": "both",
        "output_path": str(tmp_path / "sweep.csv"),
    }
    for key, value in sections.items():
        if isinstance(value, dict):
            # a None entry removes the key, e.g. {"T": None, "beta": [...]}
            merged = {**document.get(key, {}), **value}
            document[key] = {k: v for k, v in merged.items() if v is not None}
        else:
            document[key] = value
    return build_model(SweepConfig, document)


def _without_timing(rows):
    return [dataclasses.replace(row, wall_time_ms=0.0) for row in rows]


class TestExpandGrid:
    def test_emission_order(self, tmp_path):
        config = make_config(
            tmp_path, grid={"T": None, "beta": [1.0, 2.0], "epsilon": [0.0, 0.5], "mu": [0.0, 1.0], "depth": [1, 2]}
        )
        points = expand_grid(config)
        assert len(points) == 16
        coords = [(p.beta, p.epsilon, p.mu, p.depth) for p in points[:4]]
        assert coords == [(1.0, 0.0, 0.0, 1), (1.0, 0.0, 0.0, 2), (1.0, 0.0, 1.0, 1), (1.0, 0.0, 1.0, 2)]
        assert points[8].beta == 2.0
        assert [p.index for p in points] == list(range(16))

    def test_temperature_axis(self, tmp_path):
        points = expand_grid(make_config(tmp_path))
        assert [p.temperature for p in points] == pytest.approx([1.0, 1.0, 2.0, 2.0])


class TestGridValidation:
    def test_both_temperature_axes(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, grid={"beta": [1.0]})

    def test_non_positive_temperature(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, grid={"T": [1.0, -2.0]})

    def test_empty_depth_grid(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, grid={"depth": []})

    def test_point_budget(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, max_points=3)

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            make_config(tmp_path, optimizer={"learning_rate": 0.1})

    @pytest.mark.parametrize("field", ["background_field", "chemical_potential"])
    def test_model_field_belongs_on_grid(self, tmp_path, field):
        with pytest.raises(ConfigError):
            make_config(tmp_path, model={field: 0.3})

    def test_zero_model_field_accepted(self, tmp_path):
        config = make_config(tmp_path, model={"background_field": 0.0, "chemical_potential": 0.0})
        assert config.grid.epsilon == (0.0, 0.5)


class TestTensionStudy:
    def test_exact_mode(self, tmp_path):
        config = make_config(
            tmp_path,
            model={"n_sites": 4},
            grid={"T": [1.0, 2.0, 4.0]},
            mode="exact",
        )
        report = SweepOrchestrator(config, study="tension").run()
        header = report.csv_path.read_text().splitlines()[0]
        assert header == ",".join(CSV_COLUMNS)

        frame = pd.read_csv(report.csv_path)
        assert len(frame) == 6
        assert frame["F_var"].isna().all()
        assert (frame.loc[frame["epsilon"] == 0.0, "sigma_exact"] == 0.0).all()
        assert list(frame["T"]) == [1.0, 1.0, 2.0, 2.0, 4.0, 4.0]

        log_path = tmp_path / "sweep_log_tension.csv"
        assert report.extra_paths == (log_path,)
        assert list(pd.read_csv(log_path).columns) == ["T", "beta", "epsilon", "ln_sigma_var", "ln_sigma_exact"]

        audit = json.loads(report.audit_path.read_text())
        assert audit["study"] == "tension"
        assert "log_tension_fits" in audit["summary"]
        assert len(audit["rows"]) == 6

    def test_rejects_chemical_potential(self, tmp_path):
        config = make_config(tmp_path, grid={"mu": [0.0, 1.0]}, mode="exact")
        with pytest.raises(ConfigError):
            SweepOrchestrator(config, study="tension").run()

    def test_rejects_zero_coupling(self, tmp_path):
        config = make_config(tmp_path, model={"coupling": 0.0}, mode="exact")
        with pytest.raises(ConfigError):
            SweepOrchestrator(config, study="tension").run()

    def test_unknown_study(self, tmp_path):
        with pytest.raises(ConfigError):
            SweepOrchestrator(make_config(tmp_path), study="phase_diagram").run()


class TestRows:
    def test_rows_recompute_and_respect_bound(self, tmp_path):
        config = make_config(tmp_path)
        report = SweepOrchestrator(config, study="tension").run()
        assert len(report.rows) == 4
        for row in report.rows:
            params = config.model.replace(background_field=row.epsilon, chemical_potential=row.mu)
            assert row.sigma_var == pytest.approx(tension_from_free_energies(row.F_var, row.F0_var, params), abs=1e-12)
            assert row.sigma_exact == pytest.approx(
                tension_from_free_energies(row.F_exact, row.F0_exact, params), abs=1e-12
            )
            assert row.F_var >= row.F_exact - 1e-9
            assert row.F_var == pytest.approx(row.E_var - row.S_var / row.beta, abs=1e-10)
            assert row.trace
        for row in report.rows:
            if row.epsilon == 0.0:
                assert row.sigma_var == 0.0
                assert row.sigma_exact == 0.0

    def test_depth_zero_row(self, tmp_path):
        config = make_config(tmp_path, grid={"T": [1.0], "epsilon": [0.5], "depth": [0]})
        (row,) = SweepOrchestrator(config, study="tension").run().rows
        assert row.depth == 0
        assert row.F_var >= row.F_exact - 1e-9

    def test_deterministic(self, tmp_path):
        config = make_config(tmp_path, mode="variational")
        first = SweepOrchestrator(config, study="tension").run().rows
        second = SweepOrchestrator(config, study="tension").run().rows
        assert _without_timing(first) == _without_timing(second)

    def test_workers_do_not_change_rows(self, tmp_path):
        serial = SweepOrchestrator(make_config(tmp_path, workers=1), study="tension").run().rows
        parallel = SweepOrchestrator(make_config(tmp_path, workers=2), study="tension").run().rows
        assert _without_timing(serial) == _without_timing(parallel)

    def test_csv_bytes_identical_across_runs_and_workers(self, tmp_path):
        def csv_without_timing(name, workers):
            config = make_config(tmp_path, workers=workers, output_path=str(tmp_path / f"{name}.csv"))
            path = SweepOrchestrator(config, study="tension").run().csv_path
            return pd.read_csv(path).drop(columns=["wall_time_ms"]).to_csv(index=False).encode()

        first = csv_without_timing("first", workers=4)
        assert csv_without_timing("second", workers=4) == first
        assert csv_without_timing("serial", workers=1) == first

    def test_csv_record_columns(self):
        row = SweepRow(T=1.0, beta=1.0, epsilon=0.0, mu=0.0, depth=1, seed=0)
        assert tuple(row.csv_record()) == CSV_COLUMNS


class TestOtherStudies:
    def test_single_point_surface(self, tmp_path):
        config = make_config(tmp_path, grid={"T": [1.0], "epsilon": [0.5], "mu": [1.0]}, mode="exact")
        report = SweepOrchestrator(config, study="surface").run()
        assert len(report.rows) == 1
        assert report.rows[0].mu == 1.0
        audit = json.loads(report.audit_path.read_text())
        assert audit["summary"]["negative_exact_points"] in (0, 1)

    def test_surface_needs_single_epsilon(self, tmp_path):
        with pytest.raises(ConfigError):
            SweepOrchestrator(make_config(tmp_path, mode="exact"), study="surface").run()

    def test_convergence_summary(self, tmp_path):
        config = make_config(tmp_path, grid={"T": None, "beta": [1.0], "epsilon": [0.0], "depth": [0, 1]})
        report = SweepOrchestrator(config, study="convergence").run()
        assert [row.depth for row in report.rows] == [0, 1]
        summary = json.loads(report.audit_path.read_text())["summary"]["convergence"]
        assert set(summary["1.0"]["gaps"]) == {"0", "1"}


class TestAnalysis:
    def test_exact_exponential_fit(self):
        temps = [1.0, 2.0, 3.0, 4.0, 5.0]
        sigmas = [2.0 * math.exp(-0.3 * t) for t in temps]
        fit = fit_log_tension(temps, sigmas)
        assert fit.slope == pytest.approx(-0.3, abs=1e-12)
        assert fit.intercept == pytest.approx(math.log(2.0), abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.n_points == 5

    def test_fit_skips_non_positive(self):
        assert fit_log_tension([1.0, 2.0, 3.0], [0.1, -0.1, None]) is None
        fit = fit_log_tension([1.0, 2.0, 3.0, 4.0], [0.5, 0.25, 0.125, -1.0])
        assert fit.n_points == 3

    def test_fit_window(self):
        temps = np.arange(1.0, 9.0)
        fit = fit_log_tension(temps, np.exp(-temps), window=(2.0, 5.0))
        assert fit.n_points == 4

    def test_log_frame_drops_non_positive_rows(self):
        rows = [
            SweepRow(T=1.0, beta=1.0, epsilon=0.5, mu=0.0, depth=1, seed=0, sigma_exact=0.2),
            SweepRow(T=2.0, beta=0.5, epsilon=0.5, mu=0.0, depth=1, seed=0, sigma_exact=-0.1),
        ]
        frame = log_tension_frame(rows)
        assert list(frame["T"]) == [1.0]
        assert frame["ln_sigma_exact"].iloc[0] == pytest.approx(math.log(0.2))

    def test_strictly_decreasing(self):
        assert is_strictly_decreasing([3.0, 2.0, 1.0])
        assert not is_strictly_decreasing([3.0, 3.0, 1.0])


class TestWriter:
    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("")
        with pytest.raises(OutputError):
            SweepWriter(blocker / "out.csv").write_rows([])

    def test_sibling_paths(self, tmp_path):
        writer = SweepWriter(tmp_path / "tension.csv")
        assert writer.audit_path == tmp_path / "tension.json"
        assert writer.sibling("_log_tension.csv") == tmp_path / "tension_log_tension.csv"


class TestConfigLoader:
    def test_packaged_defaults(self):
        config = load_sweep_config("tension")
        assert config.model.n_sites == 6
        assert len(config.grid.temperature) == 11
        assert config.grid.epsilon == (0.25, 0.5)
        assert config.output_path.is_absolute()

    def test_beta_override_replaces_temperature_grid(self):
        config = load_sweep_config("tension", overrides={"grid": {"beta": [1.0]}})
        assert config.grid.beta == (1.0,)
        assert config.grid.temperature is None

    def test_spacing_override_rederives_hopping(self):
        config = load_sweep_config("surface", overrides={"model": {"lattice_spacing": 0.25}})
        assert config.model.hopping == pytest.approx(2.0)

    def test_file_layer(self, tmp_path):
        path = tmp_path / "custom.yaml"
        path.write_text("model:\n  n_sites: 4\noptimizer:\n  restarts: 2\n")
        config = load_sweep_config("convergence", path=path, overrides={"workers": 2})
        assert (config.model.n_sites, config.optimizer.restarts, config.workers) == (4, 2, 2)
        assert config.grid.depth == (1, 2, 3, 4, 5, 6)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("model: [unclosed\n")
        with pytest.raises(ConfigError):
            load_sweep_config(path=path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_sweep_config(path=tmp_path / "absent.yaml")

    def test_unknown_study(self):
        with pytest.raises(ConfigError):
            load_sweep_config("phase_diagram")

    def test_deep_merge_ignores_none(self):
        base = {"model": {"n_sites": 4, "mass": 1.0}, "grid": {"epsilon": [0.0, 0.5]}}
        merged = deep_merge(base, {"model": {"mass": None, "coupling": 2.0}, "grid": {"epsilon": [0.25]}})
        assert merged == {"model": {"n_sites": 4, "mass": 1.0, "coupling": 2.0}, "grid": {"epsilon": [0.25]}}
        assert base["model"] == {"n_sites": 4, "mass": 1.0}
