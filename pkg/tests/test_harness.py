"""Tests for experiment configs, the type I error / power runner and report files."""

import json
import logging

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.core.errors import ConfigError, DegenerateResidualError
from src.harness import experiment
from src.harness.config import ExperimentConfig, load_experiment_config
from src.harness.experiment import (null_v_distribution, run_parameter_sweep, run_q_sweep, run_rs_pipeline,
                                    run_type1_power_experiment)
from src.harness.report import (ExperimentReport, emit_report, emit_reports, load_report, rejection_rate,
                                sidecar_path)
from src.sem.synth import generate_sem_params, sample_dataset


def small_config(**changes) -> ExperimentConfig:
    base = dict(q=12, r=2, n_samples=40, rho_beta=1.5, rho_gamma=2.0, m=5, k=3,
                n_permutations=19, reps=3, alphas=[0.05, 0.1], oracle_diagnostics=False)
    base.update(changes)
    return ExperimentConfig(**base)


class TestExperimentConfig:
    def test_defaults(self):
        config = small_config()
        assert config.d == 1
        assert config.methods == ["rs"]
        assert config.visible_columns() == tuple(range(12))
        assert config.setting_label() == "setting1"

    @pytest.mark.parametrize("changes", [
        {"alphas": [1.5]},
        {"alphas": []},
        {"methods": ["lasso"]},
        {"methods": ["rs", "rs"]},
        {"hidden": [12]},
        {"hidden": [1, 1]},
        {"hidden": [0], "hidden_fraction": 0.5},
        {"hidden_fraction": 1.0},
        {"n_samples": 1},
        {"colour": "blue"},
    ])
    def test_rejects(self, changes):
        with pytest.raises(ValidationError):
            small_config(**changes)

    def test_hidden_preset(self):
        config = small_config(q=10, k=2, hidden_preset="setting2")
        assert config.hidden_mask() == tuple(range(7))
        assert config.visible_columns() == (7, 8, 9)
        assert config.setting_label() == "setting2"

    def test_explicit_hidden_columns(self):
        config = small_config(hidden=[5, 2])
        assert config.hidden_mask() == (2, 5)
        assert config.setting_label() == "hidden2"

    def test_updated_is_validated(self):
        with pytest.raises(ValidationError):
            small_config().updated(reps=0)
        assert small_config().updated(q=20).q == 20

    def test_load(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(small_config().model_dump()))
        assert load_experiment_config(str(path)) == small_config()
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_experiment_config(str(path))


class TestRejectionRate:
    def test_ignores_failed_reps(self):
        assert rejection_rate([0.01, 0.2, float("nan")], 0.05) == pytest.approx(0.5)

    def test_all_failed(self):
        assert np.isnan(rejection_rate([float("nan")], 0.05))

    def test_boundary_rejects(self):
        assert rejection_rate([0.05], 0.05) == 1.0

    def test_logs_excluded_reps(self, caplog):
        with caplog.at_level(logging.WARNING, logger="src.harness.report"):
            rejection_rate([0.01, float("nan"), 0.3, float("nan")], 0.05)
        assert "excludes 2 of 4 reps" in caplog.text

    def test_silent_when_every_rep_finished(self, caplog):
        with caplog.at_level(logging.WARNING, logger="src.harness.report"):
            rejection_rate([0.01, 0.3], 0.05)
        assert caplog.text == ""


class TestRunExperiment:
    def test_arms_and_methods(self):
        report = run_type1_power_experiment(small_config(methods=["rs", "dr", "js"]), progress=False)
        assert set(report.p_values) == {"type1", "power"}
        assert set(report.p_values["type1"]) == {"rs", "dr"}
        assert report.unavailable == ["js"]
        for arm in report.p_values.values():
            for values in arm.values():
                assert len(values) == 3
                assert all(1 / 20 <= p <= 1.0 for p in values)

    def test_null_only_when_beta_is_zero(self):
        report = run_type1_power_experiment(small_config(rho_beta=0.0), progress=False)
        assert list(report.p_values) == ["type1"]

    def test_single_rep(self):
        report = run_type1_power_experiment(small_config(reps=1), progress=False)
        assert len(report.p_values["type1"]["rs"]) == 1

    def test_threads_do_not_change_p_values(self):
        serial = run_type1_power_experiment(small_config(methods=["rs", "fl"]), progress=False)
        threaded = run_type1_power_experiment(small_config(methods=["rs", "fl"], threads=3), progress=False)
        assert threaded.p_values == serial.p_values

    def test_all_hidden(self):
        with pytest.raises(ConfigError):
            run_type1_power_experiment(small_config(hidden=list(range(12))), progress=False)

    def test_subset_size_exceeds_visible_columns(self):
        with pytest.raises(ConfigError):
            run_type1_power_experiment(small_config(hidden_fraction=0.75), progress=False)

    def test_failed_reps_are_quarantined(self, monkeypatch):
        def broken(*args, **kwargs):
            raise DegenerateResidualError("X column 0 has no variance left")

        monkeypatch.setattr(experiment, "freedman_lane_test", broken)
        report = run_type1_power_experiment(small_config(methods=["rs", "fl"], rho_beta=0.0), progress=False)
        assert report.failures["type1"]["fl"] == 3
        assert report.failures["type1"]["rs"] == 0
        assert np.isnan(report.rejection_rate("type1", "fl", 0.05))

    def test_diagnostics(self):
        report = run_type1_power_experiment(small_config(oracle_diagnostics=True), progress=False)
        assert 0.0 <= report.diagnostics["limit_constant_null"] <= 1.0
        assert report.diagnostics["condition_strength"] > 0.0
        assert report.diagnostics["type1_bound_estimate"] >= 0.0

    def test_oracle_gamma_method(self):
        report = run_type1_power_experiment(small_config(methods=["rs-oracle"]), progress=False)
        assert "type1_bound_estimate" not in report.diagnostics
        assert len(report.p_values["power"]["rs-oracle"]) == 3

    def test_rs_pipeline(self):
        config = small_config(hidden=[0, 1])
        params = generate_sem_params(1, 12, 2, 0.0, 2.0, seed=1)
        data = sample_dataset(params, 40, seed=2)
        p = run_rs_pipeline(data, config)
        assert 1 / 20 <= p <= 1.0
        assert run_rs_pipeline(data, config) == p


class TestSweeps:
    def test_singleton_q_sweep_matches_single_run(self):
        config = small_config()
        [swept] = run_q_sweep(config, [12], progress=False)
        single = run_type1_power_experiment(config, progress=False)
        assert swept.p_values == single.p_values

    def test_q_list_must_increase(self):
        with pytest.raises(ConfigError):
            run_q_sweep(small_config(), [20, 12], progress=False)

    def test_parameter_sweep(self):
        reports = run_parameter_sweep(small_config(reps=1), "rho_beta", [0.0, 1.0], progress=False)
        assert [r.config["rho_beta"] for r in reports] == [0.0, 1.0]
        assert "power" not in reports[0].p_values

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            run_parameter_sweep(small_config(), "colour", [1], progress=False)

    def test_null_v_distribution(self):
        summary = null_v_distribution(small_config(), n_draws=50, quantiles=(0.1, 0.9))
        assert summary["quantiles"] == [0.1, 0.9]
        assert summary["permutation"][0] <= summary["permutation"][1]
        assert summary["population"][0] <= summary["population"][1]
        assert 0.0 <= summary["v_observed"] <= 1.0


@pytest.fixture(scope="module")
def report():
    config = small_config(methods=["rs", "dr"])
    return run_type1_power_experiment(config, progress=False)


class TestReportFiles:
    def test_csv_header(self, report, tmp_path):
        path = tmp_path / "bench.csv"
        written = emit_report(report, str(path))
        assert written == [str(path), sidecar_path(str(path))]
        assert path.read_text().splitlines()[0] == "method,setting,alpha,rejection_rate,reps,seed"

    def test_summary_rows(self, report):
        rows = report.summary_rows()
        # 2 methods x 2 arms x 2 alphas
        assert len(rows) == 8
        assert {row["setting"] for row in rows} == {"setting1-type1", "setting1-power"}

    def test_rates_recomputed_from_sidecar(self, report, tmp_path):
        path = tmp_path / "bench.csv"
        emit_report(report, str(path))
        summary = pd.read_csv(path)
        raw = pd.read_csv(sidecar_path(str(path)))
        for row in summary.itertuples():
            p = raw[(raw.method == row.method) & (raw.setting == row.setting)].p_value
            assert rejection_rate(p, row.alpha) == pytest.approx(row.rejection_rate)

    def test_json_round_trip(self, report, tmp_path):
        path = tmp_path / "bench.json"
        emit_report(report, str(path), format="json")
        assert load_report(str(path)) == report

    def test_nan_round_trip(self):
        report = ExperimentReport({"seed": 1, "alphas": [0.05]}, "setting1",
                                  {"type1": {"rs": [0.5, float("nan")]}})
        again = ExperimentReport.from_dict(json.loads(json.dumps(report.to_dict())))
        assert np.isnan(again.p_values["type1"]["rs"][1])
        assert again == report

    def test_sweep_csv_is_tagged(self, report, tmp_path):
        path = tmp_path / "sweep.csv"
        emit_reports([report], str(path), vary="q")
        settings = set(pd.read_csv(path).setting)
        assert settings == {"setting1-type1-q12", "setting1-power-q12"}

    def test_unwritable_path(self, report, tmp_path):
        with pytest.raises(OSError):
            emit_report(report, str(tmp_path / "missing" / "bench.csv"))
