import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from bayesrisk.cli import EXIT_CONFIG, EXIT_FAILED_CHECK, EXIT_OK, main
from bayesrisk.config import RunConfig
from bayesrisk.exceptions import ConfigError
from bayesrisk.report import CSV_COLUMNS, Check, RiskReport, emit, load
from bayesrisk.studies import run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SMALL = 2_000


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


@pytest.fixture(scope="module")
def scalar_verify():
    return run(RunConfig(problem={"builder": "scalar_unit"}, study="verify", samples=100_000, seed=0))


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig.from_text('{"problem": {"builder": "scalar_unit"}}')
        assert cfg.samples == 100_000 and cfg.seed == 0 and cfg.study == "verify"

    def test_invalid_json_reports_line(self):
        with pytest.raises(ConfigError, match="line 3"):
            RunConfig.from_text('{\n "problem": {"builder": "scalar_unit"},\n "samples": ,\n}')

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key 'smaples'.*line 2"):
            RunConfig.from_text('{"problem": {"builder": "scalar_unit"},\n "smaples": 5}')

    def test_missing_noise_variance(self):
        text = json.dumps({"problem": {"builder": "explicit", "forward": [[1.0]], "truth": [1.0]}}, indent=1)
        with pytest.raises(ConfigError, match="noise_cov' or 'noise_var"):
            RunConfig.from_text(text).validate()

    def test_pool_missing_noise_variance(self):
        cfg = RunConfig(
            problem={"builder": "scalar_unit"}, study="oed", k=1,
            pool={"kind": "explicit", "rows": [[1.0]]},
        )
        with pytest.raises(ConfigError, match="pool.noise_var"):
            cfg.validate()

    @pytest.mark.parametrize(
        "field, value",
        [("samples", 1), ("samples", 2.5), ("seed", -1), ("study", "nope"), ("beta", 0), ("format", "xml")],
    )
    def test_field_validation(self, field, value):
        cfg = RunConfig(problem={"builder": "scalar_unit"})
        setattr(cfg, field, value)
        with pytest.raises(ConfigError, match=field):
            cfg.validate()

    def test_dimension_mismatch_caught_up_front(self):
        cfg = RunConfig(problem={"builder": "explicit", "forward": [[1.0, 2.0]], "noise_var": 1.0,
                                 "truth": [1.0, 2.0, 3.0]})
        with pytest.raises(ConfigError, match="truth"):
            cfg.validate()

    def test_prior_dimension(self):
        cfg = RunConfig(problem={"builder": "scalar_unit"}, prior={"mean": [0, 0], "covariance": np.eye(2).tolist()})
        with pytest.raises(ConfigError, match="prior.mean"):
            cfg.validate()

    def test_truth_required_for_risk(self):
        cfg = RunConfig(problem={"builder": "explicit", "forward": [[1.0]], "noise_var": 1.0}, study="risk")
        with pytest.raises(ConfigError, match="truth"):
            cfg.validate()

    def test_beta_override(self):
        cfg = RunConfig(problem={"builder": "random", "n": 3, "d": 4, "seed": 0}, beta=0.25)
        assert cfg.validate().instance.regularization.beta == 0.25

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
    def test_shipped_configs_validate(self, path):
        RunConfig.load(path).validate()


class TestReport:
    def test_scalar_verify_passes(self, scalar_verify):
        assert scalar_verify.passed
        assert scalar_verify.analytic["bayes_risk"] == 0.5

    def test_json_round_trip(self, scalar_verify, tmp_path):
        emit(scalar_verify, tmp_path / "r.json")
        again = load(tmp_path / "r.json")
        assert again.to_dict() == scalar_verify.to_dict()
        assert json.loads((tmp_path / "r.json").read_text()) == scalar_verify.to_dict()

    def test_csv_shape(self, scalar_verify, tmp_path):
        emit(scalar_verify, tmp_path / "r.csv", "csv")
        rows = list(csv.reader((tmp_path / "r.csv").open()))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) - 1 == len(scalar_verify.checks)
        bayes = [r for r in rows if r[0] == "bayes_risk"]
        assert len(bayes) == 1 and float(bayes[0][1]) == 0.5

    def test_csv_uses_17_digits(self):
        report = RiskReport("risk", 0, checks=[Check("x", True, 0.1, "mc_4se", analytic=1 / 3)])
        assert report.to_csv().splitlines()[1].split(",")[1] == format(1 / 3, ".17g")

    def test_every_verdict_names_a_tolerance(self, scalar_verify):
        from bayesrisk.report import TOLERANCES

        assert all(c.tolerance_name in TOLERANCES for c in scalar_verify.checks)
        with pytest.raises(ValueError):
            Check("x", True, 1.0, "made-up")

    def test_hash_ignores_provenance(self, scalar_verify):
        other = RiskReport.from_dict(scalar_verify.to_dict())
        other.provenance = {"timings_s": {"total": 123.0}}
        assert other.determinism_hash() == scalar_verify.determinism_hash()

    def test_unwritable_path(self, scalar_verify, tmp_path):
        with pytest.raises(OSError, match="cannot write report"):
            emit(scalar_verify, tmp_path / "missing" / "r.json")


class TestStudies:
    def test_verify_check_names(self, scalar_verify):
        names = {c.name for c in scalar_verify.checks}
        assert {
            "mse_decomposition_identity", "frequentist_risk", "bias_vs_mc", "empirical_decomposition",
            "trace_identity", "bayes_risk", "prior_expected_bias_sq", "map_equivalence",
            "pushforward_mean", "pushforward_covariance", "pushforward_composition",
            "characteristic_function", "second_moment",
        } <= names

    @pytest.mark.parametrize("study", ["risk", "bayes-risk", "pushforward-check"])
    def test_subsets(self, study):
        rep = run(RunConfig(problem={"builder": "random", "n": 3, "d": 5, "seed": 1}, study=study, samples=SMALL))
        assert rep.passed and rep.checks

    def test_oed_deconvolution(self):
        cfg = RunConfig(
            problem={"builder": "deconvolution", "n": 32, "kernel_width": 2.0, "noise_sigma": 0.05},
            study="oed", pool={"kind": "point", "noise_var": 0.0025}, k=4,
        )
        rep = run(cfg)
        trace = rep.selection["objective_trace"]
        assert len(trace) == 4
        assert np.all(np.diff(trace) <= 1e-12)
        assert rep.passed

    def test_oed_with_exhaustive(self):
        rep = run(RunConfig.load(CONFIGS / "oed_explicit.json"))
        assert "exhaustive_le_greedy" in {c.name for c in rep.checks}
        assert rep.analytic["greedy_gap"] >= -1e-12
        assert rep.passed

    def test_deterministic_hash(self):
        cfg = dict(problem={"builder": "random", "n": 4, "d": 6, "seed": 7}, study="verify", samples=SMALL, seed=3)
        assert run(RunConfig(**cfg)).determinism_hash() == run(RunConfig(**cfg)).determinism_hash()

    def test_seed_changes_hash(self):
        a = run(RunConfig(problem={"builder": "scalar_unit"}, samples=SMALL, seed=1))
        b = run(RunConfig(problem={"builder": "scalar_unit"}, samples=SMALL, seed=2))
        assert a.determinism_hash() != b.determinism_hash()


class TestMain:
    def test_verify_scalar(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["verify", "--out", str(out), "--samples", "100000", "--seed", "0"]) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["analytic"]["bayes_risk"] == 0.5
        assert report["config"]["samples"] == 100_000
        assert "PASS  bayes_risk" in capsys.readouterr().err

    def test_flags_override_config(self, tmp_path):
        cfg = write(tmp_path, {"study": "risk", "problem": {"builder": "scalar_unit"}, "samples": 10, "seed": 4})
        out = tmp_path / "r.json"
        assert main(["bayes-risk", "--config", str(cfg), "--samples", "500", "--out", str(out)]) == EXIT_OK
        report = json.loads(out.read_text())
        assert report["study"] == "bayes-risk"
        assert report["config"]["samples"] == 500 and report["seed"] == 4

    def test_csv_format(self, tmp_path):
        out = tmp_path / "r.csv"
        assert main(["risk", "--samples", "1000", "--out", str(out), "--format", "csv"]) == EXIT_OK
        assert out.read_text().startswith(",".join(CSV_COLUMNS))

    def test_malformed_config_leaves_no_file(self, tmp_path, capsys):
        cfg = write(tmp_path, {"problem": {"builder": "explicit", "forward": [[1.0]], "truth": [1.0]}})
        out = tmp_path / "r.json"
        assert main(["verify", "--config", str(cfg), "--out", str(out)]) == EXIT_CONFIG
        assert not out.exists()
        assert list(tmp_path.iterdir()) == [cfg]
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["verify", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    def test_failed_verdict_exit_status(self, tmp_path, monkeypatch):
        import bayesrisk.studies as studies

        monkeypatch.setattr(studies, "N_SE", 0.0)
        out = tmp_path / "r.json"
        assert main(["risk", "--samples", "1000", "--out", str(out)]) == EXIT_FAILED_CHECK
        assert json.loads(out.read_text())["passed"] is False

    def test_module_entry_point(self, tmp_path):
        out = tmp_path / "r.json"
        proc = subprocess.run(
            [sys.executable, "-m", "bayesrisk", "pushforward-check", "--samples", "1000", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert json.loads(out.read_text())["study"] == "pushforward-check"

    def test_end_to_end_determinism(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert main(["verify", "--config", str(CONFIGS / "verify_random.json"), "--samples", "5000",
                         "--out", str(out)]) == EXIT_OK
        ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
        assert ra["determinism_hash"] == rb["determinism_hash"]
        ra.pop("provenance"), rb.pop("provenance")
        assert json.dumps(ra, sort_keys=True) == json.dumps(rb, sort_keys=True)
