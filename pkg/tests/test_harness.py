"""Experiment harness: configuration, replication pipeline, summaries,
cross sections, and the command-line interface."""

import json
import math
import os

import numpy as np
import pytest

from spde2d import fieldio
from spde2d.cli import main as cli_main
from spde2d.errors import ConfigError, GridMismatchError
from spde2d.harness import (ExperimentConfig, cross_section_dump,
                            default_config, diagnostics, estimate_field,
                            load_config, run_monte_carlo, run_replication)
from spde2d.model import NoiseKind
from spde2d.simulate import (FieldSample, RngSeed, SpaceTimeGrid,
                             TruncationSpec, simulate_field)

SMALL = {
    "params": {"theta0": 0.0, "theta1": 0.2, "eta1": 0.2, "theta2": 0.2,
               "sigma": 1.0, "alpha": 0.5},
    "kind": "q1",
    "grid": {"N": 40, "M1": 10, "M2": 10},
    "truncation": {"K": 8, "L": 8},
    "thinning": {"mbar1": 5, "mbar2": 5, "delta": 0.05, "n": 20},
    "replications": 3,
    "seed": 2024,
}


@pytest.fixture
def small_config() -> ExperimentConfig:
    return ExperimentConfig.from_dict(SMALL)


class TestConfig:
    def test_defaults_are_desk_scale(self):
        cfg = default_config()
        assert (cfg.grid.N, cfg.grid.M1, cfg.grid.M2) == (1000, 50, 50)
        assert (cfg.trunc.K, cfg.trunc.L) == (256, 256)
        assert cfg.thinning.n == 100
        assert cfg.replications == 25

    def test_round_trip_through_dict(self, small_config):
        again = ExperimentConfig.from_dict(small_config.to_dict())
        assert again == small_config

    def test_q2_requires_mu0(self):
        d = dict(SMALL)
        d["kind"] = "q2-known-mu0"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_bad_json_file_raises_config_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_invalid_values_raise_config_error(self):
        d = dict(SMALL)
        d["params"] = dict(SMALL["params"], alpha=1.5)
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)


class TestReplication:
    def test_deterministic_record(self, small_config):
        a = run_replication(small_config, 1)
        b = run_replication(small_config, 1)
        assert a == b
        c = run_replication(small_config, 2)
        assert c.fit.scale != a.fit.scale

    def test_degenerate_zero_noise_flagged(self):
        d = dict(SMALL)
        d["params"] = dict(SMALL["params"], sigma=0.0)
        cfg = ExperimentConfig.from_dict(d)
        rec = run_replication(cfg, 0)
        assert rec.degenerate_input
        assert rec.fit.scale == cfg.contrast.scale_box[0]

    def test_q2_cases_dispatch(self):
        for kind in ("q2-known-mu0", "q2-unknown-mu0"):
            d = dict(SMALL)
            d["kind"] = kind
            d["params"] = dict(SMALL["params"], mu0=0.0)
            cfg = ExperimentConfig.from_dict(d)
            rec = run_replication(cfg, 0)
            assert rec.estimates.case is NoiseKind(kind)

    def test_estimate_field_checks_grid(self, small_config, reference_params):
        other = simulate_field(reference_params, NoiseKind.Q1,
                               SpaceTimeGrid(N=8, M1=10, M2=10),
                               TruncationSpec(K=4, L=4),
                               seed=RngSeed(1))
        with pytest.raises(GridMismatchError):
            estimate_field(small_config, other)


class TestMonteCarlo:
    def test_accounting_and_summary_shape(self, small_config):
        table = run_monte_carlo(small_config)
        assert table.replications == 3
        assert len(table.records) == 3
        names = [r["parameter"] for r in table.rows]
        assert names == ["s", "kappa", "eta", "theta0", "theta1", "eta1",
                         "theta2", "sigma2"]
        for row in table.rows:
            assert 0 <= row["fail_count"] <= 3
            n_ok = sum(1 for rec in table.records
                       if rec.estimates.failure is None
                       or row["parameter"] in ("s", "kappa", "eta"))
            assert n_ok + row["fail_count"] == 3

    def test_worker_count_does_not_change_bytes(self, small_config):
        serial = run_monte_carlo(small_config, threads=1)
        parallel = run_monte_carlo(small_config, threads=2)
        assert serial.to_csv() == parallel.to_csv()
        assert serial.to_json() == parallel.to_json()

    def test_single_replication_has_blank_sd(self):
        d = dict(SMALL)
        d["replications"] = 1
        table = run_monte_carlo(ExperimentConfig.from_dict(d))
        assert all(row["sd"] is None for row in table.rows)
        csv = table.to_csv()
        line = csv.strip().split("\n")[1]
        assert line.split(",")[3] == ""

    def test_rep_seed_independence(self):
        # contrast scales across distinct replications are uncorrelated
        d = dict(SMALL)
        d["grid"] = {"N": 16, "M1": 6, "M2": 6}
        d["truncation"] = {"K": 4, "L": 4}
        d["replications"] = 1000
        d["thinning"] = {"mbar1": 3, "mbar2": 3, "delta": 0.05, "n": 8}
        d["contrast"] = {"init_grid": 3}
        table = run_monte_carlo(ExperimentConfig.from_dict(d), threads=2)
        s = np.array([rec.fit.scale for rec in table.records])
        corr = np.corrcoef(s[:-1], s[1:])[0, 1]
        assert abs(corr) < 3.0 / math.sqrt(len(s) - 1)

    def test_failure_counting(self, small_config, monkeypatch):
        import spde2d.harness as hmod
        from spde2d.plugins import PluginEstimates, ORDERING_VIOLATION

        real = hmod.q1_plugin
        calls = {"n": 0}

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 2:
                return PluginEstimates(case=NoiseKind.Q1,
                                       failure=ORDERING_VIOLATION)
            return real(*args, **kwargs)

        monkeypatch.setattr(hmod, "q1_plugin", flaky)
        table = run_monte_carlo(small_config)
        theta2_row = next(r for r in table.rows if r["parameter"] == "theta2")
        s_row = next(r for r in table.rows if r["parameter"] == "s")
        assert theta2_row["fail_count"] == 1
        assert s_row["fail_count"] == 0


class TestDiagnostics:
    def test_reference_ratio_values(self):
        # full-scale reference configuration: N=1000, M=200, m=25,
        # gamma=0.26, eps=0.499; the first ratio is ~0.008 at n=50 and
        # ~0.011 at n=100, and the second ~0.50 at n=100
        base = {
            "params": dict(SMALL["params"]),
            "grid": {"N": 1000, "M1": 200, "M2": 200},
            "truncation": {"K": 8, "L": 8},
            "thinning": {"mbar1": 6, "mbar2": 6, "delta": 0.05, "n": 50},
            "replications": 1, "seed": 1,
        }
        cfg = ExperimentConfig.from_dict(base)
        d = diagnostics(cfg)
        assert d["n^(1-alpha)/(m N^(2 gamma))"] == pytest.approx(0.008, abs=5e-4)
        base["thinning"]["n"] = 100
        cfg = ExperimentConfig.from_dict(base)
        d = diagnostics(cfg)
        assert d["n^(1-alpha)/(m N^(2 gamma))"] == pytest.approx(0.011, abs=5e-4)
        assert d["n^(1-alpha+eps)/(min(M1,M2)^(2 eps))"] == pytest.approx(
            0.50, abs=5e-3)

    def test_diagnostics_in_summary(self, small_config):
        table = run_monte_carlo(small_config)
        assert set(table.diagnostics) == {
            "n^(1-alpha)/(m N^(2 gamma))",
            "n^(2-alpha)/(m N^(2 gamma))",
            "n^(1-alpha+eps)/(min(M1,M2)^(2 eps))",
            "n^(2-alpha+eps)/(min(M1,M2)^(2 eps))",
        }


class TestCrossSection:
    @pytest.fixture
    def field(self, reference_params):
        return simulate_field(reference_params, NoiseKind.Q1,
                              SpaceTimeGrid(N=10, M1=10, M2=10),
                              TruncationSpec(K=6, L=6), seed=RngSeed(5))

    def test_time_slice(self, field):
        section = cross_section_dump(field, "t", 0.5)
        assert section.names == ("y", "z")
        assert section.values.shape == (11, 11)
        assert np.array_equal(section.values, field.values[5])

    def test_boundary_slice_is_zero(self, field):
        section = cross_section_dump(field, "y", 0.0)
        assert np.all(section.values == 0.0)

    def test_zero_field_slices_zero(self, reference_params):
        grid = SpaceTimeGrid(N=4, M1=4, M2=4)
        field = FieldSample(values=np.zeros((5, 5, 5)), grid=grid,
                            provenance={})
        assert np.all(cross_section_dump(field, "z", 0.5).values == 0.0)

    def test_off_grid_level_rejected(self, field):
        with pytest.raises(ConfigError):
            cross_section_dump(field, "t", 0.123)
        with pytest.raises(ConfigError):
            cross_section_dump(field, "w", 0.5)

    def test_csv_layout(self, field):
        text = cross_section_dump(field, "t", 0.1).to_csv()
        lines = text.strip().split("\n")
        assert lines[0] == "y,z,value"
        assert len(lines) == 1 + 11 * 11


class TestFieldIo:
    def test_round_trip_preserves_bits_and_provenance(self, reference_params,
                                                      tmp_path):
        field = simulate_field(reference_params, NoiseKind.Q1,
                               SpaceTimeGrid(N=4, M1=5, M2=6),
                               TruncationSpec(K=3, L=3), seed=RngSeed(9))
        path = str(tmp_path / "f.bin")
        fieldio.write_field(field, path)
        back = fieldio.read_field(path)
        assert np.array_equal(back.values, field.values)
        assert back.grid == field.grid
        assert back.provenance == field.provenance

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTAFILE" + b"\x00" * 64)
        with pytest.raises(ConfigError):
            fieldio.read_field(str(path))


class TestCli:
    def _write_config(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(SMALL))
        return str(path)

    def test_simulate_estimate_cross_section_round_trip(self, tmp_path,
                                                        capsys):
        cfg = self._write_config(tmp_path)
        out = str(tmp_path)
        assert cli_main(["simulate", "--config", cfg, "--out-dir", out]) == 0
        field_path = os.path.join(out, "field.bin")
        assert os.path.exists(field_path)
        assert cli_main(["estimate", "--config", cfg, "--field", field_path,
                         "--out-dir", out]) == 0
        with open(os.path.join(out, "estimate.json")) as fh:
            record = json.load(fh)
        assert "kappa_hat" in record and "theta2" in record
        assert cli_main(["cross-section", "--field", field_path, "--axis",
                         "t", "--level", "0.5", "--out-dir", out]) == 0
        assert os.path.exists(os.path.join(out, "cross_section_t_0.5.csv"))

    def test_estimate_matches_replication(self, tmp_path):
        # estimate on a dumped field reproduces the in-process record
        cfg_path = self._write_config(tmp_path)
        out = str(tmp_path)
        assert cli_main(["simulate", "--config", cfg_path, "--rep", "0",
                         "--out-dir", out]) == 0
        assert cli_main(["estimate", "--config", cfg_path, "--field",
                         os.path.join(out, "field.bin"),
                         "--out-dir", out]) == 0
        with open(os.path.join(out, "estimate.json")) as fh:
            record = json.load(fh)
        direct = run_replication(ExperimentConfig.from_dict(SMALL), 0)
        assert record["kappa_hat"] == direct.fit.kappa_hat
        assert record["theta2"] == direct.estimates.theta2

    def test_mc_outputs(self, tmp_path):
        cfg = self._write_config(tmp_path)
        out = str(tmp_path / "mc")
        assert cli_main(["mc", "--config", cfg, "--replications", "2",
                         "--out-dir", out]) == 0
        for name in ("summary.csv", "summary.json", "records.json"):
            assert os.path.exists(os.path.join(out, name))
        with open(os.path.join(out, "records.json")) as fh:
            payload = json.load(fh)
        assert len(payload["records"]) == 2
        assert payload["config"]["replications"] == 2

    def test_oracle_output(self, tmp_path):
        cfg = self._write_config(tmp_path)
        out = str(tmp_path)
        assert cli_main(["oracle", "--config", cfg, "--y", "0.5", "--z",
                         "0.5", "--i", "1,8", "--out-dir", out]) == 0
        with open(os.path.join(out, "oracle.csv")) as fh:
            lines = fh.read().strip().split("\n")
        assert lines[0] == "i,expected_squared_increment"
        assert len(lines) == 4  # two indices + asymptotic mean
        assert lines[-1].startswith("asymptotic_mean,")

    def test_config_errors_exit_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert cli_main(["mc", "--config", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "error:" in err

    def test_missing_field_exit_nonzero(self, tmp_path):
        cfg = self._write_config(tmp_path)
        assert cli_main(["estimate", "--config", cfg, "--field",
                         str(tmp_path / "absent.bin")]) == 1


class TestBackendSelection:
    def test_pure_python_env_forces_fallback(self):
        import subprocess
        import sys
        code = "import spde2d.kernels as k; print(k.BACKEND)"
        env = dict(os.environ, SPDE2D_PURE_PYTHON="1")
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True)
        assert out.stdout.strip() == "python"

    def test_fallback_replication_matches_compiled(self, small_config):
        # the whole pipeline is bit-identical across backends
        pytest.importorskip("spde2d._kernels_c")
        import pickle
        import subprocess
        import sys
        code = (
            "import pickle, sys\n"
            "from spde2d.harness import ExperimentConfig, run_replication\n"
            "cfg = ExperimentConfig.from_dict(pickle.load(sys.stdin.buffer))\n"
            "rec = run_replication(cfg, 0)\n"
            "pickle.dump((rec.fit, rec.qv11, rec.qv12,\n"
            "             rec.estimates), sys.stdout.buffer)\n"
        )
        results = {}
        for flag in ("0", "1"):
            env = dict(os.environ, SPDE2D_PURE_PYTHON=flag)
            out = subprocess.run([sys.executable, "-c", code], env=env,
                                 input=pickle.dumps(SMALL),
                                 capture_output=True, check=True)
            results[flag] = pickle.loads(out.stdout)
        assert results["0"] == results["1"]


def test_estimate_covariance_flag(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(SMALL))
    out = str(tmp_path)
    assert cli_main(["simulate", "--config", str(cfg_path),
                     "--out-dir", out]) == 0
    assert cli_main(["estimate", "--config", str(cfg_path), "--field",
                     os.path.join(out, "field.bin"), "--covariance",
                     "--out-dir", out]) == 0
    with open(os.path.join(out, "estimate.json")) as fh:
        record = json.load(fh)
    cov = record["covariance"]
    if cov is not None:
        assert cov["which"] == "J"
        assert len(cov["entries"]) == 5


def test_fieldio_time_slice_csv(reference_params, tmp_path):
    field = simulate_field(reference_params, NoiseKind.Q1,
                           SpaceTimeGrid(N=3, M1=4, M2=4),
                           TruncationSpec(K=2, L=2), seed=RngSeed(8))
    text = fieldio.time_slice_csv(field, 2)
    lines = text.strip().split("\n")
    assert lines[0] == "y,z,value"
    assert len(lines) == 1 + 5 * 5
    with pytest.raises(ConfigError):
        fieldio.time_slice_csv(field, 9)
