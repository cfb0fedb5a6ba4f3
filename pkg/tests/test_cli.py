import pytest

import percoz
from experiment import ExperimentSpec
from records import dumps, read_json, strip_volatile


def run_cli(*argv):
    return percoz.main(list(argv) + ["--quiet", "--log-level", "ERROR"])


class TestUsage:
    def test_p_out_of_range(self, tmp_path):
        assert run_cli("oracle", "phi", "--dim", "3", "--p", "1.5", "--out", str(tmp_path)) == 2
        assert not (tmp_path / "oracle.json").exists()

    def test_unknown_subcommand(self):
        assert run_cli("no-such-command") == 2

    def test_refused_enumeration(self, tmp_path):
        # the default d=2 box has 40 edges, past the enumeration limit
        assert run_cli("exact", "--dim", "2", "--out", str(tmp_path)) == 2

    def test_spec_validation_lists_fields(self):
        spec = ExperimentSpec.load("oracle", overrides={"dim": "3", "p": "1.5", "samples": "0"})
        problems = spec.validate()
        assert "p: must lie in [0, 1], got 1.5" in problems
        assert any(p.startswith("samples:") for p in problems)

    def test_hash_ignores_threads_and_out(self):
        a = ExperimentSpec.load("oracle", overrides={"dim": "3", "threads": "1", "out": "a"})
        b = ExperimentSpec.load("oracle", overrides={"dim": "3", "threads": "4", "out": "b"})
        c = ExperimentSpec.load("oracle", overrides={"dim": "3", "seed": "1"})
        assert a.spec_hash == b.spec_hash
        assert a.spec_hash != c.spec_hash


class TestOracle:
    def test_phi_record(self, tmp_path):
        assert run_cli("oracle", "phi", "--dim", "3", "--x", "1,0,0", "--out", str(tmp_path)) == 0
        record = read_json(tmp_path / "oracle.json")
        assert record["phi"] == 10
        assert record["psi"] == 1
        assert record["defects"] == []
        assert record["manifest"]["command"] == "oracle"
        assert (tmp_path / "report.html").exists()


class TestSyntheticOZ:
    @pytest.fixture
    def fit_path(self, tmp_path):
        return tmp_path / "fit.json"

    def test_end_to_end(self, fit_path):
        assert run_cli("synthetic-oz", "--dim", "2", "--out", str(fit_path)) == 0
        record = read_json(fit_path)
        for key in ("tau", "Phi", "residuals", "Phi_closed_form", "Phi_relative_error", "tau_predicted"):
            assert key in record
        assert record["Phi_relative_error"] < 0.05
        assert record["tau"] == pytest.approx(record["tau_predicted"], rel=0.02)
        assert (fit_path.parent / "fit_decay.csv").exists()
        assert (fit_path.parent / "fit_plot.gp").exists()
        assert (fit_path.parent / "series.json").exists()

    def test_deterministic(self, fit_path):
        args = ("synthetic-oz", "--dim", "2", "--n-list", "20,30,40,50,60", "--out", str(fit_path))
        assert run_cli(*args) in (0, 1)
        first = read_json(fit_path)
        assert run_cli(*args) in (0, 1)
        second = read_json(fit_path)
        assert strip_volatile(first) == strip_volatile(second)
        assert first["manifest"]["spec_hash"] == second["manifest"]["spec_hash"]

    def test_reemit_is_byte_identical(self, fit_path):
        assert run_cli("synthetic-oz", "--dim", "2", "--n-list", "20,30,40,50", "--out", str(fit_path)) in (0, 1)
        assert dumps(read_json(fit_path)) == fit_path.read_bytes()

    def test_short_series_refused(self, fit_path):
        assert run_cli("synthetic-oz", "--dim", "2", "--n-list", "20,30", "--out", str(fit_path)) == 2
