import csv
import json
import logging
from io import StringIO
from pathlib import Path

import numpy as np
import pytest

from hankelnet.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, parse_and_dispatch
from hankelnet.estimators import qmc_mean
from hankelnet.netgen import sobol_table_checksum
from hankelnet.pointgen import PointSet


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("HANKELNET_SEED", "HANKELNET_WORKERS", "HANKELNET_SWEEP_CONFIG", "LOG_FORMAT"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("LOG_LEVEL", "WARNING")
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_hankelnet", False):
            root.removeHandler(handler)


def run(capsys, *argv):
    code = parse_and_dispatch(list(argv))
    return code, capsys.readouterr().out


class TestGen:
    def test_csv_rows(self, capsys):
        code, out = run(capsys, "gen", "--design", "hrd", "--base", "2", "--m", "3", "--dim", "2",
                        "--seed", "1")
        assert code == EXIT_OK
        rows = list(csv.reader(StringIO(out)))
        assert rows[0] == ["n", "x1", "x2"]
        assert len(rows) == 1 + 8
        assert [int(r[0]) for r in rows[1:]] == list(range(8))

    def test_output_parses_back(self, capsys):
        _, out = run(capsys, "gen", "--design", "urd", "--base", "3", "--m", "2", "--dim", "3",
                     "--shift")
        rows = list(csv.reader(StringIO(out)))[1:]
        points = PointSet(np.array([[float(v) for v in r[1:]] for r in rows]))
        assert points.n_points == 9
        assert qmc_mean(lambda x: np.ones(len(x)), points) == 1.0

    def test_deterministic(self, capsys):
        first = run(capsys, "gen", "--design", "lms-sobol", "--m", "4", "--dim", "3", "--seed", "5")
        second = run(capsys, "gen", "--design", "lms-sobol", "--m", "4", "--dim", "3", "--seed", "5")
        assert first == second

    def test_json_format(self, capsys):
        _, out = run(capsys, "gen", "--m", "2", "--format", "json")
        payload = json.loads(out)
        assert len(payload["points"]) == 4
        assert payload["design_kind"] == "hrd"

    def test_writes_out_file(self, capsys, tmp_path):
        target = tmp_path / "points.csv"
        code, out = run(capsys, "gen", "--m", "2", "--out", str(target))
        assert code == EXIT_OK
        assert out == ""
        assert target.read_text().startswith("n,x1\n")


class TestCommands:
    def test_omega_closed_form(self, capsys):
        code, out = run(capsys, "omega", "--alpha", "1", "--x", "0")
        assert code == EXIT_OK
        assert out == "1.5\n"

    def test_omega_series(self, capsys):
        code, out = run(capsys, "omega", "--alpha", "1", "--x", "0", "--base", "3", "--k-max", "80")
        payload = json.loads(out)
        assert code == EXIT_OK
        assert payload["k_max"] == 80
        assert payload["tail_bound"] > 0

    def test_omega_other_base_needs_k_max(self, capsys):
        code, _ = run(capsys, "omega", "--x", "0.5", "--base", "3")
        assert code == EXIT_RUNTIME

    def test_estimate(self, capsys):
        code, out = run(capsys, "estimate", "--m", "4", "--dim", "2", "--integrand", "t_exp")
        payload = json.loads(out)
        assert code == EXIT_OK
        assert payload["exact"] == 1.0
        assert payload["sq_error"] == pytest.approx((payload["estimate"] - 1.0) ** 2)

    def test_mom_rows(self, capsys):
        code, out = run(capsys, "mom", "--m", "2", "--dim", "1", "--r", "1", "--batches", "3")
        rows = list(csv.DictReader(StringIO(out)))
        assert code == EXIT_OK
        assert [row["batch"] for row in rows] == ["0", "1", "2"]
        assert rows[0]["r"] == "1"

    def test_optimize(self, capsys):
        code, out = run(capsys, "optimize", "--m", "4", "--dim", "2", "--r", "3", "--alpha", "2")
        payload = json.loads(out)
        assert code == EXIT_OK
        assert len(payload["wce_values"]) == 3
        assert payload["best_wce"] == min(payload["wce_values"])

    def test_tparam_unscrambled_sobol(self, capsys):
        code, out = run(capsys, "tparam", "--design", "lms-sobol", "--unscrambled", "--m", "5",
                        "--dim", "2")
        assert code == EXIT_OK
        assert json.loads(out)["t"] == 0

    def test_dualprob(self, capsys):
        code, out = run(capsys, "dualprob", "--m", "3", "--k", "1,1", "--trials", "2000")
        payload = json.loads(out)
        assert code == EXIT_OK
        assert payload["exact"] == 0.125
        assert payload["s"] == 2
        assert abs(payload["mc_estimate"] - 0.125) <= 5 * payload["mc_stderr"] + 1e-12

    def test_bench(self, capsys, tmp_path):
        config = tmp_path / "sweep.env"
        config.write_text("design = hrd\nbase = 2\nm_min = 2\nm_max = 3\ns = 2\n"
                          "integrand = product_power\nout = ignored.csv\nr = 1\nbatches = 2\n")
        out_path = tmp_path / "sweep.csv"
        code, out = run(capsys, "bench", "--config", str(config), "--out", str(out_path))
        assert code == EXIT_OK
        assert json.loads(out)["batches"] == 2
        assert len(out_path.read_text().splitlines()) == 1 + 4

    def test_bench_seed_overrides_file(self, capsys, tmp_path):
        config = tmp_path / "sweep.env"
        config.write_text("design = hrd\nbase = 2\nm_min = 2\nm_max = 3\ns = 2\n"
                          "integrand = product_power\nout = ignored.csv\nr = 1\nbatches = 2\nseed = 1\n")
        outputs = {}
        for seed in ("5", "999"):
            out_path = tmp_path / f"sweep-{seed}.csv"
            code, out = run(capsys, "bench", "--config", str(config), "--out", str(out_path),
                            "--seed", seed)
            assert code == EXIT_OK
            assert json.loads(out)["seed"] == int(seed)
            rows = list(csv.DictReader(StringIO(out_path.read_text())))
            assert {row["seed"] for row in rows} == {seed}
            outputs[seed] = [row["estimate"] for row in rows]
        assert outputs["5"] != outputs["999"]

    def test_mom_optimized_mean(self, capsys):
        code, out = run(capsys, "mom", "--m", "3", "--dim", "2", "--r", "3", "--batches", "2",
                        "--optimize", "--select-r", "3", "--estimator", "mean")
        rows = list(csv.DictReader(StringIO(out)))
        assert code == EXIT_OK
        assert {row["design"] for row in rows} == {"hrd-opt"}

    def test_mom_optimized_needs_base_two_closed_form(self, capsys):
        code, _ = run(capsys, "mom", "--m", "2", "--base", "3", "--r", "1", "--optimize")
        assert code == EXIT_RUNTIME


class TestExitCodes:
    def test_help(self, capsys):
        code, out = run(capsys, "mom", "--help")
        assert code == EXIT_OK
        assert "--r-mode" in out

    def test_unknown_command(self, capsys):
        assert run(capsys, "plot")[0] == EXIT_USAGE

    def test_missing_required_flag(self, capsys):
        assert run(capsys, "gen")[0] == EXIT_USAGE

    def test_invalid_base(self, capsys):
        assert run(capsys, "gen", "--m", "2", "--base", "4")[0] == EXIT_RUNTIME

    def test_bench_without_config(self, capsys):
        assert run(capsys, "bench")[0] == EXIT_RUNTIME

    def test_version(self, capsys):
        code, out = run(capsys, "--version")
        assert code == EXIT_OK
        assert sobol_table_checksum() in out


def test_only_the_entry_point_is_executable():
    package = Path(__file__).resolve().parents[1] / "hankelnet"
    scripts = [path.name for path in package.glob("*.py") if path.read_text().startswith("#!")]
    assert set(scripts) <= {"__main__.py"}
