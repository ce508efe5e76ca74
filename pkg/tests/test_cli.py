"""End-to-end command behavior: outputs, manifests, determinism, exit codes."""

import numpy as np

from sgnn.cli import main
from sgnn.trainer import CSV_HEADER


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _train_args(out_dir, extra=()):
    return ["train", "--synthetic", "sbm:2x40", "--epochs", "20",
            "--seed", "3", "--out", str(out_dir), *extra]


class TestTrainCommand:
    def test_writes_csv_and_manifest(self, tmp_path, capsys):
        code, out, _ = _run(_train_args(tmp_path / "r"), capsys)
        assert code == 0
        csv_path = tmp_path / "r" / "run.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 21  # header + one row per epoch
        manifest = (tmp_path / "r" / "manifest.txt").read_text()
        assert "reg.kind=none" in manifest
        assert "data.checksum=" in manifest
        assert "val=" in out and "test=" in out

    def test_schedule_row_count_with_cadence(self, tmp_path, capsys):
        code, _, _ = _run(_train_args(tmp_path / "r", ["--eval-every", "7"]),
                          capsys)
        assert code == 0
        lines = (tmp_path / "r" / "run.csv").read_text().splitlines()
        assert len(lines) - 1 == 3  # steps 7, 14, 20

    def test_repeat_is_byte_identical(self, tmp_path, capsys):
        _run(_train_args(tmp_path / "a"), capsys)
        _run(_train_args(tmp_path / "b"), capsys)
        assert ((tmp_path / "a" / "run.csv").read_bytes()
                == (tmp_path / "b" / "run.csv").read_bytes())

    def test_reproduce_from_manifest(self, tmp_path, capsys):
        _run(_train_args(tmp_path / "orig", ["--reg", "sgnn", "--lambda",
                                             "1.0", "--tcut", "0.7"]), capsys)
        code, _, _ = _run(["reproduce", "--manifest",
                           str(tmp_path / "orig" / "manifest.txt"),
                           "--out", str(tmp_path / "again")], capsys)
        assert code == 0
        assert ((tmp_path / "orig" / "run.csv").read_bytes()
                == (tmp_path / "again" / "run.csv").read_bytes())

    def test_dynamic_regime_runs(self, tmp_path, capsys):
        code, _, _ = _run(_train_args(
            tmp_path / "dyn", ["--regime", "poisson_dynamic", "--total-time",
                               "10", "--dt", "0.5", "--lambda", "2.0"]), capsys)
        assert code == 0
        lines = (tmp_path / "dyn" / "run.csv").read_text().splitlines()
        assert len(lines) - 1 == 20

    def test_timing_flag_records_wall_clock(self, tmp_path, capsys):
        _run(_train_args(tmp_path / "t", ["--timing"]), capsys)
        rows = (tmp_path / "t" / "run.csv").read_text().splitlines()[1:]
        ms = [float(r.split(",")[-1]) for r in rows]
        assert any(v > 0.0 for v in ms)

    def test_synthetic_baseline_reaches_high_accuracy(self, tmp_path, capsys):
        code, _, _ = _run(["train", "--synthetic", "sbm:3x100", "--reg", "none",
                           "--out", str(tmp_path / "full")], capsys)
        assert code == 0
        final = (tmp_path / "full" / "run.csv").read_text().splitlines()[-1]
        assert float(final.split(",")[4]) > 0.9  # test_acc column


class TestCompareCommand:
    def test_four_method_table_and_determinism(self, tmp_path, capsys):
        args = ["compare", "--synthetic", "sbm:2x40", "--epochs", "15",
                "--seeds", "1,2", "--out", str(tmp_path / "c1")]
        code, out, _ = _run(args, capsys)
        assert code == 0
        table = (tmp_path / "c1" / "compare.csv").read_text().splitlines()
        assert table[0] == "method,val_mean,val_std,test_mean,test_std"
        assert [row.split(",")[0] for row in table[1:]] == [
            "dropout", "drop_edge", "drop_node", "sgnn"]
        for row in table[1:]:
            cells = row.split(",")
            assert all(0.0 <= float(c) <= 1.0 for c in cells[1:])
        args2 = [*args[:-1], str(tmp_path / "c2")]
        _run(args2, capsys)
        assert ((tmp_path / "c1" / "compare.csv").read_bytes()
                == (tmp_path / "c2" / "compare.csv").read_bytes())


class TestSweepCommand:
    def test_grid_cardinality(self, tmp_path, capsys):
        code, out, _ = _run(
            ["sweep", "--synthetic", "sbm:2x40", "--epochs", "10",
             "--grid", "lambda=0.5,1,2 tcut=0.3,0.7,1.0", "--seeds", "1,2",
             "--out", str(tmp_path / "s")], capsys)
        assert code == 0
        lines = (tmp_path / "s" / "sweep.csv").read_text().splitlines()
        assert lines[0] == "lambda,seed,tcut,val_acc,test_acc,mean_active_frac".replace(
            "lambda,seed,tcut", "lambda,tcut,seed")
        assert len(lines) - 1 == 18
        assert "best by val:" in out

    def test_ln2_point_has_half_active_fraction(self, tmp_path, capsys):
        ln2 = float(np.log(2.0))
        code, _, _ = _run(
            ["sweep", "--synthetic", "sbm:3x100", "--epochs", "30",
             "--grid", f"lambda=1.0 tcut={ln2}", "--seeds", "1",
             "--out", str(tmp_path / "s")], capsys)
        assert code == 0
        row = (tmp_path / "s" / "sweep.csv").read_text().splitlines()[1]
        active = float(row.split(",")[-1])
        assert abs(active - 0.5) < 0.05

    def test_degenerate_grid_equals_train(self, tmp_path, capsys):
        _run(["sweep", "--synthetic", "sbm:2x40", "--epochs", "20",
              "--reg", "sgnn", "--grid", "lambda=1.0", "--tcut", "0.7",
              "--seeds", "3", "--out", str(tmp_path / "s")], capsys)
        sweep_row = (tmp_path / "s" / "sweep.csv").read_text().splitlines()[1]
        _, _, val_acc, test_acc, _ = sweep_row.split(",")
        _run(_train_args(tmp_path / "t", ["--reg", "sgnn", "--lambda", "1.0",
                                          "--tcut", "0.7"]), capsys)
        final = (tmp_path / "t" / "run.csv").read_text().splitlines()[-1]
        cells = final.split(",")
        assert cells[3] == val_acc and cells[4] == test_acc

    def test_empty_grid_is_config_error(self, tmp_path, capsys):
        code, _, err = _run(["sweep", "--synthetic", "sbm:2x40",
                             "--out", str(tmp_path / "s")], capsys)
        assert code == 1
        assert "grid" in err

    def test_parallel_fanout_matches_serial(self, tmp_path, capsys, monkeypatch):
        args = ["sweep", "--synthetic", "sbm:2x40", "--epochs", "8",
                "--grid", "lambda=0.5,2.0", "--seeds", "1,2"]
        _run([*args, "--out", str(tmp_path / "serial")], capsys)
        monkeypatch.setenv("SGNN_THREADS", "4")
        _run([*args, "--out", str(tmp_path / "parallel")], capsys)
        assert ((tmp_path / "serial" / "sweep.csv").read_bytes()
                == (tmp_path / "parallel" / "sweep.csv").read_bytes())


class TestBenchCommand:
    def test_zero_size_no_crash(self, capsys):
        code, out, _ = _run(["bench-clocks", "--sizes", "0,1000,10000",
                             "--repeats", "1"], capsys)
        assert code == 0
        assert "N=         0" in out
        assert "fitted scaling exponent" in out

    def test_report_file(self, tmp_path, capsys):
        code, _, _ = _run(["bench-clocks", "--sizes", "1000,10000",
                           "--repeats", "1", "--out",
                           str(tmp_path / "bench.csv")], capsys)
        assert code == 0
        lines = (tmp_path / "bench.csv").read_text().splitlines()
        assert lines[0] == "size,seconds,per_node_ns"
        assert len(lines) == 3


class TestDataCommands:
    def test_gen_and_validate(self, tmp_path, capsys):
        path = tmp_path / "toy.graphtxt"
        code, out, _ = _run(["gen-sbm", "--blocks", "2", "--per-block", "30",
                             "--out", str(path)], capsys)
        assert code == 0 and "60 nodes" in out
        code, out, _ = _run(["validate-data", "--data", str(path)], capsys)
        assert code == 0
        assert "ok" in out and "60 nodes" in out

    def test_validate_rejects_corruption(self, tmp_path, capsys):
        path = tmp_path / "toy.graphtxt"
        _run(["gen-sbm", "--blocks", "2", "--per-block", "30",
              "--out", str(path)], capsys)
        body = path.read_text().replace("num_classes=2", "num_classes=9")
        path.write_text(body)
        code, _, err = _run(["validate-data", "--data", str(path)], capsys)
        assert code == 2
        assert "data error" in err


class TestExitCodes:
    def test_usage_error_is_one(self, capsys):
        code, _, err = _run(["train"], capsys)  # no data source
        assert code == 1
        assert "usage error" in err

    def test_unknown_flag_is_one(self, capsys):
        code, _, _ = _run(["train", "--what"], capsys)
        assert code == 1

    def test_missing_data_is_two(self, tmp_path, capsys):
        code, _, err = _run(["train", "--data", str(tmp_path / "nope.graphtxt"),
                             "--out", str(tmp_path / "o")], capsys)
        assert code == 2

    def test_numeric_fault_is_three(self, tmp_path, capsys):
        code, _, err = _run(_train_args(
            tmp_path / "blow", ["--lr", "1e308", "--epochs", "3"]), capsys)
        assert code == 3
        assert "numeric fault" in err

    def test_bad_config_is_one(self, tmp_path, capsys):
        code, _, err = _run(_train_args(
            tmp_path / "bad", ["--reg", "dropout", "--p", "1.5"]), capsys)
        assert code == 1
        assert "config error" in err
