import subprocess
import sys

from isolab import cli


def test_isometry_writes_files(tmp_path, capsys):
    code = cli.main(["isometry", "--method", "I,M3", "--n", "10,20", "--scaling", "R1,R2",
                     "--samples", "100", "--reps", "1", "--out", str(tmp_path)])
    assert code == 0
    lines = (tmp_path / "isometry-sweep.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 2 * 2
    assert "isometry-sweep.csv" in capsys.readouterr().out


def test_config_file_and_flags(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("rng.seed = 3\nesn.n_nodes = 10\nesn.period = 6\nesn.repeats = 3\n"
                   "esn.nii_samples = 50\nesn.repetitions = 4\n")
    code = cli.main(["esn-grid", "--config", str(cfg), "--methods", "M2", "--scalings", "R3",
                     "--reps", "1", "--train-acc", "--threads", "1", "--out", str(tmp_path / "o")])
    assert code == 0
    rows = (tmp_path / "o" / "esn-grid.csv").read_text().splitlines()
    assert rows[1].startswith("M2,R3,") and rows[1].endswith(",1,0")


def test_cs_flags(tmp_path):
    cfg = tmp_path / "cs.cfg"
    cfg.write_text("cs.rows = 15\ncs.cols = 30\ncs.sparsity = 2\ncs.rii_sparsity = 2\n"
                   "cs.rii_samples = 50\ncs.nii_samples = 50\n")
    code = cli.main(["cs-grid", "--config", str(cfg), "--methods", "M1", "--scalings", "R1,R4",
                     "--reps", "1", "--constraint", "residual", "--estimator", "dantzig",
                     "--noise-as-variance", "--table2-r4-as", "R5", "--threads", "1",
                     "--out", str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "cs-grid_series.json").exists()


def test_validation_exit_code(tmp_path, capsys):
    assert cli.main(["esn-grid", "--methods", "M9"]) == 1
    assert cli.main(["cs-grid", "--scalings", "R3"]) == 1
    assert cli.main(["esn-grid", "--config", str(tmp_path / "missing.cfg")]) == 1
    assert cli.main(["isometry", "--seed", "-4"]) == 1
    assert "error" in capsys.readouterr().err


def test_usage_error_exit_code():
    proc = subprocess.run([sys.executable, "-m", "isolab.cli", "bogus"], capture_output=True)
    assert proc.returncode == 1


def test_numerical_failure_exit_code(monkeypatch, tmp_path):
    from isolab import harness
    from isolab.errors import ConvergenceError

    def boom(cfg, threads=None):
        raise ConvergenceError("no convergence", 0.0)

    monkeypatch.setattr(harness, "run", boom)
    assert cli.main(["isometry", "--out", str(tmp_path)]) == 2
