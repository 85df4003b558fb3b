import json

import numpy as np
import pytest

from isolab import harness as h
from isolab.ensembles import GEN_TAGS, SCALE_TAGS
from isolab.errors import DegenerateMatrixError, IsolabError, ValidationError

TINY_ESN = {"n_nodes": 12, "period": 8, "repeats": 4, "nii_samples": 200}
TINY_CS = {"rows": 20, "cols": 50, "sparsity": 3, "rii_sparsity": 3, "rii_samples": 200, "nii_samples": 200}


def esn_cfg(**kw):
    kw.setdefault("esn", TINY_ESN)
    return h.build_config("esn-grid", **kw)


def cs_cfg(**kw):
    kw.setdefault("cs", TINY_CS)
    return h.build_config("cs-grid", **kw)


class TestConfig:
    def test_parse_file(self, tmp_path):
        p = tmp_path / "grid.cfg"
        p.write_text("# demo\nrng.seed = 42\nesn.methods = M1, M3\nesn.repetitions = 3\n"
                     "esn.noise_as_variance = yes\nesn.ridge_lambda = 0.01\ncs.cols = 400\n"
                     "out.dir = somewhere\nout.formats = csv\n")
        cfg = h.build_config("esn-grid", h.load_config_file(p))
        assert cfg.seed == 42 and cfg.methods == ("M1", "M3") and cfg.repetitions == 3
        assert cfg.esn.noise_as_variance is True and cfg.esn.ridge_lambda == 0.01
        assert cfg.cs.cols == 400 and cfg.out_dir == "somewhere" and cfg.formats == ("csv",)
        assert cfg.scalings == SCALE_TAGS

    def test_overrides_win(self):
        cfg = h.build_config("cs-grid", {"rng.seed": "1", "cs.repetitions": "5"}, seed=9, repetitions=None)
        assert cfg.seed == 9 and cfg.repetitions == 5
        assert cfg.scalings == ("R1", "R2", "R4")

    @pytest.mark.parametrize("text", ["foo = 1", "rng.seed = 1\nrng.seed = 2", "esn.nodes = 3",
                                      "xyz.a = 1", "rng.seed = abc", "noequals"])
    def test_rejects_bad_files(self, text):
        with pytest.raises(ValidationError):
            h.build_config("esn-grid", h.parse_config_text(text))

    def test_cs_rejects_square_only_rules(self):
        with pytest.raises(ValidationError):
            cs_cfg(scalings=("R3",))
        with pytest.raises(ValidationError):
            cs_cfg(scalings=("R4",), cs=dict(TINY_CS, table2_r4_as="R4strict"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            h.load_config_file(tmp_path / "none.cfg")


def test_seed_streams_pairwise_distinct():
    seen = set()
    for extra in range(3):
        for m in GEN_TAGS:
            for s in SCALE_TAGS:
                for rep in range(20):
                    for purpose in range(7):
                        seen.add(h.run_seed(5, m, s, rep, purpose, extra).stream)
    assert len(seen) == 3 * 5 * 5 * 20 * 7


class TestEsnGrid:
    def test_single_pair_single_rep(self):
        res = h.run_esn_grid(esn_cfg(methods=("M1",), scalings=("R1",), repetitions=1), threads=1)
        assert len(res.rows) == 1 and res.rows[0].reps == 1 and res.rows[0].failures == 0
        rec = res.records[0]
        assert rec["status"] == "ok" and 0 <= rec["acc"] <= 100 and rec["acc"] == rec["test_acc"]

    def test_full_grid_has_25_rows(self):
        res = h.run_esn_grid(esn_cfg(repetitions=1), threads=1)
        assert [(r.method, r.scaling) for r in res.rows] == [(m, s) for m in GEN_TAGS for s in SCALE_TAGS]

    def test_train_accuracy_switch(self):
        cfg = esn_cfg(methods=("M2",), scalings=("R3",), repetitions=1,
                      esn=dict(TINY_ESN, accuracy="train"))
        rec = h.run_esn_grid(cfg, threads=1).records[0]
        assert rec["acc"] == rec["train_acc"]

    def test_degenerate_runs_counted(self, monkeypatch):
        real = h.build

        def flaky(spec, rng=None):
            if spec.seed.stream == h.run_seed(0, "M1", "R1", 1, h.WEIGHTS).stream:
                raise DegenerateMatrixError("forced")
            return real(spec, rng)

        monkeypatch.setattr(h, "build", flaky)
        res = h.run_esn_grid(esn_cfg(methods=("M1",), scalings=("R1",), repetitions=3), threads=1)
        row = res.rows[0]
        assert (row.reps, row.failures) == (2, 1)
        ok = [r for r in res.records if r["status"] == "ok"]
        assert row.metrics["acc"][0] == float(np.mean([r["acc"] for r in ok]))

    def test_m1_r2_interval(self):
        cfg = h.build_config("esn-grid", methods=("M1",), scalings=("R2",), repetitions=2,
                             esn={"repeats": 2})
        row = h.run_esn_grid(cfg, threads=1).rows[0]
        assert row.a_mean == pytest.approx(0.81, abs=0.03) and row.b_mean == pytest.approx(1.19, abs=0.03)


class TestCsGrid:
    def test_r4_rows_use_r5(self):
        res = h.run_cs_grid(cs_cfg(methods=("M2",), scalings=("R4",), repetitions=1), threads=1)
        rec = res.records[0]
        assert rec["rule"] == "R5" and res.metadata["table2_r4_as"] == "R5"
        assert res.series["recovery_scatter"][0]["method"] == "M2"

    def test_noise_as_variance(self):
        std = h.run_cs_grid(cs_cfg(methods=("M2",), scalings=("R1",), repetitions=1), threads=1)
        var = h.run_cs_grid(cs_cfg(methods=("M2",), scalings=("R1",), repetitions=1,
                                   cs=dict(TINY_CS, noise_as_variance=True)), threads=1)
        assert var.records[0]["delta"] == pytest.approx(
            std.records[0]["delta"] * np.sqrt(0.05) / 0.05, rel=1e-12)


class TestIsometrySweep:
    def test_identity_interval(self):
        cfg = h.build_config("isometry-sweep", methods=("I",), repetitions=1,
                             sweep={"sizes": (10, 30), "samples": 100})
        res = h.run_isometry_sweep(cfg, threads=1)
        assert all(r.a_mean == r.b_mean == r.rho_mean == 1.0 for r in res.rows)

    def test_m1_r1_brackets_one(self):
        cfg = h.build_config("isometry-sweep", methods=("M1",), scalings=("R1",), repetitions=2,
                             sweep={"sizes": (50, 200), "samples": 2000})
        for row in h.run_isometry_sweep(cfg, threads=1).rows:
            assert row.a_mean < 1.0 < row.b_mean

    def test_m3_endpoints_grow_with_n(self):
        cfg = h.build_config("isometry-sweep", methods=("M3",), scalings=("R1",), repetitions=2,
                             sweep={"sizes": (50, 100, 200, 400), "samples": 2000})
        res = h.run_isometry_sweep(cfg, threads=1)
        a = [r.a_mean for r in res.rows]
        b = [r.b_mean for r in res.rows]
        assert a == sorted(a) and b == sorted(b)
        assert res.series["nii_vs_n"][0]["n"] == [50, 100, 200, 400]


class TestEmit:
    def test_header_only_and_one_row(self, tmp_path):
        empty = h.GridResult("cs-grid", [], [], h.CS_METRICS)
        h.emit_results(empty, tmp_path / "e")
        assert (tmp_path / "e" / "cs-grid.csv").read_text().splitlines() == [
            "method,scaling,rho_mean,rho_std,mse_mean,mse_std,a_mean,b_mean,reps,failures"]
        res = h.run_cs_grid(cs_cfg(methods=("M1",), scalings=("R1",), repetitions=1), threads=1)
        h.emit_results(res, tmp_path / "o")
        assert len((tmp_path / "o" / "cs-grid.csv").read_text().splitlines()) == 2

    def test_json_round_trip_and_consistency(self, tmp_path):
        res = h.run_esn_grid(esn_cfg(methods=("M1", "M5"), scalings=("R5",), repetitions=2), threads=1)
        h.emit_results(res, tmp_path)
        doc = json.loads((tmp_path / "esn-grid.json").read_text())
        assert doc["rows"] == [h.row_to_dict(r, res.metric_names) for r in res.rows]
        runs = json.loads((tmp_path / "esn-grid_runs.json").read_text())
        for row in doc["rows"]:
            mine = [r for r in runs if r["method"] == row["method"] and r["status"] == "ok"]
            assert row["sep_mean"] == float(np.mean([r["sep"] for r in mine]))
        csv_rows = h.read_csv_rows(tmp_path / "esn-grid.csv")
        assert float(csv_rows[0]["acc_mean"]) == doc["rows"][0]["acc_mean"]

    def test_consistency_check_catches_tampering(self):
        res = h.run_esn_grid(esn_cfg(methods=("M1",), scalings=("R1",), repetitions=2), threads=1)
        res.records[0]["acc"] += 1.0
        with pytest.raises(IsolabError):
            h.check_consistency(res)

    def test_unwritable_destination(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            h.emit_results(h.GridResult("cs-grid", [], [], h.CS_METRICS), blocker / "sub")


def test_parallel_output_identical(tmp_path):
    cfg = esn_cfg(methods=("M1", "M4"), scalings=("R1", "R2"), repetitions=2)
    for threads in (1, 3):
        h.emit_results(h.run_esn_grid(cfg, threads=threads), tmp_path / str(threads))
    for name in ("esn-grid.csv", "esn-grid.json", "esn-grid_runs.json"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "3" / name).read_bytes()


def test_thread_env(monkeypatch):
    monkeypatch.setenv(h.THREADS_ENV, "3")
    assert h.thread_count() == 3
    monkeypatch.setenv(h.THREADS_ENV, "zero")
    with pytest.raises(ValidationError):
        h.thread_count()
