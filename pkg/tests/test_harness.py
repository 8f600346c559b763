import json

import pytest

from lpgreedy import RunReport
from lpgreedy.harness import (CSV_HEADER, ExperimentConfig, emit_csv, execute,
                              main, parse_dict_spec, parse_errors, parse_space,
                              parse_target_spec, parse_weakness, summarize)

RUN_ARGS = ["run", "--algo", "wcga", "--space", "lp:p=2,n=8",
            "--dict", "random_gauss,N=24,seed=7", "--target", "a1,k=3,seed=3",
            "--weakness", "const:1.0", "--iters", "10"]


def small_config(**overrides):
    base = dict(space="lp:p=2,n=8", dict_spec="dict:random_gauss,N=24,seed=7",
                target="target:a1,k=3,seed=3", algorithm="wcga", max_m=10)
    base.update(overrides)
    return ExperimentConfig(**base)


class TestSpecParsing:
    def test_space_round_trip(self):
        s = parse_space("lp:p=2.5,n=16")
        assert s.p == 2.5 and s.n == 16
        assert parse_space(s.spec_string()).p == 2.5
        assert parse_space("p=3,n=4").p == 3.0  # tag optional

    def test_space_rejects_p_one(self):
        with pytest.raises(ValueError, match="not uniformly smooth"):
            parse_space("lp:p=1,n=8")

    def test_dict_spec(self):
        assert parse_dict_spec("dict:random_gauss,N=256,seed=7") == \
            ("random_gauss", 256, 7)
        assert parse_dict_spec("canonical,N=8,seed=0") == ("canonical", 8, 0)

    def test_target_specs(self):
        t = parse_target_spec("target:a1,k=16,seed=3")
        assert t.mode == "a1_sparse" and t.k == 16 and t.seed == 3
        t = parse_target_spec("a1dense,seed=2")
        assert t.mode == "a1_dense"
        t = parse_target_spec("target:noisy,k=4,eps=0.05,seed=1")
        assert t.mode == "general_plus_noise" and t.eps == 0.05

    def test_weakness_specs(self):
        assert parse_weakness("const:0.5").value(9) == 0.5
        tau = parse_weakness("pow:1.0,0.5")
        assert tau.value(4) == pytest.approx(0.5)
        tau = parse_weakness("list:1,0.5,0.25")
        assert tau.value(2) == 0.5
        with pytest.raises(ValueError):
            parse_weakness("geometric:0.5")

    def test_error_specs(self):
        errs = parse_errors("err:delta=pow:0.1,1.1,eta=const:0.05,eps=derived,seed=5")
        assert errs.delta.kind == "pow" and errs.delta.c == 0.1
        assert errs.delta.a == 1.1
        assert errs.eta.c == 0.05
        assert errs.eps_mode == "derived" and errs.seed == 5
        errs = parse_errors("delta=prop72auto,eta=prop72auto,eps=list:0.5,0.1")
        assert errs.eps_mode == "list" and errs.eps_values == (0.5, 0.1)

    def test_config_round_trip(self):
        cfg = small_config(weakness="pow:1.0,0.25", stop_tol=1e-10)
        assert ExperimentConfig.parse(cfg.serialize()) == cfg

    def test_config_validation(self):
        with pytest.raises(ValueError, match="unknown algorithm"):
            small_config(algorithm="omp").validate()
        with pytest.raises(ValueError, match="apply to"):
            small_config(errors="err:delta=const:0,eta=const:0,eps=derived"
                         ).validate()
        with pytest.raises(ValueError, match="rule"):
            small_config(rule="random").validate()


class TestEmitCsv:
    def test_header_and_rows(self, tmp_path):
        rep = execute(small_config(max_m=2, stop_tol=0.0))
        out = tmp_path / "toy.csv"
        emit_csv(rep, out)
        lines = out.read_text().strip().split("\n")
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        assert all(len(line.split(",")) == 13 for line in lines)

    def test_exact_class_zero_error_columns(self, tmp_path):
        rep = execute(small_config())
        out = tmp_path / "r.csv"
        emit_csv(rep, out)
        for line in out.read_text().strip().split("\n")[1:]:
            cols = line.split(",")
            assert cols[8] == "0" and cols[9] == "0" and cols[10] == "0"

    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(execute(small_config()), a)
        emit_csv(execute(small_config()), b)
        assert a.read_bytes() == b.read_bytes()

    def test_residual_below_bound_column(self, tmp_path):
        rep = execute(small_config(algorithm="rwrga", max_m=8))
        out = tmp_path / "r.csv"
        emit_csv(rep, out)
        for line in out.read_text().strip().split("\n")[1:]:
            cols = line.split(",")
            assert float(cols[2]) <= float(cols[11]) + 1e-9


class TestCli:
    def test_run_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        rc = main(RUN_ARGS + ["--out", str(out)])
        assert rc == 0
        assert out.exists() and out.with_suffix(".json").exists()
        rep = RunReport.from_json(out.with_suffix(".json").read_text())
        assert rep.algorithm == "wcga"
        assert "termination" in capsys.readouterr().out

    def test_run_rejects_non_smooth_space(self, tmp_path, capsys):
        args = list(RUN_ARGS)
        args[args.index("lp:p=2,n=8")] = "lp:p=1,n=8"
        rc = main(args + ["--out", str(tmp_path / "r.csv")])
        assert rc == 2
        assert "not uniformly smooth" in capsys.readouterr().err

    def test_audit_passes_on_good_report(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        main(RUN_ARGS + ["--out", str(out)])
        rc = main(["audit", str(out.with_suffix(".json")),
                   "--bound", "cor52", "--bound", "thm52"])
        assert rc == 0
        text = capsys.readouterr().out
        assert "conditions PASS" in text and "tightness" in text

    def test_audit_fails_on_tampered_report(self, tmp_path, capsys):
        out = tmp_path / "r.csv"
        main(RUN_ARGS + ["--out", str(out)])
        blob = json.loads(out.with_suffix(".json").read_text())
        blob["records"][0]["gs_lhs"] = blob["records"][0]["gs_rhs"] - 0.5
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(blob))
        rc = main(["audit", str(bad)])
        assert rc == 1
        assert "FAIL" in capsys.readouterr().out

    def test_audit_missing_file(self, capsys):
        rc = main(["audit", "/nonexistent/report.json"])
        assert rc == 2

    def test_awbga_run_via_cli(self, tmp_path):
        out = tmp_path / "a.csv"
        rc = main(["run", "--algo", "arwrga", "--space", "lp:p=2,n=8",
                   "--dict", "random_gauss,N=24,seed=7",
                   "--target", "a1,k=3,seed=3",
                   "--errors", "err:delta=pow:0.1,1.1,eta=pow:0.1,1.1,eps=derived",
                   "--iters", "10", "--out", str(out)])
        assert rc == 0
        rep = RunReport.from_json(out.with_suffix(".json").read_text())
        assert rep.errors is not None
        assert rep.records[0].delta_m > 0

    def test_out_dir_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LPGREEDY_OUT_DIR", str(tmp_path / "rooted"))
        rc = main(RUN_ARGS + ["--out", "sub/r.csv"])
        assert rc == 0
        assert (tmp_path / "rooted" / "sub" / "r.csv").exists()
        assert (tmp_path / "rooted" / "sub" / "r.json").exists()

    def test_sweep_writes_cross_product(self, tmp_path, capsys):
        rc = main(["sweep", "--algos", "wcga,rwrga", "--seeds", "1,2",
                   "--space", "lp:p=2,n=8", "--dict", "random_gauss,N=24,seed=7",
                   "--target", "a1,k=3,seed=0", "--iters", "8",
                   "--out-dir", str(tmp_path / "sweep")])
        assert rc == 0
        files = sorted(p.name for p in (tmp_path / "sweep").glob("*.csv"))
        assert files == ["rwrga_k3_s1.csv", "rwrga_k3_s2.csv",
                         "wcga_k3_s1.csv", "wcga_k3_s2.csv"]
        text = capsys.readouterr().out
        assert "wcga" in text and "rwrga" in text


class TestSummarize:
    def test_single_report(self):
        rep = execute(small_config(algorithm="rwrga", max_m=12))
        table = summarize([rep])
        assert len(table.strip().split("\n")) == 2
        assert "rwrga" in table

    def test_one_row_per_algorithm(self):
        reps = [execute(small_config(algorithm=a, max_m=6))
                for a in ("wcga", "rwrga", "wgafr")]
        table = summarize(reps)
        assert len(table.strip().split("\n")) == 4

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([])
