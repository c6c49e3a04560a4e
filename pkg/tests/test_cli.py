import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from bilevel_ggm import io
from bilevel_ggm.cli import RunConfig, load_config, run
from bilevel_ggm.errors import InvalidConfig
from bilevel_ggm.glasso import GlassoOptions, glasso_fit

SMALL = {"p": 8, "K": 3, "n": 40, "rho_diff": 0.2, "seed": 7}


def write_config(path, **entries):
    path.write_text(json.dumps(entries))
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def sim_dir(tmp_path):
    cfg = write_config(tmp_path / "sim.json", scenario=SMALL)
    out = tmp_path / "sim"
    assert run(["simulate", "--config", cfg, "--output", str(out)]) == 0
    return out


def test_simulate_default_scenario(tmp_path):
    cfg = write_config(tmp_path / "c.json", scenario={"seed": 1})
    assert run(["simulate", "--config", cfg, "--output", str(tmp_path / "o")]) == 0
    files = io.indexed_files(tmp_path / "o", r"subject_(\d+)\.csv")
    assert len(files) == 8
    for f in files:
        assert io.read_matrix(f).shape == (50, 100)
    manifest = io.read_json(tmp_path / "o" / "manifest.json")
    assert manifest["scenario"]["seed"] == 1
    assert manifest["scenario"]["p"] == 100


def test_simulate_rerun_byte_identical(tmp_path, sim_dir):
    again = tmp_path / "again"
    assert run(["simulate", "--config", str(tmp_path / "sim.json"), "--output", str(again)]) == 0
    for f in sim_dir.iterdir():
        assert (again / f.name).read_bytes() == f.read_bytes()
    # the manifest alone reproduces the outputs
    third = tmp_path / "third"
    assert run(["simulate", "--config", str(sim_dir / "manifest.json"),
                "--output", str(third)]) == 0
    for f in sim_dir.glob("*.csv"):
        assert (third / f.name).read_bytes() == f.read_bytes()


def test_simulate_rho_zero_edges_match_group(tmp_path):
    cfg = write_config(tmp_path / "c.json", scenario=dict(SMALL, rho_diff=0.0))
    run(["simulate", "--config", cfg, "--output", str(tmp_path / "o")])
    group = (tmp_path / "o" / "truth_group_edges.csv").read_bytes()
    for k in range(3):
        assert (tmp_path / "o" / f"truth_subject_{k}_edges.csv").read_bytes() == group


def test_fit_lambda2_zero_matches_glasso_subcommand(tmp_path, sim_dir):
    cfg = write_config(tmp_path / "fit.json", **{"lambda": [0.2, 0.0, 0.0],
                                                 "solver": {"glasso_tol": 1e-10,
                                                            "glasso_max_iter": 1000}})
    assert run(["fit", "--config", cfg, "--data", str(sim_dir),
                "--output", str(tmp_path / "fit")]) == 0
    report = io.read_json(tmp_path / "fit" / "fit_report.json")
    assert report["group_estimated"] is False
    tr = np.array(report["objective_trace"])
    assert np.all(np.diff(tr) <= 1e-8 * np.abs(tr[:-1]))
    for key in ("iterations", "converged", "kkt", "df", "bic1", "bic2"):
        assert key in report
    for k in range(3):
        gl = tmp_path / f"gl{k}"
        assert run(["glasso", "--input", str(sim_dir / f"subject_{k}.csv"), "--observations",
                    "--lambda", "0.2", "--tol", "1e-10", "--max-iter", "1000",
                    "--output", str(gl)]) == 0
        np.testing.assert_allclose(io.read_matrix(tmp_path / "fit" / f"omega_{k}.csv"),
                                   io.read_matrix(gl / "omega.csv"), atol=1e-6)


def test_glasso_subcommand_on_covariance(tmp_path):
    S = np.array([[1.0, 0.6], [0.6, 1.0]])
    io.write_matrix(tmp_path / "S.csv", S)
    assert run(["glasso", "--input", str(tmp_path / "S.csv"), "--lambda", "0.2",
                "--tol", "1e-10", "--output", str(tmp_path / "g")]) == 0
    expected, _ = glasso_fit(S, 0.2, GlassoOptions(tol=1e-10, max_iter=100))
    np.testing.assert_array_equal(io.read_matrix(tmp_path / "g" / "omega.csv"), expected)
    assert (tmp_path / "g" / "edges.csv").read_text() == "j,jp\n0,1\n"


def test_single_point_tune_equals_fit(tmp_path, sim_dir):
    lam = [0.15, 1.0, 0.2]
    fit_cfg = write_config(tmp_path / "f.json", **{"lambda": lam})
    tune_cfg = write_config(tmp_path / "t.json",
                            grid={"lambda1": [lam[0]], "lambda2": [lam[1]], "lambda3": [lam[2]]})
    run(["fit", "--config", fit_cfg, "--data", str(sim_dir), "--output", str(tmp_path / "f")])
    run(["tune", "--config", tune_cfg, "--data", str(sim_dir), "--output", str(tmp_path / "t")])
    for name in ["omega0.csv", "edges_group.csv"] + [f"omega_{k}.csv" for k in range(3)]:
        assert (tmp_path / "f" / name).read_bytes() == (tmp_path / "t" / name).read_bytes()
    rows = read_rows(tmp_path / "t" / "tune_table.csv")
    assert len(rows) == 1


def test_tune_table_rows_and_best(tmp_path, sim_dir):
    grid = {"lambda1": [0.1, 0.3], "lambda2": [0.0, 1.0], "lambda3": [0.0, 0.2]}
    cfg = write_config(tmp_path / "t.json", grid=grid)
    assert run(["tune", "--config", cfg, "--data", str(sim_dir),
                "--output", str(tmp_path / "t")]) == 0
    rows = read_rows(tmp_path / "t" / "tune_table.csv")
    assert len(rows) == 6  # (lambda2=0, lambda3=0.2) is infeasible
    assert list(rows[0]) == ["lambda1", "lambda2", "lambda3", "bic", "df", "converged"]
    report = io.read_json(tmp_path / "t" / "fit_report.json")
    conv = [float(r["bic"]) for r in rows if r["converged"] == "true"]
    assert report["selected_bic"] == min(conv)
    assert report["bic2"] == report["selected_bic"]


def test_evaluate_truth_against_itself(tmp_path, sim_dir):
    fit = tmp_path / "fit"
    fit.mkdir()
    (fit / "omega0.csv").write_bytes((sim_dir / "truth_group_precision.csv").read_bytes())
    for k in range(3):
        (fit / f"omega_{k}.csv").write_bytes(
            (sim_dir / f"truth_subject_{k}_precision.csv").read_bytes())
    assert run(["evaluate", "--fit", str(fit), "--truth", str(sim_dir)]) == 0
    rows = read_rows(fit / "metrics.csv")
    assert [r["method"] for r in rows] == ["rcm", "majority_vote"]
    rcm = rows[0]
    assert float(rcm["ITPR"]) == float(rcm["GTPR"]) == 1.0
    assert float(rcm["IFPR"]) == float(rcm["GFPR"]) == 0.0
    assert float(rcm["Frobenius"]) == float(rcm["L1norm"]) == 0.0
    assert rcm["BIC"] == ""


def test_evaluate_empty_networks(tmp_path, sim_dir):
    fit = tmp_path / "fit"
    fit.mkdir()
    for name in ["omega0.csv"] + [f"omega_{k}.csv" for k in range(3)]:
        io.write_matrix(fit / name, np.eye(8))
    assert run(["evaluate", "--fit", str(fit), "--truth", str(sim_dir),
                "--offdiag-only-norms"]) == 0
    for r in read_rows(fit / "metrics.csv"):
        assert float(r["ITPR"]) == float(r["IFPR"]) == 0.0
        assert float(r["GTPR"]) == float(r["GFPR"]) == 0.0


def test_exit_codes(tmp_path, sim_dir, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)  # default output_dir lands here
    bad = write_config(tmp_path / "bad.json", colour="red")
    assert run(["simulate", "--config", bad]) == 2
    both = write_config(tmp_path / "both.json", **{"lambda": [0.1, 1, 0],
                                                   "grid": {"lambda1": [0.1], "lambda2": [1],
                                                            "lambda3": [0]}})
    assert run(["fit", "--config", both, "--data", str(sim_dir)]) == 2
    neg = write_config(tmp_path / "neg.json", **{"lambda": [-0.1, 1, 0]})
    assert run(["fit", "--config", neg, "--data", str(sim_dir)]) == 2
    assert run(["glasso", "--input", str(sim_dir / "subject_0.csv"), "--lambda", "-1"]) == 2
    ok = write_config(tmp_path / "ok.json", **{"lambda": [0.1, 1, 0]})
    assert run(["fit", "--config", ok, "--data", str(tmp_path / "missing"),
                "--output", str(tmp_path / "never")]) == 3
    assert not (tmp_path / "never").exists()
    assert run(["evaluate", "--fit", str(sim_dir), "--truth", str(tmp_path)]) == 3
    slow = write_config(tmp_path / "slow.json", **{"lambda": [0.05, 1, 0.1],
                                                   "solver": {"max_bcd_iter": 1,
                                                              "bcd_tol": 1e-12}})
    out = str(tmp_path / "slow")
    assert run(["fit", "--config", slow, "--data", str(sim_dir), "--output", out]) == 0
    assert run(["fit", "--config", slow, "--data", str(sim_dir), "--output", out,
                "--strict"]) == 4
    assert "did not converge" in capsys.readouterr().err


def test_threads_env_override(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "c.json", threads=2)
    assert load_config(cfg).threads == 2
    monkeypatch.setenv("BILEVEL_GGM_THREADS", "8")
    assert load_config(cfg).threads == 8
    monkeypatch.setenv("BILEVEL_GGM_THREADS", "many")
    with pytest.raises(InvalidConfig):
        load_config(cfg)


def test_threads_do_not_change_outputs(tmp_path, sim_dir, monkeypatch):
    grid = {"lambda1": [0.1, 0.3], "lambda2": [0.5, 2.0], "lambda3": [0.0, 0.2]}
    cfg = write_config(tmp_path / "t.json", grid=grid)
    for threads in ("1", "8"):
        monkeypatch.setenv("BILEVEL_GGM_THREADS", threads)
        run(["tune", "--config", cfg, "--data", str(sim_dir), "--output", str(tmp_path / threads)])
    for f in (tmp_path / "1").iterdir():
        assert (tmp_path / "8" / f.name).read_bytes() == f.read_bytes()


def test_config_round_trip():
    d = {"scenario": dict(SMALL), "lambda": [0.1, 1.0, 0.0], "criterion": "bic1",
         "solver": {"bcd_tol": 1e-5}, "threads": 3}
    cfg = RunConfig.from_dict(d)
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.rcm_options().bcd_tol == 1e-5
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({"solver": {"speed": 11}})
    with pytest.raises(InvalidConfig):
        RunConfig.from_dict({"criterion": "aic"})


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bilevel_ggm", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
