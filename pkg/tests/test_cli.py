import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from gb3reg import __version__
from gb3reg.cli import CliError, GRID_POINTS, dumps, ingest_csv, main


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def cfr_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "cfr.csv"
    assert main(["sample", "--cfr-like", "--seed", "4", "--n", "305", "--out", str(path)]) == 0
    return str(path)


class TestIngest:
    def test_three_rows(self, tmp_path):
        p = write(tmp_path, "a.csv", "y,x\n0.2,1\n0.5,2\n0.9,3\n")
        ing = ingest_csv(p, "y")
        assert ing.dataset.n == 3 and ing.dataset.names == ("x",)
        assert len(ing.sha256) == 64

    def test_log_transform(self, tmp_path):
        p = write(tmp_path, "a.csv", "y,dens\n0.2,1\n0.5,2.718281828459045\n")
        ing = ingest_csv(p, "y", ["dens"])
        np.testing.assert_allclose(ing.dataset.column("dens"), [0.0, 1.0])

    @pytest.mark.parametrize("text,where", [
        ("", "a.csv"),
        ("y,x\n", "a.csv"),
        ("x,z\n1,2\n", "line 1"),
        ("y,x\n0.2,1\n0.3,abc\n", "line 3, column 'x'"),
        ("y,x\n0.2,1\n1.0,2\n", "line 3, column 'y'"),
        ("y,x\n0.2,1\n0.3\n", "line 3"),
        ("y,x\n0.2,nan\n", "line 2, column 'x'"),
    ])
    def test_errors_name_location(self, tmp_path, text, where):
        p = write(tmp_path, "a.csv", text)
        with pytest.raises(CliError) as info:
            ingest_csv(p, "y")
        assert where in info.value.location

    def test_log_of_non_positive(self, tmp_path):
        p = write(tmp_path, "a.csv", "y,d\n0.2,1\n0.3,0\n")
        with pytest.raises(CliError) as info:
            ingest_csv(p, "y", ["d"])
        assert info.value.location.endswith("line 3, column 'd'")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CliError):
            ingest_csv(tmp_path / "nope.csv", "y")


class TestFit:
    def test_multi_tau_reports(self, cfr_csv, capsys):
        taus = ["0.1", "0.25", "0.5", "0.75", "0.9"]
        argv = ["fit", "--input", cfr_csv, "--response", "cfr", "--log", "dens",
                "--workers", "1"]
        for t in taus:
            argv += ["--tau", t]
        code, out, _ = run(argv, capsys)
        assert code == 0
        rep = json.loads(out)
        assert rep["version"] == __version__
        assert [f["tau"] for f in rep["fits"]] == [float(t) for t in taus]
        assert rep["dataset"]["log_transformed"] == ["dens"]
        for f in rep["fits"]:
            assert len(f["coefficients"]) == 12
            assert {"converged", "iterations", "gradient_norm"} <= set(f["convergence"])
            assert {"ci90", "ci95", "ci99", "p_value", "z", "se"} <= set(f["coefficients"][0])

    def test_final_model_shape_has_seven_rows(self, cfr_csv, capsys, tmp_path):
        out_path = tmp_path / "fit.json"
        code, _, _ = run(["fit", "--input", cfr_csv, "--response", "cfr", "--log", "dens",
                          "--mu-terms", "dens,vaccine", "--alpha-terms", "dens,posit",
                          "--beta-terms", "", "--tau", "0.5", "--out", str(out_path)], capsys)
        assert code == 0
        f = json.loads(out_path.read_text())["fits"][0]
        labels = [(r["component"], r["term"]) for r in f["coefficients"]]
        assert labels == [("mu", "(Intercept)"), ("mu", "dens"), ("mu", "vaccine"),
                          ("alpha", "(Intercept)"), ("alpha", "dens"), ("alpha", "posit"),
                          ("beta", "(Intercept)")]
        assert f["convergence"]["converged"]
        kinds = {e["term"]: e for e in f["effects"] if e["component"] == "mu"}
        assert set(kinds) == {"dens", "vaccine"}

    def test_same_dataset_hash_across_runs(self, cfr_csv, capsys):
        argv = ["fit", "--input", cfr_csv, "--response", "cfr", "--mu-terms", "posit",
                "--alpha-terms", "", "--beta-terms", "", "--tau", "0.5"]
        _, a, _ = run(argv, capsys)
        _, b, _ = run(argv, capsys)
        assert a == b
        assert json.loads(a)["dataset"]["sha256"] == json.loads(b)["dataset"]["sha256"]


    def test_tolerance_overrides(self, cfr_csv, capsys):
        argv = ["fit", "--input", cfr_csv, "--response", "cfr", "--log", "dens",
                "--tau", "0.5", "--max-iter", "2"]
        code, out, _ = run(argv, capsys)
        assert code == 0
        conv = json.loads(out)["fits"][0]["convergence"]
        assert not conv["converged"] and conv["iterations"] <= 2
        code, _, err = run(argv[:-2] + ["--abs-tol", "-1"], capsys)
        assert code == 1 and json.loads(err)["location"] == "--abs-tol/--rel-tol/--max-iter"


class TestOtherCommands:
    def test_residuals(self, cfr_csv, capsys):
        code, out, _ = run(["residuals", "--input", cfr_csv, "--response", "cfr", "--log", "dens",
                            "--alpha-terms", "dens", "--beta-terms", "", "--tau", "0.5"],
                           capsys)
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["index", "residual", "theoretical", "sample"]
        assert len(rows) == 306

    def test_residuals_need_one_tau(self, cfr_csv, capsys):
        code, _, err = run(["residuals", "--input", cfr_csv, "--response", "cfr",
                            "--tau", "0.2", "--tau", "0.4"], capsys)
        assert code == 1 and json.loads(err)["location"] == "--tau"

    def test_select(self, cfr_csv, capsys):
        code, out, _ = run(["select", "--input", cfr_csv, "--response", "cfr", "--log", "dens",
                            "--mu-terms", "dens,vaccine", "--alpha-terms", "dens,posit",
                            "--beta-terms", "vaccine", "--tau", "0.5"], capsys)
        assert code == 0
        sel = json.loads(out)["selections"][0]
        assert sel["tau"] == 0.5 and "final_report" in sel
        removed = {(s["component"], s["term"]) for s in sel["steps"]}
        for comp, terms in sel["final_terms"].items():
            assert terms[0] == "(Intercept)"
            assert not removed & {(comp, t) for t in terms}
        assert all(s["p_value"] > 0.05 for s in sel["steps"])
        n_rows = sum(len(t) for t in sel["final_terms"].values())
        assert len(sel["final_report"]["coefficients"]) == n_rows

    def test_simulation_csv_single_header(self, capsys):
        code, out, _ = run(["simulate-recovery", "--reps", "2", "--n", "60", "--n", "80",
                            "--seed", "3", "--workers", "1"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert sum(1 for ln in lines if ln.startswith("parameter,")) == 1
        assert len(lines) == 1 + 2 * 8

    def test_simulate_links(self, capsys):
        code, out, _ = run(["simulate-links", "--reps", "1", "--n", "120", "--seed", "3",
                            "--workers", "1"], capsys)
        assert code == 0
        assert out.splitlines()[0].startswith("true_link,n,tau,criterion,logit,probit")

    def test_pdf_grid_integrates_to_one(self, capsys):
        code, out, _ = run(["pdf-grid"], capsys)
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        combos = {}
        for r in rows:
            combos.setdefault(r["combo"], []).append((float(r["y"]), float(r["density"])))
        assert len(combos) >= 3
        for pts in combos.values():
            assert len(pts) == GRID_POINTS
            y, d = map(np.array, zip(*pts))
            assert np.trapezoid(d, y) == pytest.approx(1.0, abs=1e-3)

    def test_pdf_grid_quantile_combo(self, capsys):
        code, out, _ = run(["pdf-grid", "--combo", "mu=0.3,alpha=2,beta=3", "--tau", "0.5"],
                           capsys)
        assert code == 0
        assert len(out.splitlines()) == GRID_POINTS + 1

    def test_sample_combo(self, capsys):
        code, out, _ = run(["sample", "--combo", "lam=2,alpha=2,beta=2", "--n", "50",
                            "--seed", "1"], capsys)
        assert code == 0
        ys = [float(v) for v in out.splitlines()[1:]]
        assert len(ys) == 50 and all(0 < v < 1 for v in ys)


class TestDeterminism:
    @pytest.mark.parametrize("argv", [
        ["sample", "--seed", "7", "--n", "40"],
        ["sample", "--cfr-like", "--seed", "7", "--n", "40"],
        ["simulate-recovery", "--reps", "2", "--n", "60", "--seed", "5", "--workers", "2"],
        ["pdf-grid"],
    ])
    def test_byte_identical(self, argv, capsys):
        _, a, _ = run(argv, capsys)
        _, b, _ = run(argv, capsys)
        assert a == b and a

    def test_dumps_is_stable_and_strict(self):
        s = dumps({"b": 0.1, "a": [float("nan"), float("inf"), 1e-300]})
        assert s == dumps({"b": 0.1, "a": [float("nan"), float("inf"), 1e-300]})
        assert json.loads(s)["a"] == [None, None, 1e-300]


class TestErrors:
    def test_usage_error_json(self, capsys):
        code, _, err = run(["fit", "--response", "y"], capsys)
        payload = json.loads(err)
        assert code == 2 and payload["error"] == "usage_error"
        assert payload["location"] == "command line"

    def test_unknown_covariate(self, tmp_path, capsys):
        p = write(tmp_path, "a.csv", "y,x\n0.2,1\n0.5,2\n0.9,3\n0.4,1\n0.3,5\n")
        code, _, err = run(["fit", "--input", p, "--response", "y", "--mu-terms", "z"], capsys)
        payload = json.loads(err)
        assert code == 1 and payload["location"] == "--mu-terms"

    def test_input_error_json(self, tmp_path, capsys):
        p = write(tmp_path, "a.csv", "y,x\n0.2,1\n1.5,2\n")
        code, _, err = run(["fit", "--input", p, "--response", "y"], capsys)
        payload = json.loads(err)
        assert code == 1 and payload["error"] == "input_error"
        assert payload["location"].endswith("line 3, column 'y'")

    @pytest.mark.parametrize("argv,loc", [
        (["pdf-grid", "--combo", "lam=1,alpha=2"], "--combo"),
        (["pdf-grid", "--combo", "lam=-1,alpha=2,beta=2"], "--combo lam=-1,alpha=2,beta=2"),
        (["simulate-recovery", "--n", "5"], "--n"),
    ])
    def test_locations(self, argv, loc, capsys):
        code, _, err = run(argv, capsys)
        assert code == 1 and json.loads(err)["location"] == loc

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "gb3reg", "--version"], capture_output=True,
                             text=True, check=True)
        assert __version__ in res.stdout
