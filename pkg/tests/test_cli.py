import json

import numpy as np
from scipy.integrate import trapezoid
import pytest

from conftest import PLOT55
from difit import distributions as dist
from difit.cli import run
from difit.growth import fit_growth
from difit.io import load_dbh_pairs, to_jsonable


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fit_growth_is_a_thin_adapter(capsys):
    code, out, _ = call(capsys, "fit-growth", "--data", str(PLOT55), "--plot", "55",
                        "--starts", "18,0.0005,2")
    assert code == 0
    rep = json.loads(out)
    h, d = load_dbh_pairs(PLOT55, 55)
    fit = fit_growth(h, d, "weibull", (18, 0.0005, 2))
    assert rep["summary"] == to_jsonable(fit.summary())
    assert rep["input"]["n"] == 58
    assert rep["command"] == "fit-growth"


def test_fit_weibull_on_sample(tmp_path, capsys):
    p = tmp_path / "x.csv"
    x = dist.sample("weibull", (2.0, 10.0, 3.0), 200, 0)
    p.write_text("\n".join(f"{v:.6f}" for v in x) + "\n")
    code, out, _ = call(capsys, "fit-weibull", "--data", str(p), "--three-param",
                        "--method", "mps", "--starts", "2,10,2")
    assert code == 0
    rep = json.loads(out)
    assert rep["method"] == "mps" and rep["estimate"]["mu"] < x.min()


def test_mixture_pdf_at_zero(capsys):
    code, out, _ = call(capsys, "mixture", "pdf", "--family", "weibull", "--k", "1",
                        "--params", "1,1,2", "--x", "0")
    assert code == 0 and json.loads(out)["pdf"] == [0.5]


def test_mixture_layout_error_is_usage(capsys):
    code, out, _ = call(capsys, "mixture", "pdf", "--family", "weibull", "--k", "1",
                        "--params", "1,0.5,2,0", "--x", "0")
    assert code == 2
    assert json.loads(out)["error"]["type"] == "ParameterError"


def test_tabulate_single_point(capsys):
    code, out, _ = call(capsys, "tabulate", "--family", "weibull", "--params", "1,2,0",
                        "--min", "0", "--max", "0", "--points", "1")
    assert code == 0 and out == "0,0.5\n"


def test_tabulate_integrates_to_one(capsys):
    code, out, _ = call(capsys, "tabulate", "--family", "gamma", "--params", "3,2",
                        "--min", "0", "--max", "80", "--points", "4001")
    rows = np.array([[float(v) for v in line.split(",")] for line in out.splitlines()])
    assert code == 0 and rows.shape == (4001, 2)
    assert trapezoid(rows[:, 1], rows[:, 0]) == pytest.approx(1.0, abs=1e-3)


def test_tabulate_rejects_empty_grid(capsys):
    code, _, _ = call(capsys, "tabulate", "--family", "gamma", "--params", "3,2",
                      "--min", "5", "--max", "1")
    assert code == 2


def test_simulate_is_deterministic(tmp_path, capsys):
    args = ["simulate", "--family", "birnbaum-saunders", "--k", "3",
            "--params", "0.4,0.3,0.3,0.1,0.25,0.5,8,5,2", "--n", "500", "--seed", "7"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _, ra, _ = call(capsys, *args, "--output", str(a))
    _, rb, _ = call(capsys, *args, "--output", str(b))
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 500
    assert json.loads(ra)["config"]["seed"] == 7


def test_seed_falls_back_to_environment(monkeypatch, capsys):
    monkeypatch.setenv("DIFIT_SEED", "11")
    _, out, _ = call(capsys, "gsm", "sample", "--omega", "0.5,0.5", "--beta", "1", "--n", "3")
    assert json.loads(out)["config"]["seed"] == 11
    monkeypatch.delenv("DIFIT_SEED")
    _, out, _ = call(capsys, "gsm", "sample", "--omega", "0.5,0.5", "--beta", "1", "--n", "3")
    assert json.loads(out)["config"]["seed"] == 0


def test_gsm_flags(capsys):
    _, out, _ = call(capsys, "gsm", "cdf", "--omega", "1", "--beta", "0.5", "--x", "2",
                     "--upper-tail", "--log-p")
    assert json.loads(out)["cdf"][0] == pytest.approx(-1.0)


def test_bayes_report_is_byte_identical(tmp_path, capsys):
    p = tmp_path / "x.csv"
    x = dist.sample("weibull", (2.0, 10.0, 3.0), 100, 0)
    p.write_text("\n".join(f"{v:.6f}" for v in x) + "\n")
    args = ["fit-bayes-weibull", "--data", str(p), "--n-simul", "600", "--n-burn", "300",
            "--seed", "4", "--trace", str(tmp_path / "t.csv")]
    _, a, _ = call(capsys, *args)
    ta = (tmp_path / "t.csv").read_bytes()
    _, b, _ = call(capsys, *args)
    assert a == b and ta == (tmp_path / "t.csv").read_bytes()
    assert ta.decode().splitlines()[0] == "iteration,alpha,beta,mu"


def test_grouped_from_raw(tmp_path, capsys):
    p = tmp_path / "x.csv"
    x = dist.sample("weibull", (2.0, 10.0, 3.0), 300, 0)
    p.write_text("\n".join(f"{v:.6f}" for v in x) + "\n")
    code, out, _ = call(capsys, "fit-grouped", "--data", str(p), "--classes", "8",
                        "--family", "bs")
    assert code == 0
    rep = json.loads(out)
    assert rep["input"]["n"] == 300 and rep["input"]["m"] == 8


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = call(capsys, "fit-gsm", "--bogus")
    assert code == 2 and "usage" in err


def test_missing_plot_is_reported(capsys):
    code, out, _ = call(capsys, "fit-weibull", "--data", str(PLOT55), "--plot", "72")
    assert code == 2
    assert "plot 72 not found" in json.loads(out)["error"]["message"]


def test_numerical_failure_exit_code(tmp_path, capsys):
    p = tmp_path / "x.csv"
    p.write_text("\n".join(["1.0"] * 30 + [str(v) for v in np.linspace(2, 20, 20)]) + "\n")
    code, out, _ = call(capsys, "fit-mixture", "--data", str(p), "--family", "log-normal",
                        "--k", "2")
    assert code == 1
    assert json.loads(out)["error"]["type"] == "EstimationError"
