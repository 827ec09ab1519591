import csv

import numpy as np
import pytest

from polyakagm import cli, rates
from polyakagm.cli import ExperimentConfig
from polyakagm.errors import ConfigError, DataError
from polyakagm.methods import RunTrace


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_config(tmp_path, body):
    p = tmp_path / "exp.cfg"
    p.write_text(body)
    return p


def test_parse_config_round_trip(tmp_path):
    cfg = cli.parse_config("""
        # comment
        problem = logistic
        methods = gd, agm
        dataset = d.csv
        reg = 0.01   # inline
        standardize = no
        """, base_dir=tmp_path)
    assert cfg.problem == "logistic" and cfg.methods == ("gd", "agm")
    assert cfg.dataset == str(tmp_path / "d.csv")
    assert cfg.reg == 0.01 and not cfg.standardize


@pytest.mark.parametrize("body", ["bogus = 1", "problem", "problem = cubic", "methods = gd, newton",
                                  "n = many", "standardize = maybe", "fstar = guess", "mu = 2"])
def test_config_errors(body):
    with pytest.raises(ConfigError):
        cli.parse_config(body)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        cli.load_config(tmp_path / "none.cfg")
    assert cli.main(["run", str(tmp_path / "none.cfg")]) == cli.EXIT_CONFIG


def test_run_writes_traces_and_summary(tmp_path):
    cfg = ExperimentConfig(problem="quadratic", n=20, mu=0.01, methods=("gd", "variant1", "agm", "acc-variant2"),
                           out_dir=str(tmp_path / "out"), max_iter=20_000)
    res = cli.run_experiment(cfg)
    summary = read_csv(tmp_path / "out" / "summary.csv")
    assert [r["method"] for r in summary] == list(cfg.methods)
    its = {r["method"]: int(r["iterations_to_tol"]) for r in summary}
    assert its["agm"] <= its["acc-variant2"] <= its["variant1"] <= its["gd"]
    rows = read_csv(tmp_path / "out" / "agm.csv")
    assert list(rows[0]) == ["iter", "f_gap", "best_gap", "grad_sq", "step_or_mu", "beta"]
    back = RunTrace.from_csv(tmp_path / "out" / "agm.csv")
    np.testing.assert_array_equal(back.f_gap, res.traces["agm"].f_gap)


def test_empty_method_list(tmp_path):
    p = write_config(tmp_path, f"methods =\nout_dir = {tmp_path / 'o'}\n")
    assert cli.main(["run", str(p)]) == cli.EXIT_OK
    assert read_csv(tmp_path / "o" / "summary.csv") == []


def test_run_is_deterministic(tmp_path):
    p = write_config(tmp_path, "problem = least_squares\nm = 60\nn = 10\nmu = 0.01\nmethods = polyak, acc-variant1\n")
    for d in ("a", "b"):
        assert cli.main(["run", str(p), "--out-dir", str(tmp_path / d), "--seed", "3", "--max-iter", "300"]) == 0
    for name in ("polyak.csv", "acc-variant1.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_dataset_is_a_data_error(tmp_path):
    p = write_config(tmp_path, "problem = logistic\ndataset = nowhere.csv\nfstar = presolve\n")
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path)]) == cli.EXIT_DATA


def test_logistic_needs_presolve(tmp_path):
    p = write_config(tmp_path, "problem = logistic\nm = 30\nn = 5\nmethods = agm\n")
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG


def test_logistic_from_dataset_with_presolve(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 4))
    y = np.where(X[:, 0] + 0.5 * rng.standard_normal(40) > 0, "yes", "no")
    (tmp_path / "d.csv").write_text("\n".join(",".join([*(repr(float(v)) for v in r), l]) for r, l in zip(X, y)))
    p = write_config(tmp_path, "problem = logistic\ndataset = d.csv\nreg = 0.01\nfstar = presolve\n"
                               "methods = gd, acc-variant2\ntol = 1e-8\n")
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path / "o")]) == 0
    summary = read_csv(tmp_path / "o" / "summary.csv")
    assert all(r["reason"] in ("converged", "gradient_vanished") for r in summary)


def test_presolve_low_confidence_aborts(tmp_path):
    p = write_config(tmp_path, "problem = logistic\nm = 30\nn = 5\nfstar = presolve\npresolve_budget = 3\n")
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path)]) == cli.EXIT_NUMERIC
    p = write_config(tmp_path, "problem = logistic\nm = 30\nn = 5\nfstar = presolve\npresolve_budget = 3\n"
                               "allow_low_confidence = true\nmethods = agm\nmax_iter = 5\n")
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path)]) == cli.EXIT_OK


def test_literal_f_star(tmp_path):
    cfg = ExperimentConfig(problem="lasso", m=10, n=4, fstar="-1.5", methods=("gd",), max_iter=3,
                           out_dir=str(tmp_path))
    problem = cli.apply_f_star(cli.build_problem(cfg), cfg)
    assert problem.F_star == -1.5


def test_nonfinite_run_aborts(tmp_path):
    cfg = ExperimentConfig(problem="quadratic", n=5, fstar="-1e300", methods=("variant1",), max_iter=20,
                           out_dir=str(tmp_path))
    problem = cli.apply_f_star(cli.build_problem(cfg), cfg)
    with pytest.raises(cli.NumericalAbort):
        with np.errstate(all="ignore"):
            cli.run_experiment(cfg, problem)


def test_rate_curves_variant1(tmp_path):
    path, rmax = cli.emit_rate_curves(0.1, 1.0, "variant1", 101, tmp_path / "c.csv")
    rows = read_csv(path)
    rho = np.array([float(r["rho_pep"]) for r in rows])
    assert rmax == pytest.approx(0.669421, abs=1e-6)
    assert rho.max() <= rmax + 1e-12
    np.testing.assert_allclose(rho, [float(r["rho_formula"]) for r in rows], atol=1e-8)


def test_rate_curves_regular_polyak(tmp_path):
    _, rmax = cli.emit_rate_curves(0.01, 1.0, "polyak", 101, tmp_path / "c.csv")
    assert rmax == pytest.approx(rates.regular_polyak_worst_rate(0.01, 1.0), abs=1e-6)


def test_kappa_sweep_is_decreasing(tmp_path):
    path = cli.emit_kappa_sweep(np.logspace(-4, 0, 9), "variant1", tmp_path / "k.csv")
    rows = read_csv(path)
    rmax = np.array([float(r["rho_max_pep"]) for r in rows])
    assert np.all(np.diff(rmax) < 0)
    np.testing.assert_allclose(rmax, [float(r["rho_max_formula"]) for r in rows], atol=1e-6)


def test_step_histogram_basics(tmp_path):
    edges, prop = cli.step_histogram(np.ones(30), 10, 1.0, 100.0)
    assert prop[0] == 1.0 and prop.sum() == 1.0
    rng = np.random.default_rng(0)
    _, prop = cli.step_histogram(rng.uniform(0, 2, 1000), 7, 0.0, 2.0)
    assert abs(prop.sum() - 1.0) <= 1e-12
    with pytest.raises(DataError):
        cli.step_histogram([np.nan], 5, 0.0, 1.0)
    path = cli.emit_step_histogram(np.full(5, 2.0), 4, tmp_path / "h.csv")
    assert sum(float(r["proportion"]) for r in read_csv(path)) == pytest.approx(1.0)


def test_subcommands(tmp_path, capsys):
    out = str(tmp_path)
    assert cli.main(["rates", "--mu", "0.1", "--kappas", "0.01,0.1,1", "--out-dir", out]) == 0
    assert (tmp_path / "rate_curve.csv").exists() and (tmp_path / "kappa_sweep.csv").exists()
    assert cli.main(["pep", "--gamma", "1.2"]) == 0
    assert "rho = 0.55" in capsys.readouterr().out
    assert cli.main(["pep", "--gamma", "0.1"]) == cli.EXIT_NUMERIC
    assert cli.main(["pep", "--sweep", "--rule", "polyak", "--mu", "0.01", "--out-dir", out]) == 0
    assert cli.main(["certify", "--samples", "50", "--settings", "2", "--grid", "1000", "--out-dir", out]) == 0
    assert len(read_csv(tmp_path / "certificates.csv")) == 10
    assert cli.main(["certify", "--tags", "nope"]) == cli.EXIT_CONFIG


def test_hist_subcommand(tmp_path):
    p = write_config(tmp_path, "n = 10\nmethods = variant1\nmax_iter = 100\n")
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path)]) == 0
    assert cli.main(["hist", str(tmp_path / "variant1.csv"), "--mu", "0.01", "--L", "1",
                     "--bins", "20", "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "histogram.csv")
    assert len(rows) == 20
    assert sum(float(r["proportion"]) for r in rows) == pytest.approx(1.0, abs=1e-12)
    assert cli.main(["hist", str(tmp_path / "missing.csv")]) == cli.EXIT_DATA


def test_step_distribution_study_shapes():
    study = cli.step_distribution_study(starts=2, polyak_iters=20, variant1_iters=20)
    assert study.polyak.size == 40 and study.variant1.size == 40
    assert np.all(study.variant1 >= 1 / study.L - 1e-9)
