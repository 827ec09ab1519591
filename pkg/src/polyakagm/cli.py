"""Command-line experiment harness writing plot-ready CSV files.

Subcommands: ``run`` (experiment from a config file), ``rates`` (worst-case
rate curves), ``pep`` (single worst-case solve or sweep), ``certify`` (proof
identities) and ``hist`` (step-size histogram of a trace).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
abort, 5 certificate failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import certificates, data, oracles, pep, rates
from .errors import ConfigError, DataError, InfeasiblePep, PolyakError
from .methods import METHOD_NAMES, RunTrace, run

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, EXIT_CERT = 0, 2, 3, 4, 5

PROBLEMS = ("quadratic", "least_squares", "logistic", "lasso", "rescaled_quadratic")


class NumericalAbort(PolyakError):
    """A run produced NaN/Inf or the optimal-value presolve failed."""


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat experiment description; see :data:`CONFIG_KEYS` for the file format.

    ``fstar`` is ``exact`` (the problem's known value), ``presolve`` (an
    over-solved momentum run) or a literal number.
    """

    problem: str = "quadratic"
    methods: tuple[str, ...] = ("gd", "variant1", "agm", "acc-variant2")
    dataset: str | None = None
    label_column: int = -1
    has_header: bool = False
    standardize: bool = True
    intercept: bool = False
    reg: float = 1e-3
    l1_weight: float = 1.0
    n: int = 50
    m: int = 200
    mu: float = 0.01
    L: float = 1.0
    seed: int = 0
    max_iter: int = 10_000
    tol: float = 1e-9
    fstar: str = "exact"
    presolve_budget: int = 100_000
    allow_low_confidence: bool = False
    out_dir: str = "out"

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        bad = [mname for mname in self.methods if mname not in METHOD_NAMES]
        if bad:
            raise ConfigError(f"unknown methods {bad}; registered: {METHOD_NAMES}")
        if self.problem in ("logistic", "lasso") and self.dataset is None and self.m < 1:
            raise ConfigError("need a dataset or a positive m")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be nonnegative")
        if not (self.L > 0 and 0 <= self.mu <= self.L):
            raise ConfigError("need 0 <= mu <= L")
        if self.fstar not in ("exact", "presolve"):
            try:
                float(self.fstar)
            except ValueError:
                raise ConfigError(f"fstar must be exact, presolve or a number, got {self.fstar!r}") from None


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


CONFIG_KEYS = {
    "problem": str, "dataset": str, "label_column": int, "has_header": _parse_bool,
    "standardize": _parse_bool, "intercept": _parse_bool, "reg": float, "l1_weight": float,
    "n": int, "m": int, "mu": float, "L": float, "seed": int, "max_iter": int, "tol": float,
    "fstar": str, "presolve_budget": int, "allow_low_confidence": _parse_bool, "out_dir": str,
    "methods": lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
}


def parse_config(text: str, base_dir: Path | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = CONFIG_KEYS[key](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if base_dir is not None and "dataset" in values and not Path(values["dataset"]).is_absolute():
        values["dataset"] = str(base_dir / values["dataset"])
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


# -- problems -----------------------------------------------------------------


def _load_dataset(cfg: ExperimentConfig) -> data.Dataset:
    path = Path(cfg.dataset)
    if not path.exists():
        raise DataError(f"dataset {path} not found")
    if path.suffix.lower() == ".csv":
        ds = data.load_csv(path, cfg.label_column, cfg.has_header, binary=cfg.problem == "logistic")
    else:
        ds = data.load_libsvm(path)
        if cfg.problem == "logistic":
            ds = data.to_binary_labels(ds)
    if cfg.standardize:
        ds = data.standardize(ds)
    if cfg.intercept:
        ds = data.add_intercept(ds)
    return ds


def build_problem(cfg: ExperimentConfig):
    """Problem described by the config, without the optimal-value policy applied."""
    rng = np.random.default_rng([cfg.seed, 0])
    if cfg.problem == "quadratic":
        return oracles.random_quadratic(cfg.n, cfg.mu, cfg.L, rng, target=rng.standard_normal(cfg.n))
    if cfg.problem == "rescaled_quadratic":
        return oracles.rescaled_gram_quadratic(cfg.m, cfg.n, cfg.mu, cfg.L, rng)
    if cfg.dataset is not None:
        ds = _load_dataset(cfg)
        A, b = ds.features, ds.labels
    else:
        A = rng.standard_normal((cfg.m, cfg.n))
        b = np.sign(rng.standard_normal(cfg.m)) if cfg.problem == "logistic" else rng.standard_normal(cfg.m)
    try:
        if cfg.problem == "least_squares":
            if cfg.dataset is None:
                return oracles.synthetic_least_squares(cfg.m, cfg.n, cfg.mu / cfg.L, rng, L=cfg.L)
            return oracles.make_least_squares(A, b)
        if cfg.problem == "logistic":
            return oracles.make_logistic(A, b, cfg.reg)
        return oracles.make_lasso(A, b, cfg.l1_weight)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def apply_f_star(problem, cfg: ExperimentConfig):
    if cfg.fstar == "exact":
        if problem.f_star is None:
            raise ConfigError(f"{cfg.problem} has no exact optimal value; use fstar = presolve")
        return problem
    if cfg.fstar == "presolve":
        est = oracles.estimate_f_star(problem, budget=cfg.presolve_budget, seed=cfg.seed)
        if not est.confident and not cfg.allow_low_confidence:
            raise NumericalAbort(
                f"optimal-value presolve did not converge in {cfg.presolve_budget} iterations; "
                "raise presolve_budget or set allow_low_confidence = true")
        return problem.with_f_star(float(est), confident=est.confident)
    return problem.with_f_star(float(cfg.fstar))


# -- experiments --------------------------------------------------------------


@dataclass
class ExperimentResult:
    traces: dict = field(default_factory=dict)
    files: list = field(default_factory=list)
    summary: list = field(default_factory=list)


SUMMARY_COLUMNS = ("method", "iterations_to_tol", "best_gap", "final_gap", "iterations", "reason")


def run_experiment(cfg: ExperimentConfig, problem=None) -> ExperimentResult:
    """Run every configured method and write ``<method>.csv`` plus ``summary.csv``."""
    if problem is None:
        problem = apply_f_star(build_problem(cfg), cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # separate stream from the problem data so x0 never repeats a problem draw
    x0 = np.random.default_rng([cfg.seed, 1]).standard_normal(problem.dim)
    result = ExperimentResult()
    for name in cfg.methods:
        trace = run(problem, name, x0, max_iter=cfg.max_iter, gap_tol=cfg.tol)
        path = out / f"{name}.csv"
        trace.to_csv(path)
        result.traces[name] = trace
        result.files.append(path)
        hit = trace.iterations_to(cfg.tol)
        result.summary.append({
            "method": name,
            "iterations_to_tol": "" if hit is None else hit,
            "best_gap": repr(float(trace.best_gap[-1])),
            "final_gap": repr(float(trace.f_gap[-1])),
            "iterations": trace.iterations,
            "reason": trace.reason,
        })
    summary = out / "summary.csv"
    with summary.open("w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(result.summary)
    result.files.append(summary)
    aborted = [n for n, t in result.traces.items() if t.reason == "nonfinite"]
    if aborted:
        raise NumericalAbort(f"NaN/Inf in runs of {aborted}; see their CSV for the last row")
    return result


def _write_rows(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return path


def rate_curve(mu: float, L: float, rule: str = "variant1", grid: int = 101):
    """``(gammas, rho_pep, rho_formula, sweep)``; the formula column is nan for
    the plain Polyak step, whose per-step curve has no closed form here."""
    sweep = pep.sweep_gamma(mu, L, rule, grid)
    if rule == "variant1":
        formula = np.array([rates.gd_distance_rate(g, mu, L) for g in sweep.gammas])
    else:
        formula = np.full(sweep.gammas.size, np.nan)
    return sweep.gammas, sweep.rhos, formula, sweep


def emit_rate_curves(mu: float, L: float, rule: str, grid: int, path) -> tuple[Path, float]:
    """Write ``gamma, rho_pep, rho_formula``; returns the path and the refined maximum."""
    g, r, f, sweep = rate_curve(mu, L, rule, grid)
    return _write_rows(path, ("gamma", "rho_pep", "rho_formula"), zip(g, r, f)), sweep.rho_max


def worst_rate_formula(mu: float, L: float, rule: str) -> float:
    if rule == "variant1":
        return rates.max_distance_rate(mu, L)
    return rates.regular_polyak_worst_rate(mu, L)


def emit_kappa_sweep(kappas, rule: str, path, L: float = 1.0, grid: int = 101) -> Path:
    """Write ``kappa, rho_max_pep, rho_max_formula``."""
    rows = []
    for k in kappas:
        mu = k * L
        if k >= 1.0:
            rows.append((k, 0.0, 0.0))
            continue
        rows.append((k, pep.sweep_gamma(mu, L, rule, grid).rho_max, worst_rate_formula(mu, L, rule)))
    return _write_rows(path, ("kappa", "rho_max_pep", "rho_max_formula"), rows)


def step_histogram(steps, bins: int, lo: float, hi: float):
    """Normalised histogram of finite steps on ``bins`` equal bins of ``[lo, hi]``.

    Steps marginally outside the interval (rounding) are counted in the end
    bins. Returns ``(edges, proportions)``.
    """
    s = np.asarray(steps, dtype=np.float64)
    s = s[np.isfinite(s)]
    if s.size == 0:
        raise DataError("no finite step sizes in the trace")
    if not (hi > lo):
        raise ConfigError("histogram interval must have hi > lo")
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(np.clip(s, lo, hi), edges)
    return edges, counts / s.size


def emit_step_histogram(trace: RunTrace | np.ndarray, bins: int, path, lo: float | None = None,
                        hi: float | None = None) -> Path:
    """Write ``bin_center, proportion`` for the trace's step column."""
    steps = trace.step_or_mu if isinstance(trace, RunTrace) else np.asarray(trace)
    finite = steps[np.isfinite(steps)]
    if finite.size == 0:
        raise DataError("no finite step sizes in the trace")
    lo = float(finite.min()) if lo is None else lo
    hi = float(finite.max()) if hi is None else hi
    if hi <= lo:
        hi = lo + max(abs(lo), 1.0) * 1e-9
    edges, prop = step_histogram(steps, bins, lo, hi)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return _write_rows(path, ("bin_center", "proportion"), zip(centers, prop))


@dataclass
class StepStudy:
    """Steps of the plain and doubled Polyak rules on the rescaled quadratic."""

    polyak: np.ndarray
    variant1: np.ndarray
    mu: float
    L: float


def step_distribution_study(mu: float = 0.01, L: float = 1.0, data_seed: int = 0, starts: int = 10,
                            polyak_iters: int = 150, variant1_iters: int = 400,
                            m: int = 208, n: int = 60) -> StepStudy:
    """Pool realised steps over ``starts`` random initial points.

    The problem is :func:`oracles.rescaled_gram_quadratic` of an ``m x n``
    Gaussian design; start ``s`` is drawn with seed ``100 + s``.
    """
    problem = oracles.rescaled_gram_quadratic(m, n, mu, L, np.random.default_rng(data_seed))
    pooled = {"polyak": [], "variant1": []}
    for s in range(starts):
        x0 = np.random.default_rng(100 + s).standard_normal(n)
        for name, iters in (("polyak", polyak_iters), ("variant1", variant1_iters)):
            t = run(problem, name, x0, max_iter=iters)
            st = t.step_or_mu
            pooled[name].append(st[np.isfinite(st)])
    return StepStudy(np.concatenate(pooled["polyak"]), np.concatenate(pooled["variant1"]), mu, L)


# -- command line -------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--out-dir", default=None, help="output directory")
    p.add_argument("--tol", type=float, default=None, help="gap tolerance")
    p.add_argument("--max-iter", type=int, default=None, help="iteration budget")
    p.add_argument("--fstar", default=None, help="exact, presolve or a number")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polyakagm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    _common(p)

    p = sub.add_parser("rates", help="worst-case rate curves")
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--rule", choices=tuple(pep.RULE_THETA), default="variant1")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--kappas", default="", help="comma-separated kappa sweep (default 1e-4..1)")
    _common(p)

    p = sub.add_parser("pep", help="solve the one-step worst-case program")
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--rule", choices=tuple(pep.RULE_THETA), default="variant1")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--gamma", type=float)
    g.add_argument("--sweep", action="store_true")
    p.add_argument("--grid", type=int, default=101)
    _common(p)

    p = sub.add_parser("certify", help="check the proof identities")
    p.add_argument("--tags", default=",".join(certificates.TAGS))
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--settings", type=int, default=20, help="parameter settings per identity")
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=100_000, help="polynomial grid size")
    _common(p)

    p = sub.add_parser("hist", help="step-size histogram of a trace CSV")
    p.add_argument("trace")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--lo", type=float, default=None)
    p.add_argument("--hi", type=float, default=None)
    p.add_argument("--mu", type=float, default=None, help="with --L and --rule, bin the rule's step interval")
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--rule", choices=tuple(pep.RULE_THETA), default="variant1")
    _common(p)
    return parser


def _out(args, default: str = "out") -> Path:
    path = Path(args.out_dir or default)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {k: v for k, v in (("seed", args.seed), ("out_dir", args.out_dir), ("tol", args.tol),
                                   ("max_iter", args.max_iter), ("fstar", args.fstar)) if v is not None}
    cfg = replace(cfg, **overrides)
    res = run_experiment(cfg)
    for row in res.summary:
        hit = row["iterations_to_tol"]
        print(f"{row['method']:<14} iterations_to_tol={'-' if hit == '' else hit:>8}  "
              f"best_gap={float(row['best_gap']):.3e}  reason={row['reason']}")
    return EXIT_OK


def _cmd_rates(args) -> int:
    out = _out(args)
    path, rmax = emit_rate_curves(args.mu, args.L, args.rule, args.grid, out / "rate_curve.csv")
    kappas = [float(k) for k in args.kappas.split(",") if k.strip()] or list(np.logspace(-4, 0, 17))
    kpath = emit_kappa_sweep(kappas, args.rule, out / "kappa_sweep.csv", L=args.L, grid=args.grid)
    print(f"max rho = {rmax:.12f}  (formula {worst_rate_formula(args.mu, args.L, args.rule):.12f})")
    print(f"wrote {path} and {kpath}")
    return EXIT_OK


def _cmd_pep(args) -> int:
    if args.sweep:
        out = _out(args)
        path, rmax = emit_rate_curves(args.mu, args.L, args.rule, args.grid, out / "pep_sweep.csv")
        print(f"max rho = {rmax:.12f}; wrote {path}")
        return EXIT_OK
    sol = pep.solve_rho_of_gamma(args.mu, args.L, args.gamma, args.rule)
    v = sol.vars
    print(f"rho = {sol.objective:.15g}  G = {v.G:.6g}  GX = {v.GX:.6g}  fgap = {v.fgap:.6g}  "
          f"active = {','.join(sol.active_set) or '-'}")
    return EXIT_OK


def _cmd_certify(args) -> int:
    tags = [t.strip() for t in args.tags.split(",") if t.strip()]
    bad = [t for t in tags if t not in certificates.TAGS]
    if bad:
        raise ConfigError(f"unknown identities {bad}; expected {certificates.TAGS}")
    seed = 0 if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    reports = []
    for tag in tags:
        mu = 0.0 if tag == "adaptive" else args.mu
        for i, p in enumerate(certificates.default_params(tag, mu, args.L, args.settings, rng)):
            reports.append(certificates.check_identity(tag, mu, args.L, p, samples=args.samples, seed=seed + i))
    for r in reports:
        print(r)
    poly = certificates.check_polynomials(args.grid)
    bracket = certificates.check_intermediate_bracket(np.linspace(1e-3, 1.0, 1000))
    print(poly)
    print(bracket)
    certificates.write_reports_csv(reports, _out(args) / "certificates.csv")
    ok = all(r.passed for r in reports) and poly.passed and bracket.passed
    return EXIT_OK if ok else EXIT_CERT


def _cmd_hist(args) -> int:
    try:
        trace = RunTrace.from_csv(args.trace)
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read trace {args.trace}: {exc}") from None
    lo, hi = args.lo, args.hi
    if args.mu is not None and args.L is not None:
        lo, hi = pep.admissible_interval(args.mu, args.L, args.rule)
    path = emit_step_histogram(trace, args.bins, _out(args) / "histogram.csv", lo, hi)
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "rates": _cmd_rates, "pep": _cmd_pep, "certify": _cmd_certify, "hist": _cmd_hist}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalAbort, InfeasiblePep) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (PolyakError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
