"""Command-line front end.

Subcommands::

    bilevel-ggm simulate --config run.json
    bilevel-ggm fit      --config run.json --data DIR
    bilevel-ggm tune     --config run.json --data DIR
    bilevel-ggm evaluate --fit DIR --truth DIR
    bilevel-ggm glasso   --input S.csv --lambda X

Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 solver
non-convergence when ``--strict`` is given. ``BILEVEL_GGM_THREADS``
overrides the configured thread count.
"""
import argparse
import math
import os
import sys
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .errors import (BilevelGGMError, ConvergenceWarning, DimensionMismatch,
                     InvalidConfig, InvalidLambda, MissingTruth)
from .glasso import GlassoOptions, glasso_fit
from .linalg import SubjectData, as_symmetric
from .metrics import edge_confusion, estimation_error, majority_vote_group
from .rcm import (LambdaTriple, RcmOptions, bic1, bic2, degrees_of_freedom,
                  rcm_fit, rcm_kkt)
from .simgen import SimScenario, edges_from_precision, generate_scenario
from .tuning import CRITERIA, LambdaGrid, tune

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NONCONVERGED = 0, 2, 3, 4
THREADS_ENV = "BILEVEL_GGM_THREADS"
METRIC_COLUMNS = ("method", "BIC", "ITPR", "IFPR", "GTPR", "GFPR", "Frobenius", "L1norm")

_SOLVER_KEYS = ("max_bcd_iter", "bcd_tol", "init_blend", "init_mode",
                "glasso_max_iter", "glasso_tol", "sparsecov_max_iter", "sparsecov_tol")


@dataclass
class RunConfig:
    """Resolved contents of a run-config JSON file."""

    scenario: Optional[SimScenario] = None
    grid: Optional[LambdaGrid] = None
    lambda_: Optional[LambdaTriple] = None
    criterion: str = "bic2"
    bic_weighting: str = "n"
    solver: dict = None
    threads: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        self.solver = dict(self.solver or {})
        unknown = set(self.solver) - set(_SOLVER_KEYS)
        if unknown:
            raise InvalidConfig(f"unknown solver options: {sorted(unknown)}")
        if self.criterion not in CRITERIA:
            raise InvalidConfig(f"criterion must be one of {CRITERIA}")
        if self.bic_weighting not in ("n", "unit"):
            raise InvalidConfig("bic_weighting must be 'n' or 'unit'")
        if not isinstance(self.threads, int) or self.threads < 0:
            raise InvalidConfig("threads must be a non-negative integer")

    def rcm_options(self):
        s = self.solver
        base = RcmOptions()
        try:
            return RcmOptions(
                max_bcd_iter=int(s.get("max_bcd_iter", base.max_bcd_iter)),
                bcd_tol=float(s.get("bcd_tol", base.bcd_tol)),
                init_blend=float(s.get("init_blend", base.init_blend)),
                init_mode=s.get("init_mode", base.init_mode),
                inner_glasso=GlassoOptions(
                    max_iter=int(s.get("glasso_max_iter", base.inner_glasso.max_iter)),
                    tol=float(s.get("glasso_tol", base.inner_glasso.tol))),
                inner_sparsecov=replace(
                    base.inner_sparsecov,
                    max_iter=int(s.get("sparsecov_max_iter", base.inner_sparsecov.max_iter)),
                    tol=float(s.get("sparsecov_tol", base.inner_sparsecov.tol))),
                threads=self.threads)
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from exc

    def to_dict(self):
        return {
            "scenario": self.scenario.to_dict() if self.scenario else None,
            "grid": self.grid.to_dict() if self.grid else None,
            "lambda": list(self.lambda_.as_tuple()) if self.lambda_ else None,
            "criterion": self.criterion,
            "bic_weighting": self.bic_weighting,
            "solver": dict(sorted(self.solver.items())),
            "threads": self.threads,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise InvalidConfig("config must be a JSON object")
        known = {"scenario", "grid", "lambda", "criterion", "bic_weighting",
                 "solver", "threads", "output_dir"}
        unknown = set(d) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        try:
            scenario = SimScenario.from_dict(d["scenario"]) if d.get("scenario") else None
            grid = LambdaGrid.from_dict(d["grid"]) if d.get("grid") else None
            lam = d.get("lambda")
            if isinstance(lam, dict):
                lam = LambdaTriple(lam["lambda1"], lam["lambda2"], lam["lambda3"])
            elif lam is not None:
                lam = LambdaTriple(*lam)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidConfig(f"malformed config: {exc}") from exc
        return cls(scenario=scenario, grid=grid, lambda_=lam,
                   criterion=d.get("criterion", "bic2"),
                   bic_weighting=d.get("bic_weighting", "n"),
                   solver=d.get("solver"), threads=d.get("threads", 1),
                   output_dir=d.get("output_dir", "out"))


def load_config(path):
    try:
        raw = io.read_json(path)
    except (OSError, ValueError) as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    cfg = RunConfig.from_dict(raw)
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            cfg.threads = int(env)
        except ValueError as exc:
            raise InvalidConfig(f"{THREADS_ENV} must be an integer") from exc
        if cfg.threads < 0:
            raise InvalidConfig(f"{THREADS_ENV} must be >= 0")
    return cfg


def _outdir(cfg, override):
    out = Path(override or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_subjects(data_dir):
    files = io.indexed_files(data_dir, r"subject_(\d+)\.csv")
    if not files:
        raise FileNotFoundError(f"no subject_<k>.csv files in {data_dir}")
    return [SubjectData(io.read_matrix(f)) for f in files]


# ---------------------------------------------------------------- simulate

def cmd_simulate(cfg, out):
    if cfg.scenario is None:
        raise InvalidConfig("simulate needs a scenario")
    truth = generate_scenario(cfg.scenario)
    for k, data in enumerate(truth.datasets):
        io.write_matrix(out / f"subject_{k}.csv", data.observations)
        io.write_edges(out / f"truth_subject_{k}_edges.csv", truth.individual_edges[k])
        io.write_matrix(out / f"truth_subject_{k}_precision.csv", truth.individual_precisions[k])
    io.write_edges(out / "truth_group_edges.csv", truth.group_edges)
    io.write_matrix(out / "truth_group_precision.csv", truth.group_precision)
    io.write_json(out / "manifest.json", cfg.to_dict())
    return True


# ------------------------------------------------------------- fit / tune

def _write_fit(out, fit, subjects, extra=None):
    io.write_matrix(out / "omega0.csv", fit.omega0)
    io.write_edges(out / "edges_group.csv", edges_from_precision(fit.omega0))
    for k, Om in enumerate(fit.omegas):
        io.write_matrix(out / f"omega_{k}.csv", Om)
        io.write_edges(out / f"edges_subject_{k}.csv", edges_from_precision(Om))
    covs = [s.sample_cov for s in subjects]
    ind, grp = rcm_kkt(fit, covs)
    report = {
        "lambda": list(fit.lambda_.as_tuple()),
        "objective_trace": fit.objective_trace,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "group_estimated": fit.group_estimated,
        "kkt": {"individual": ind, "group": grp},
        "df": degrees_of_freedom(fit),
        "bic1": bic1(fit, subjects),
    }
    ns = {s.n for s in subjects}
    report["bic2"] = bic2(fit, subjects) if len(ns) == 1 else None
    report.update(extra or {})
    io.write_json(out / "fit_report.json", report)


def cmd_fit(cfg, subjects, out):
    if cfg.lambda_ is None or cfg.grid is not None:
        raise InvalidConfig("fit needs exactly one of lambda/grid, namely lambda")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        fit = rcm_fit(subjects, cfg.lambda_, cfg.rcm_options())
    _write_fit(out, fit, subjects, {"criterion": cfg.criterion})
    return fit.converged


def cmd_tune(cfg, subjects, out):
    if cfg.grid is None or cfg.lambda_ is not None:
        raise InvalidConfig("tune needs exactly one of lambda/grid, namely grid")
    result = tune(subjects, cfg.grid, cfg.criterion, cfg.rcm_options(),
                  weighting=cfg.bic_weighting)
    with open(out / "tune_table.csv", "w") as fh:
        fh.write("lambda1,lambda2,lambda3,bic,df,converged\n")
        for e in result.table:
            l1, l2, l3 = e.lambda_.as_tuple()
            vals = [io.FLOAT_FMT % v for v in (l1, l2, l3, e.bic, e.df)]
            fh.write(",".join(vals) + f",{str(e.converged).lower()}\n")
    _write_fit(out, result.best, subjects,
               {"criterion": cfg.criterion, "selected_bic": result.best_entry.bic})
    return result.best.converged


# ---------------------------------------------------------------- evaluate

def _load_truth(truth_dir):
    truth_dir = Path(truth_dir)
    group = truth_dir / "truth_group_precision.csv"
    subj = io.indexed_files(truth_dir, r"truth_subject_(\d+)_precision\.csv") \
        if truth_dir.is_dir() else []
    if not group.exists() or not subj:
        raise MissingTruth(f"no truth precision files in {truth_dir}")
    return io.read_matrix(group), [io.read_matrix(f) for f in subj]


def _load_fit(fit_dir):
    fit_dir = Path(fit_dir)
    omega0 = io.read_matrix(fit_dir / "omega0.csv")
    omegas = [io.read_matrix(f) for f in io.indexed_files(fit_dir, r"omega_(\d+)\.csv")]
    report_path = fit_dir / "fit_report.json"
    report = io.read_json(report_path) if report_path.exists() else {}
    return omega0, omegas, report


def evaluate_rows(omega0, omegas, truth0, truths, bic=None, offdiag_only=False):
    """Metric rows for the fit and for the majority-vote group network."""
    if len(omegas) != len(truths) or omega0.shape != truth0.shape:
        raise DimensionMismatch("fit and truth differ in K or p")
    est_edges = [edges_from_precision(O) for O in omegas]
    true_edges = [edges_from_precision(T) for T in truths]
    true_group = edges_from_precision(truth0)
    ind = [edge_confusion(e, t) for e, t in zip(est_edges, true_edges)]
    errs = [estimation_error(O, T, offdiag_only=offdiag_only) for O, T in zip(omegas, truths)]
    itpr = float(np.mean([c.tpr for c in ind]))
    ifpr = float(np.mean([c.fpr for c in ind]))
    frob = float(np.mean([e[0] for e in errs]))
    l1 = float(np.mean([e[1] for e in errs]))
    grp = edge_confusion(edges_from_precision(omega0), true_group)
    vote = edge_confusion(majority_vote_group(est_edges), true_group)
    return [
        {"method": "rcm", "BIC": bic, "ITPR": itpr, "IFPR": ifpr, "GTPR": grp.tpr,
         "GFPR": grp.fpr, "Frobenius": frob, "L1norm": l1},
        {"method": "majority_vote", "BIC": None, "ITPR": itpr, "IFPR": ifpr,
         "GTPR": vote.tpr, "GFPR": vote.fpr, "Frobenius": frob, "L1norm": l1},
    ]


def write_metrics(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(METRIC_COLUMNS) + "\n")
        for r in rows:
            cells = []
            for c in METRIC_COLUMNS:
                v = r[c]
                cells.append("" if v is None else v if isinstance(v, str) else io.FLOAT_FMT % v)
            fh.write(",".join(cells) + "\n")


def cmd_evaluate(fit_dir, truth_dir, out, offdiag_only=False):
    truth0, truths = _load_truth(truth_dir)
    omega0, omegas, report = _load_fit(fit_dir)
    bic = report.get(report.get("criterion", "bic2"))
    rows = evaluate_rows(omega0, omegas, truth0, truths, bic, offdiag_only)
    write_metrics(out / "metrics.csv", rows)
    return True


# ------------------------------------------------------------------ glasso

def cmd_glasso(input_path, lam, out, observations=False, max_iter=100, tol=1e-4):
    if not (lam >= 0 and math.isfinite(lam)):
        raise InvalidLambda("lambda must be a finite non-negative number")
    M = io.read_matrix(input_path)
    S = SubjectData(M).sample_cov if observations else as_symmetric(M, "S")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        omega, rep = glasso_fit(S, lam, GlassoOptions(max_iter=max_iter, tol=tol))
    io.write_matrix(out / "omega.csv", omega)
    io.write_edges(out / "edges.csv", edges_from_precision(omega))
    io.write_json(out / "glasso_report.json", {
        "lambda": lam, "iterations": rep.iterations, "converged": rep.converged,
        "objective": rep.objective, "final_delta": rep.final_delta})
    return rep.converged


# -------------------------------------------------------------------- main

def build_parser():
    parser = argparse.ArgumentParser(
        prog="bilevel-ggm",
        description="Joint group- and individual-level graphical model estimation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="run-config JSON file")
        p.add_argument("--output", help="output directory (overrides output_dir)")
        p.add_argument("--strict", action="store_true",
                       help="exit with code 4 when a solver does not converge")

    common(sub.add_parser("simulate", help="generate a simulated study"))
    for name in ("fit", "tune"):
        p = sub.add_parser(name, help=f"{name} the random covariance model")
        common(p)
        p.add_argument("--data", required=True, help="directory of subject_<k>.csv files")
    p = sub.add_parser("evaluate", help="score a fit against simulation truth")
    common(p, config=False)
    p.add_argument("--fit", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--offdiag-only-norms", action="store_true",
                   help="exclude the diagonal from Frobenius and L1 errors")
    p = sub.add_parser("glasso", help="single graphical lasso fit")
    common(p, config=False)
    p.add_argument("--input", required=True, help="covariance (or data) CSV")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--observations", action="store_true",
                   help="treat the input as an n x p data matrix")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-4)
    return parser


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("simulate", "fit", "tune"):
            cfg = load_config(args.config)
            if args.command == "simulate":
                ok = cmd_simulate(cfg, _outdir(cfg, args.output))
            else:
                subjects = load_subjects(args.data)
                fn = cmd_fit if args.command == "fit" else cmd_tune
                ok = fn(cfg, subjects, _outdir(cfg, args.output))
        elif args.command == "evaluate":
            out = Path(args.output or args.fit)
            out.mkdir(parents=True, exist_ok=True)
            ok = cmd_evaluate(args.fit, args.truth, out, args.offdiag_only_norms)
        else:
            out = Path(args.output or ".")
            out.mkdir(parents=True, exist_ok=True)
            ok = cmd_glasso(args.input, args.lam, out, args.observations,
                            args.max_iter, args.tol)
    except (InvalidConfig, InvalidLambda) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BilevelGGMError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if not ok:
        print("warning: solver did not converge", file=sys.stderr)
        if args.strict:
            return EXIT_NONCONVERGED
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
