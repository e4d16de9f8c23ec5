"""Command-line front end.

Subcommands: fit, simulate, check-separation, ci-compare, datasets and
multinomial.  Exit codes: 0 success, 1 input error, 2 non-convergence.
CSV input requires a header row, UTF-8 and '.' decimal separators; JSON
output serializes floats with shortest round-trip precision so re-parsing
reproduces every numeric field exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import datasets, engine, inference, multinomial, separation, sim
from .engine import FitControl, FitError, ModelSpec
from .families import (Family, InvalidMeanError, InvalidResponseError, Link,
                       UnsupportedFamilyError, UnsupportedPairError)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOCONV = 2


class InputError(Exception):
    """User-facing input problem; maps to exit code 1."""


def _read_csv(path: str) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputError(f"{path}: empty file")
            header = [h.strip() for h in header]
            columns = {h: [] for h in header}
            for rownum, row in enumerate(reader, start=2):
                if len(row) != len(header):
                    raise InputError(
                        f"{path}: row {rownum} has {len(row)} fields, "
                        f"expected {len(header)}")
                for h, cell in zip(header, row):
                    try:
                        columns[h].append(float(cell))
                    except ValueError:
                        raise InputError(
                            f"{path}: row {rownum}, column {h!r}: "
                            f"cannot parse {cell!r} as a number")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}")
    return {h: np.asarray(vals) for h, vals in columns.items()}


def _column(table: dict[str, np.ndarray], name: str) -> np.ndarray:
    if name not in table:
        raise InputError(f"column {name!r} not found; available: "
                         + ", ".join(sorted(table)))
    return table[name]


def _design(args):
    """(X, y, m, labels) from --data clotting or a CSV per the flags."""
    if args.data == "clotting":
        X, y = datasets.clotting_data()
        return X, y, np.ones(len(y)), ["intercept", "lot2", "log_conc",
                                       "lot2:log_conc"]
    table = _read_csv(args.data)
    if not args.response:
        raise InputError("--response is required for CSV input")
    if not args.covariates:
        raise InputError("--covariates is required for CSV input")
    y = _column(table, args.response)
    labels = [c.strip() for c in args.covariates.split(",") if c.strip()]
    cols = [_column(table, c) for c in labels]
    if args.intercept:
        cols.insert(0, np.ones(len(y)))
        labels.insert(0, "intercept")
    m = (_column(table, args.weights) if args.weights
         else np.ones(len(y)))
    return np.column_stack(cols), y, m, labels


def _family_link(args):
    try:
        family = Family(args.family)
        link = Link(args.link)
        from .families import check_pair
        check_pair(family, link)
    except (UnsupportedFamilyError, UnsupportedPairError, ValueError) as exc:
        raise InputError(str(exc))
    return family, link


def _emit(record: dict, fmt: str):
    if fmt == "json":
        print(json.dumps(record, indent=2))
    else:
        _print_table(record)


def _print_table(record: dict, indent: str = ""):
    for key, value in record.items():
        if isinstance(value, dict):
            print(f"{indent}{key}:")
            _print_table(value, indent + "  ")
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            for item in value:
                print(f"{indent}{key}[]:")
                _print_table(item, indent + "  ")
        else:
            print(f"{indent}{key}: {value}")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    X, y, m, labels = _design(args)
    family, link = _family_link(args)
    try:
        spec = ModelSpec(X=X, y=y, family=family, link=link, m=m)
    except (FitError, InvalidResponseError) as exc:
        raise InputError(str(exc))
    control = FitControl(tolerance=args.tolerance,
                         max_iterations=args.max_iterations,
                         dispersion_scale=args.dispersion_scale)
    try:
        res = engine.fit(spec, args.method, control)
    except (FitError, InvalidMeanError, InvalidResponseError) as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    record = {
        "method": res.method,
        "converged": bool(res.converged),
        "iterations": int(res.iterations),
        "coefficients": {lab: float(b) for lab, b in zip(labels, res.beta)},
        "standard_errors": {lab: float(s)
                            for lab, s in zip(labels, res.se_beta)},
        "dispersion": None if spec.dispersion_known else float(res.phi),
        "dispersion_se": (None if res.se_phi is None else float(res.se_phi)),
        "vcov": _jsonable(res.vcov),
        "adjusted_score_norm": float(res.adjusted_score_norm),
    }
    _emit(record, args.output)
    return EXIT_OK if res.converged else EXIT_NOCONV


def cmd_simulate(args) -> int:
    X, y, m, labels = _design(args)
    family, link = _family_link(args)
    spec = ModelSpec(X=X, y=y, family=family, link=link, m=m)
    if args.true_beta:
        true_beta = np.array([float(v) for v in args.true_beta.split(",")])
    else:
        true_beta = engine.fit(spec, "ml").beta
    if args.true_phi is not None:
        true_phi = args.true_phi
    elif spec.dispersion_known:
        true_phi = 1.0
    else:
        true_phi = engine.fit(spec, "ml").phi
    methods = tuple(s.strip() for s in args.methods.split(","))
    for meth in methods:
        if meth not in engine.METHODS:
            raise InputError(f"unknown method {meth!r}")
    design = sim.StudyDesign(spec=spec, true_beta=true_beta,
                             true_phi=true_phi, replicates=args.replicates,
                             seed=args.seed, methods=methods,
                             ci_level=args.level)
    try:
        report = sim.run_study(design)
    except sim.StudyFailure as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    record = {
        "replicates": report.replicates,
        "seed": args.seed,
        "excluded_separated": report.excluded_separated,
        "failures": report.failures,
        "rows": [{"parameter": r.parameter, "method": r.method,
                  "B": r.B, "RMSE": r.RMSE, "PU": r.PU, "MAE": r.MAE,
                  "B2_over_SD2": r.B2_over_SD2, "C": r.C,
                  "n_used": r.n_used}
                 for r in report.rows],
    }
    _emit(record, args.output)
    return EXIT_OK


def cmd_check_separation(args) -> int:
    if args.family != "binomial":
        raise InputError("separation detection applies to binomial "
                         "responses only")
    X, y, m, labels = _design(args)
    try:
        report = separation.detect_separation(X, y, m)
    except ValueError as exc:
        raise InputError(str(exc))
    record = {
        "status": report.kind,
        "separated": bool(report.separated),
        "n_rows": report.n_rows,
        "n_strict": report.n_strict,
        "direction": (None if report.direction is None
                      else {lab: float(g)
                            for lab, g in zip(labels, report.direction)}),
        "notes": report.notes,
    }
    _emit(record, args.output)
    return EXIT_OK


def cmd_ci_compare(args) -> int:
    alphas = [float(a) for a in args.alpha.split(",")]
    for a in alphas:
        if not 0.0 < a < 1.0:
            raise InputError(f"alpha {a} outside (0, 1)")
    rows = []
    for nu in _parse_nu(args.nu):
        for alpha in alphas:
            chk = inference.ci_inclusion_check(nu, alpha)
            rows.append({"nu": chk.nu, "alpha": chk.alpha,
                         "g": chk.g, "h": chk.h,
                         "hat_in_star": chk.hat_in_star,
                         "star_in_exact": chk.star_in_exact,
                         "star_in_dagger": chk.star_in_dagger,
                         "dagger_in_exact": chk.dagger_in_exact,
                         "dagger_len_closer": chk.dagger_len_closer})
    _emit({"rows": rows}, args.output)
    return EXIT_OK


def _parse_nu(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out or min(out) < 1:
        raise InputError("degrees of freedom must be positive integers")
    return out


def cmd_datasets(args) -> int:
    if args.name != "clotting":
        raise InputError("unknown dataset "
                         f"{args.name!r}; available: clotting")
    conc = datasets.CLOTTING_CONCENTRATION
    rows = ([{"conc": float(c), "lot": 1, "time": float(t)}
             for c, t in zip(conc, datasets.CLOTTING_TIME_LOT1)]
            + [{"conc": float(c), "lot": 2, "time": float(t)}
               for c, t in zip(conc, datasets.CLOTTING_TIME_LOT2)])
    if args.output == "json":
        print(json.dumps({"name": "clotting", "rows": rows}, indent=2))
    else:
        print("conc,lot,time")
        for r in rows:
            print(f"{r['conc']:g},{r['lot']},{r['time']:g}")
    return EXIT_OK


def cmd_multinomial(args) -> int:
    table = _read_csv(args.data)
    count_cols = [c.strip() for c in args.counts.split(",") if c.strip()]
    if len(count_cols) < 2:
        raise InputError("--counts needs at least two columns")
    counts = np.column_stack([_column(table, c) for c in count_cols])
    labels = []
    cols = []
    if args.covariates:
        labels = [c.strip() for c in args.covariates.split(",") if c.strip()]
        cols = [_column(table, c) for c in labels]
    if args.intercept:
        cols.insert(0, np.ones(counts.shape[0]))
        labels.insert(0, "intercept")
    if not cols:
        raise InputError("need --covariates and/or --intercept")
    try:
        problem = multinomial.MultinomialProblem(
            counts=counts, covariates=np.column_stack(cols),
            baseline=args.baseline)
        mfit = multinomial.fit_multinomial(problem, args.method)
    except (ValueError, FitError) as exc:
        raise InputError(str(exc))
    if not mfit.converged:
        print("multinomial fit did not converge", file=sys.stderr)
        return EXIT_NOCONV
    record = {
        "method": mfit.method,
        "converged": bool(mfit.converged),
        "baseline_category": count_cols[mfit.baseline],
        "gamma": {count_cols[s]: {lab: float(g) for lab, g in
                                  zip(labels, mfit.gamma[r])}
                  for r, s in enumerate(mfit.free_categories)},
        "standard_errors": {count_cols[s]: {lab: float(g) for lab, g in
                                            zip(labels, mfit.se_gamma[r])}
                            for r, s in enumerate(mfit.free_categories)},
    }
    _emit(record, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_data_flags(p):
    p.add_argument("--data", required=True,
                   help="CSV path or the name of an embedded dataset "
                        "(clotting)")
    p.add_argument("--response", help="response column name")
    p.add_argument("--covariates", help="comma-separated covariate columns")
    p.add_argument("--weights", help="prior-weights column name")
    p.add_argument("--intercept", action="store_true", default=True,
                   help="include an intercept column (default)")
    p.add_argument("--no-intercept", dest="intercept", action="store_false")
    p.add_argument("--family", default="gaussian",
                   choices=["gaussian", "binomial", "poisson", "gamma"])
    p.add_argument("--link", default=None)


def _add_output_flag(p):
    p.add_argument("--output", default="table", choices=["table", "json"])


DEFAULT_LINKS = {"gaussian": "identity", "binomial": "logit",
                 "poisson": "log", "gamma": "log"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glmbr",
        description="GLM fitting with bias-reducing adjusted-score IWLS")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit one model")
    _add_data_flags(p)
    p.add_argument("--method", default="ml", choices=list(engine.METHODS))
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--dispersion-scale", default="identity",
                   choices=["identity", "log"])
    _add_output_flag(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Monte-Carlo frequency properties")
    _add_data_flags(p)
    p.add_argument("--replicates", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--methods", default="ml,mean_br,median_br,mixed_br")
    p.add_argument("--true-beta", help="comma-separated truth; "
                                       "default: ML fit of the data")
    p.add_argument("--true-phi", type=float)
    p.add_argument("--level", type=float, default=0.95)
    _add_output_flag(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check-separation",
                       help="detect complete/quasi-complete separation")
    _add_data_flags(p)
    _add_output_flag(p)
    p.set_defaults(func=cmd_check_separation)

    p = sub.add_parser("ci-compare",
                       help="normal-model confidence interval comparison")
    p.add_argument("--nu", required=True,
                   help="degrees of freedom: N, N-M or comma list")
    p.add_argument("--alpha", default="0.05",
                   help="comma-separated significance levels")
    _add_output_flag(p)
    p.set_defaults(func=cmd_ci_compare)

    p = sub.add_parser("datasets", help="print an embedded dataset")
    p.add_argument("--name", required=True)
    _add_output_flag(p)
    p.set_defaults(func=cmd_datasets)

    p = sub.add_parser("multinomial",
                       help="baseline-category multinomial logit")
    p.add_argument("--data", required=True, help="wide CSV path")
    p.add_argument("--counts", required=True,
                   help="comma-separated count columns, one per category")
    p.add_argument("--covariates")
    p.add_argument("--intercept", action="store_true", default=True)
    p.add_argument("--no-intercept", dest="intercept", action="store_false")
    p.add_argument("--baseline", type=int, default=-1,
                   help="0-based baseline category index (default: last)")
    p.add_argument("--method", default="ml",
                   choices=["ml", "mean_br", "median_br"])
    _add_output_flag(p)
    p.set_defaults(func=cmd_multinomial)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "family", None) and getattr(args, "link", "x") is None:
        args.link = DEFAULT_LINKS[args.family]
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
