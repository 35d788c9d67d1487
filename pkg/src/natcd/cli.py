"""Command-line interface: ``natcd {fit,path,bench,check,generate}``."""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import audit_fixed_point, certify, threshold_audit_check
from .errors import DataError, GenerationError, NumericalError, PathError
from .family import get_family
from .model import UPDATE_RULES, Dataset, FitConfig, PenaltySpec, score
from .path import make_path, model_size, run_path
from .solver import fit
from .tabular import load, write_csv
from .testkit import SyntheticSpec, generate

REPORT_FORMAT = "natcd-report/1"


class UsageError(Exception):
    """Conflicting or invalid flags, detected before any computation."""


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonnegative_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _mu_arg(text):
    if text == "path":
        return "path"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--mu takes a number or 'path', got {text!r}") from None
    if not value >= 0:
        raise argparse.ArgumentTypeError("--mu must be non-negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="natcd",
        description="l1/l2-penalised GLM regression by natural coordinate descent",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="delimited input file with a header row")
    data.add_argument("--response", default="y", help="name of the response column (default: y)")
    data.add_argument("--delimiter", default=",", help="field delimiter (default: ,)")
    data.add_argument("--family", default="gaussian", choices=["gaussian", "binomial", "poisson"])
    data.add_argument("--standardize", action="store_true",
                      help="scale predictors to unit standard deviation before fitting")

    solve = argparse.ArgumentParser(add_help=False)
    solve.add_argument("--mu", type=_mu_arg, default=None, help="l1 penalty, or 'path'")
    solve.add_argument("--lambda", dest="lam", type=_nonnegative_float, default=0.0,
                       help="l2 penalty (default: 0)")
    solve.add_argument("--eps", type=_positive_float, default=1e-6,
                       help="convergence threshold on coefficient changes (default: 1e-6)")
    solve.add_argument("--path-length", type=int, default=100, help="number of path penalties (default: 100)")
    solve.add_argument("--start", choices=["cold", "warm"], default=None)
    solve.add_argument("--rule", choices=list(UPDATE_RULES), default="linear",
                       help="coordinate update rule (default: linear)")
    solve.add_argument("--workers", type=int, default=1,
                       help="threads for independent cold-start path fits (default: 1)")

    out = argparse.ArgumentParser(add_help=False)
    out.add_argument("--output", choices=["tsv", "structured"], default="structured")
    out.add_argument("--out", default="-", help="output file (default: stdout)")
    out.add_argument("--seed", type=int, default=0)

    sub.add_parser("fit", parents=[data, solve, out], help="fit at one penalty (or a path with --mu path)")
    sub.add_parser("path", parents=[data, solve, out], help="fit along a geometric penalty path")
    sub.add_parser("bench", parents=[data, solve, out], help="time cold against warm starts along a path")
    check = sub.add_parser("check", parents=[data, out], help="certify the fits in a structured report")
    check.add_argument("--report", required=True, help="structured report produced by fit or path")
    check.add_argument("--tolerance", type=_positive_float, default=None,
                       help="violation tolerance (default: 100 * eps of the report)")

    gen = sub.add_parser("generate", parents=[out], help="write a synthetic dataset")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=int, required=True, help="coefficients including the intercept")
    gen.add_argument("--family", default="gaussian", choices=["gaussian", "binomial", "poisson"])
    gen.add_argument("--correlation", type=float, default=0.0)
    gen.add_argument("--sparsity", type=int, default=0)
    gen.add_argument("--min-class-fraction", type=float, default=0.0)
    gen.add_argument("--signal", type=float, default=None)
    gen.add_argument("--delimiter", default=",")
    gen.add_argument("--truth", default=None, help="also write the true coefficients here (TSV)")
    return parser


def _validate(args) -> None:
    if args.command in ("generate", "check"):
        return
    if args.path_length < 2:
        raise UsageError("--path-length must be at least 2")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if args.command == "fit":
        if args.mu is None:
            raise UsageError("fit needs --mu (a number, or 'path')")
        if args.mu != "path" and args.start == "warm":
            raise UsageError("--start warm needs a path of penalties; a single --mu has nothing to warm-start from")
    elif args.command in ("path", "bench"):
        if args.mu not in (None, "path"):
            raise UsageError(f"{args.command} runs a penalty path; drop --mu {args.mu} or use fit")
        if args.command == "bench" and args.start is not None:
            raise UsageError("bench always runs both cold and warm starts; drop --start")


def _config_echo(args) -> dict:
    echo = {
        "data": args.data,
        "response": args.response,
        "delimiter": args.delimiter,
        "family": args.family,
        "standardize": bool(args.standardize),
    }
    for key in ("mu", "lam", "eps", "path_length", "start", "rule"):
        if hasattr(args, key):
            echo["lambda" if key == "lam" else key] = getattr(args, key)
    return echo


def _sparse(beta) -> list:
    return [[int(j), float(beta[j])] for j in np.flatnonzero(beta)]


def _fit_entry(dataset: Dataset, kernel, k, mu, lam, result, runtime, error=None) -> dict:
    entry = {"k": k, "mu": float(mu), "runtime_s": runtime}
    if result is None:
        entry.update({"converged": False, "error": error})
        return entry
    penalty = PenaltySpec.uniform(dataset.p, mu, lam)
    cert = certify(dataset, kernel, penalty, result.beta)
    entry.update({
        "objective": result.objective,
        "converged": bool(result.converged),
        "outer_cycles": result.outer_cycles,
        "active_cycles": result.active_cycles,
        "coordinate_updates": result.coordinate_updates,
        "model_size": model_size(result),
        "coefficients": _sparse(result.beta),
        "certificate": cert.as_dict(),
    })
    if dataset.column_scales is not None:
        entry["coefficients_original_scale"] = _sparse(result.beta / dataset.column_scales)
    return entry


def _dataset_echo(dataset: Dataset) -> dict:
    return {"n": dataset.n, "p": dataset.p, "columns": list(dataset.column_names or [])}


def _load(args) -> Dataset:
    return load(args.data, args.response, args.delimiter, args.family, args.standardize)


def _solve(args, dataset, kernel, config):
    lam = args.lam
    if args.mu != "path" and args.command == "fit":
        penalty = PenaltySpec.uniform(dataset.p, args.mu, lam)
        t0 = time.perf_counter()
        result = fit(dataset, kernel, penalty, config)
        return [_fit_entry(dataset, kernel, None, args.mu, lam, result, time.perf_counter() - t0)]
    path = make_path(dataset, args.path_length)
    mode = args.start or "warm"
    res = run_path(dataset, kernel, lam, path, config, mode, max_workers=args.workers)
    return [
        _fit_entry(dataset, kernel, k + 1, mu, lam, r, t, e)
        for k, (mu, r, t, e) in enumerate(zip(path.values, res.fits, res.runtimes, res.errors))
    ]


def _fit_tsv(fits, dataset) -> str:
    names = dataset.column_names or [str(j) for j in range(dataset.p)]
    lines = ["k\tmu\tobjective\tconverged\tindex\tname\tvalue"]
    for e in fits:
        k = "" if e["k"] is None else e["k"]
        for j, v in e.get("coefficients", []):
            lines.append(f"{k}\t{e['mu']!r}\t{e.get('objective', float('nan'))!r}\t"
                         f"{int(e['converged'])}\t{j}\t{names[j]}\t{v!r}")
    return "\n".join(lines) + "\n"


def cmd_fit(args) -> tuple[dict, str]:
    dataset = _load(args)
    kernel = get_family(args.family)
    config = FitConfig(eps=args.eps, update_rule=args.rule)
    fits = _solve(args, dataset, kernel, config)
    report = {
        "format": REPORT_FORMAT,
        "command": args.command,
        "config": _config_echo(args),
        "dataset": _dataset_echo(dataset),
        "fits": fits,
    }
    return report, _fit_tsv(fits, dataset)


cmd_path = cmd_fit


def cmd_bench(args) -> tuple[dict, str]:
    dataset = _load(args)
    kernel = get_family(args.family)
    config = FitConfig(eps=args.eps, update_rule=args.rule)
    path = make_path(dataset, args.path_length)
    runs = {
        mode: run_path(dataset, kernel, args.lam, path, config, mode, max_workers=args.workers)
        for mode in ("cold", "warm")
    }
    rows = []
    for k, mu in enumerate(path.values):
        row = {"k": k + 1, "mu": float(mu)}
        for mode, res in runs.items():
            r = res.fits[k]
            row[f"{mode}_runtime_s"] = res.runtimes[k]
            row[f"{mode}_objective"] = None if r is None else r.objective
            row[f"{mode}_model_size"] = None if r is None else model_size(r)
            row[f"{mode}_converged"] = bool(r is not None and r.converged)
        rows.append(row)
    report = {
        "format": REPORT_FORMAT,
        "command": "bench",
        "config": _config_echo(args),
        "dataset": _dataset_echo(dataset),
        "per_k": rows,
        "totals": {f"{mode}_runtime_s": float(sum(res.runtimes)) for mode, res in runs.items()},
    }
    cols = ["k", "mu", "cold_runtime_s", "warm_runtime_s", "cold_model_size", "warm_model_size",
            "cold_objective", "warm_objective"]
    lines = ["\t".join(cols)] + ["\t".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols)
                                 for r in rows]
    return report, "\n".join(lines) + "\n"


def cmd_check(args) -> tuple[dict, str]:
    source = json.loads(Path(args.report).read_text(encoding="utf-8"))
    if source.get("format") != REPORT_FORMAT or "fits" not in source:
        raise DataError(f"{args.report} is not a structured fit/path report")
    cfg = source["config"]
    dataset = _load(args)
    kernel = get_family(args.family)
    lam = float(cfg.get("lambda", 0.0))
    eps = float(cfg.get("eps", 1e-6))
    tol = args.tolerance if args.tolerance is not None else 100.0 * eps
    entries, all_ok = [], True
    for e in source["fits"]:
        if "coefficients" not in e:
            entries.append({"k": e.get("k"), "mu": e["mu"], "pass": False, "error": e.get("error")})
            all_ok = False
            continue
        beta = np.zeros(dataset.p)
        for j, v in e["coefficients"]:
            beta[int(j)] = v
        penalty = PenaltySpec.uniform(dataset.p, e["mu"], lam)
        cert = certify(dataset, kernel, penalty, beta)
        audit = threshold_audit_check(audit_fixed_point(dataset, kernel, penalty, beta))
        objective = score(dataset, kernel, penalty, beta)
        rel = abs(objective - e["objective"]) / max(abs(objective), np.finfo(float).tiny)
        ok = cert.passes(tol) and rel <= 1e-10
        all_ok &= ok
        entries.append({
            "k": e.get("k"),
            "mu": e["mu"],
            "certificate": cert.as_dict(),
            "threshold_audit": audit.as_dict(),
            "objective_relative_error": rel,
            "pass": bool(ok),
        })
    report = {
        "format": REPORT_FORMAT,
        "command": "check",
        "config": {**_config_echo(args), "report": args.report, "tolerance": tol},
        "checks": entries,
        "pass": bool(all_ok),
    }
    lines = ["k\tmu\tbox\tcomplementarity\tstationarity\tdisagreements\tobjective_rel_error\tpass"]
    for c in entries:
        cert = c.get("certificate", {})
        lines.append("\t".join([
            str(c["k"]), repr(c["mu"]),
            repr(cert.get("box_violation", float("nan"))),
            repr(cert.get("complementarity_violation", float("nan"))),
            repr(cert.get("stationarity_violation", float("nan"))),
            str(c.get("threshold_audit", {}).get("disagreements", "")),
            repr(c.get("objective_relative_error", float("nan"))),
            str(int(c["pass"])),
        ]))
    return report, "\n".join(lines) + "\n"


def cmd_generate(args) -> tuple[None, None]:
    spec = SyntheticSpec(
        n=args.n, p=args.p, family_id=args.family, correlation=args.correlation,
        sparsity=args.sparsity, seed=args.seed, min_class_fraction=args.min_class_fraction,
        signal=args.signal,
    )
    dataset, beta = generate(spec)
    target = sys.stdout if args.out == "-" else args.out
    if target is sys.stdout:
        import tempfile
        with tempfile.TemporaryDirectory() as tmp:
            tmp_path = Path(tmp) / "data.csv"
            write_csv(dataset, tmp_path, delimiter=args.delimiter)
            sys.stdout.write(tmp_path.read_text(encoding="utf-8"))
    else:
        write_csv(dataset, target, delimiter=args.delimiter)
    if args.truth:
        names = dataset.column_names
        with open(args.truth, "w", encoding="utf-8") as fh:
            fh.write("index\tname\tvalue\n")
            for j, v in enumerate(beta):
                fh.write(f"{j}\t{names[j]}\t{float(v)!r}\n")
    return None, None


COMMANDS = {
    "fit": cmd_fit,
    "path": cmd_path,
    "bench": cmd_bench,
    "check": cmd_check,
    "generate": cmd_generate,
}


def _emit(args, report, tsv) -> None:
    if report is None:
        return
    if args.output == "structured":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        text = tsv
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _validate(args)
    except UsageError as exc:
        parser.error(str(exc))
    try:
        report, tsv = COMMANDS[args.command](args)
        _emit(args, report, tsv)
    except (DataError, PathError, GenerationError, NumericalError, OSError, ValueError) as exc:
        print(f"natcd: error: {exc}", file=sys.stderr)
        return 1
    if args.command == "check" and not report["pass"]:
        print("natcd: check failed: certificate violations above tolerance", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
