"""``paroracle`` command-line front end.

Exit codes: 0 ok, 1 infeasible or no feasible configuration, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from . import __version__
from .calibration import Pattern, fit_alpha_beta, fit_tiers, load_benchmarks, load_profile
from .cost import load_system, serialize_system
from .data_files import bundled_files, data_path
from .errors import OracleError
from .model_ir import load_model
from .report import compare, emit_breakdown, format_comparison, load_breakdown, load_measured, recommend
from .strategies import format_strategy, parse_strategy, predict

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2


class _InputError(Exception):
    pass


def resolve(path: str, suffix: str = "") -> Path:
    """A file path, or a bundled data file by name with or without its suffix."""
    candidate = Path(path)
    if candidate.exists():
        return candidate
    for name in (path, path + suffix) if suffix else (path,):
        try:
            return data_path(name)
        except FileNotFoundError:
            pass
    raise _InputError(f"no such file: {path}")


def _read(path: str, suffix: str = "") -> str:
    return resolve(path, suffix).read_text(encoding="utf-8")


def _inputs(args):
    model = load_model(resolve(args.model, ".model"))
    system = load_system(resolve(args.system, ".system"))
    profile = load_profile(resolve(args.timings, ".timings.csv"), system.tiers)
    profile.check_covers(layer.name for layer in model.layers)
    return model, system, profile


def cmd_predict(args) -> int:
    model, system, profile = _inputs(args)
    cfg = parse_strategy(args.strategy)
    pred = predict(model, system, profile, cfg, args.memory_cap)
    sys.stdout.write(emit_breakdown(pred, args.format, args.epochs))
    return EXIT_OK if pred.feasible else EXIT_INFEASIBLE


def cmd_recommend(args) -> int:
    model, system, profile = _inputs(args)
    rec = recommend(model, system, profile, args.budget, args.memory_cap, args.dense)
    if args.format == "json":
        doc = {
            "ranked": [
                {"config": format_strategy(c), "p": p.p_used, "total_per_epoch_s": p.total, "mem_peak_bytes": p.mem_peak}
                for c, p in rec.ranked
            ],
            "rejected": [
                {"config": format_strategy(r.config), "reasons": [str(x) for x in r.reasons]} for r in rec.rejected
            ],
        }
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        out = sys.stdout
        shown = rec.ranked if args.top is None else rec.ranked[: args.top]
        out.write(f"{len(rec.ranked)} feasible, {len(rec.rejected)} rejected (budget {args.budget} PEs)\n")
        for rank, (cfg, pred) in enumerate(shown, start=1):
            out.write(
                f"{rank:>4}  {format_strategy(cfg):<32} p={pred.p_used:<5} "
                f"{pred.total:>12.6g} s/epoch  {pred.mem_peak / 1e9:>8.4g} GB\n"
            )
        if args.rejected:
            for rej in rec.rejected:
                why = "; ".join(str(r) for r in rej.reasons)
                out.write(f"  rejected {format_strategy(rej.config)}: {why}\n")
    return EXIT_OK if rec.ranked else EXIT_INFEASIBLE


def cmd_compare(args) -> int:
    predicted = load_breakdown(_read(args.prediction))
    phases, total = load_measured(_read(args.measured))
    sys.stdout.write(format_comparison(compare(predicted, phases, total)))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    samples = load_benchmarks(_read(args.benchmarks, ".csv"))
    if args.system:
        system = load_system(resolve(args.system, ".system"))
        tiers = fit_tiers(samples, args.pattern, system.tiers)
        sys.stdout.write(serialize_system(replace(system, tiers=tuple(tiers))))
    else:
        alpha, beta = fit_alpha_beta(samples, args.pattern)
        sys.stdout.write(f"alpha={alpha!r} beta={beta!r}\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .sim.verify import run_verification

    report = run_verification(args.instances, args.seed, exact=args.exact)
    print(
        f"{report.instances} instances, {report.checks} checks, {report.skipped} skipped, "
        f"{len(report.mismatches)} mismatches in {report.seconds:.1f} s"
    )
    for mismatch in report.mismatches[:20]:
        print(f"  {mismatch}")
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def cmd_list(args) -> int:
    print("\n".join(bundled_files()))
    return EXIT_OK


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="paroracle", description="Analytical cost oracle for parallel CNN training.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p):
        p.add_argument("--model", required=True, help="model descriptor file or bundled name")
        p.add_argument("--system", required=True, help="system descriptor file or bundled name")
        p.add_argument("--timings", required=True, help="per-layer timing CSV or bundled name")
        p.add_argument("--memory-cap", type=float, default=None, metavar="BYTES", help="override PE memory capacity")

    p = sub.add_parser("predict", help="predict one configuration")
    inputs(p)
    p.add_argument("--strategy", required=True, help="e.g. serial, data:p=8, ds:p1=4,pw=2,ph=2")
    p.add_argument("--epochs", type=_positive_int, default=None)
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("recommend", help="rank every configuration within a PE budget")
    inputs(p)
    p.add_argument("--budget", type=_positive_int, required=True, metavar="P")
    p.add_argument("--dense", action="store_true", help="sweep every p, not only powers of two")
    p.add_argument("--top", type=_positive_int, default=None, help="show only the best N")
    p.add_argument("--rejected", action="store_true", help="also list rejected configurations")
    p.add_argument("--format", choices=("table", "json"), default="table")
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("compare", help="projection accuracy of a prediction against a measured log")
    p.add_argument("--prediction", required=True, help="csv or json output of predict")
    p.add_argument("--measured", required=True, help="phase,seconds CSV (per iteration)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="fit alpha/beta from benchmark timings")
    p.add_argument("--benchmarks", required=True, help="pattern,p,bytes,seconds CSV")
    p.add_argument("--pattern", choices=[x.value for x in Pattern], required=True)
    p.add_argument("--system", default=None, help="refit each tier of this system and print it")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("verify", help="check the closed forms against the simulators")
    p.add_argument("--instances", type=_positive_int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="use exact rational arithmetic")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("list", help="list bundled model, system and timing files")
    p.set_defaults(func=cmd_list)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = _warn
            return args.func(args)
    except (OracleError, _InputError, ValueError, OSError) as exc:
        print(f"paroracle: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _warn(message, category, filename, lineno, file=None, line=None):
    print(f"paroracle: warning: {message}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
