"""Command line: run scenarios, suites and figure sweeps; re-check traces."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import costmodel, scenarios
from .config import ConfigError, load_scenario
from .oracles import FAIL, check_delays, check_liveness, check_safety
from .sim import Trace, run
from .suite import load_suite, run_suite, write_result

BUILTIN = {
    "reference": scenarios.reference,
    "failover": scenarios.failover,
    "steady-state": scenarios.steady_state,
}


def _emit(text: str, out: Path | None, name: str):
    if out is None:
        sys.stdout.write(text)
    else:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _verdicts(trace):
    return [check_safety(trace), check_liveness(trace), check_delays(trace)]


def _print_verdicts(verdicts, fmt):
    if fmt == "csv":
        print("check,status,witness")
        for v in verdicts:
            print(f"{v.check},{v.status},{'' if v.witness is None else repr(v.witness)}")
    else:
        for v in verdicts:
            print(v.line())


def cmd_run(args) -> int:
    if args.config:
        sc = load_scenario(args.config)
    else:
        sc = BUILTIN[args.builtin]()
    if args.seed is not None:
        sc = sc.with_seed(args.seed)
    trace = run(sc)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.jsonl").write_text(trace.to_jsonl())
        (out / "counters.csv").write_text(trace.counters_csv())
    verdicts = _verdicts(trace)
    _print_verdicts(verdicts, args.format)
    return 1 if any(v.status == FAIL for v in verdicts[:2]) else 0


def cmd_suite(args) -> int:
    suite = load_suite(args.spec)
    result = run_suite(suite)
    if args.out:
        write_result(result, Path(args.out), suite.name)
    sys.stdout.write(result.report_csv() if args.format == "csv" else result.report_text())
    return 0 if result.ok else 1


def cmd_figures(args) -> int:
    figs = [args.figure] if args.figure else sorted(costmodel.FIGURES)
    sweep = tuple(args.sweep) if args.sweep else costmodel.DEFAULT_SWEEP
    out = Path(args.out) if args.out else None
    for f in figs:
        _emit(costmodel.figure_csv(f, sweep), out, f"fig{f}.csv")
    return 0


def cmd_check(args) -> int:
    try:
        trace = Trace.from_jsonl(Path(args.trace).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read trace {args.trace}: {exc}") from exc
    verdicts = _verdicts(trace)
    _print_verdicts(verdicts, args.format)
    return 1 if any(v.status == FAIL for v in verdicts[:2]) else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="htpaxos", description=__doc__)
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--out", help="directory for output files")
        p.add_argument("--format", choices=("csv", "text"), default="text")

    p = sub.add_parser("run", help="simulate one scenario and check it")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="scenario YAML file")
    src.add_argument("--builtin", choices=sorted(BUILTIN), default="reference")
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run a suite file or a bundled suite")
    p.add_argument("spec", help="suite YAML path, or one of: paper-figures, safety-fuzz")
    common(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("figures", help="write cost-model figure tables as CSV")
    p.add_argument("--figure", type=int, choices=sorted(costmodel.FIGURES))
    p.add_argument("--sweep", type=int, nargs="+", help="request rates n (default 1e5..1e6)")
    common(p)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("check", help="re-run the oracles on an exported trace")
    p.add_argument("trace")
    common(p)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
