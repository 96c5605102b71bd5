"""Suite files: lists of scenarios with expected verdicts, plus figure tables.

A suite is a YAML mapping::

    name: safety-fuzz
    figures: [1, 2]              # optional; cost-model tables to write
    scenarios:
      - generator: safety_fuzz   # or `file: path.yaml`, or `inline: {...}`
        seeds: [0, 1000]         # half-open range, or `seed: 3`
        expect: {safety: pass}

Schema problems are reported with the offending line number.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from . import costmodel, scenarios
from .config import ConfigError, load_scenario, scenario_from_dict
from .oracles import FAIL, NA, PASS, check_delays, check_liveness, check_safety
from .sim import run

GENERATORS = {
    "reference": lambda seed: scenarios.reference().with_seed(seed),
    "safety_fuzz": scenarios.safety_fuzz,
    "liveness": scenarios.liveness,
    "violating": scenarios.violating,
    "steady_state": lambda seed: scenarios.steady_state().with_seed(seed),
    "failover": lambda seed: scenarios.failover().with_seed(seed),
}
CHECKS = {"safety": check_safety, "liveness": check_liveness, "delays": check_delays}
STATUSES = {PASS, FAIL, NA}
BUNDLED = ("paper-figures", "safety-fuzz")

REPORT_COLUMNS = ["scenario", "seed", "check", "status", "expected", "ok", "witness"]


class SuiteError(ConfigError):
    pass


class _LineLoader(yaml.SafeLoader):
    pass


def _mapping_with_line(loader, node, deep=False):
    out = loader.construct_mapping(node, deep=deep)
    out["__line__"] = node.start_mark.line + 1
    return out


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _mapping_with_line)


def _strip(x):
    if isinstance(x, dict):
        return {k: _strip(v) for k, v in x.items() if k != "__line__"}
    if isinstance(x, list):
        return [_strip(v) for v in x]
    return x


@dataclass
class Entry:
    label: str
    make: object           # seed -> Scenario
    seeds: list
    expect: dict
    line: int


@dataclass
class Suite:
    name: str
    entries: list = field(default_factory=list)
    figures: list = field(default_factory=list)


def parse_suite(text: str, base: Path | None = None) -> Suite:
    try:
        raw = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark else "unknown line"
        raise SuiteError(f"{where}: {getattr(exc, 'problem', exc)}") from exc
    if raw is None:
        return Suite("empty")
    if not isinstance(raw, dict):
        raise SuiteError("line 1: a suite must be a mapping")
    line = raw.get("__line__", 1)
    unknown = set(raw) - {"name", "scenarios", "figures", "__line__"}
    if unknown:
        raise SuiteError(f"line {line}: unknown suite keys {sorted(unknown)}")
    suite = Suite(str(raw.get("name", "suite")))
    figs = raw.get("figures") or []
    if not isinstance(figs, list) or any(f not in costmodel.FIGURES for f in figs):
        raise SuiteError(f"line {line}: figures must be a list drawn from 1..7")
    suite.figures = list(figs)
    items = raw.get("scenarios") or []
    if not isinstance(items, list):
        raise SuiteError(f"line {line}: scenarios must be a list")
    for item in items:
        if not isinstance(item, dict):
            raise SuiteError(f"line {line}: each scenario entry must be a mapping")
        suite.entries.append(_entry(item, base))
    return suite


def _entry(item: dict, base: Path | None) -> Entry:
    line = item["__line__"]
    unknown = set(item) - {"generator", "file", "inline", "seeds", "seed", "expect", "__line__"}
    if unknown:
        raise SuiteError(f"line {line}: unknown entry keys {sorted(unknown)}")
    sources = [k for k in ("generator", "file", "inline") if k in item]
    if len(sources) != 1:
        raise SuiteError(f"line {line}: give exactly one of generator, file, inline")
    try:
        if "generator" in item:
            gen = item["generator"]
            if gen not in GENERATORS:
                raise SuiteError(f"line {line}: unknown generator {gen!r}")
            make, label = GENERATORS[gen], gen
        elif "file" in item:
            path = Path(item["file"])
            if base is not None and not path.is_absolute():
                path = base / path
            sc = load_scenario(path)
            make, label = sc.with_seed, sc.name
        else:
            sc = scenario_from_dict(_strip(item["inline"]))
            make, label = sc.with_seed, sc.name
    except (ConfigError, TypeError, OSError) as exc:
        if isinstance(exc, SuiteError):
            raise
        raise SuiteError(f"line {line}: {exc}") from exc
    if "seeds" in item:
        rng = item["seeds"]
        if not (isinstance(rng, list) and len(rng) == 2 and all(isinstance(x, int) for x in rng)):
            raise SuiteError(f"line {line}: seeds must be [start, stop]")
        seeds = list(range(rng[0], rng[1]))
    else:
        seeds = [int(item.get("seed", 0))]
    raw_expect = item.get("expect") or {"safety": PASS}
    if not isinstance(raw_expect, dict):
        raise SuiteError(f"line {line}: expect must be a mapping")
    where = raw_expect.get("__line__", line)
    expect = _strip(raw_expect)
    for check, status in expect.items():
        if check not in CHECKS or status not in STATUSES:
            raise SuiteError(f"line {where}: bad expectation {check}: {status}")
    return Entry(label, make, seeds, expect, line)


def load_suite(spec: str) -> Suite:
    """Parse a suite by bundled name or by path."""
    if spec in BUNDLED:
        text = resources.files("htpaxos").joinpath("suites", f"{spec}.yaml").read_text()
        return parse_suite(text)
    path = Path(spec)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SuiteError(f"cannot read suite {spec}: {exc}") from exc
    return parse_suite(text, path.parent)


@dataclass
class SuiteResult:
    rows: list
    files: dict            # file name -> text

    @property
    def ok(self) -> bool:
        return all(r[5] for r in self.rows)

    def report_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([*r[:5], "yes" if r[5] else "no", "" if r[6] is None else repr(r[6])])
        return buf.getvalue()

    def report_text(self) -> str:
        lines = []
        for name, seed, check, status, expected, ok, witness in self.rows:
            if not ok:
                lines.append(f"UNEXPECTED {name} seed={seed} {check}: {status} (expected {expected}) {witness!r}")
        total = len(self.rows)
        good = sum(1 for r in self.rows if r[5])
        lines.append(f"{good}/{total} verdicts as expected")
        if self.files:
            lines.append("tables: " + ", ".join(sorted(self.files)))
        return "\n".join(lines) + "\n"


def run_suite(suite: Suite) -> SuiteResult:
    rows = []
    for entry in suite.entries:
        for seed in entry.seeds:
            trace = run(entry.make(seed))
            for check, expected in entry.expect.items():
                v = CHECKS[check](trace)
                rows.append((entry.label, seed, check, v.status, expected, v.status == expected, v.witness))
    files = {f"fig{f}.csv": costmodel.figure_csv(f) for f in suite.figures}
    return SuiteResult(rows, files)


def write_result(result: SuiteResult, out: Path, name: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{name}-report.csv").write_text(result.report_csv())
    (out / f"{name}-report.txt").write_text(result.report_text())
    for fname, text in result.files.items():
        (out / fname).write_text(text)
