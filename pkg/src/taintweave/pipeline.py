"""End-to-end helpers: analyze, instrument at three levels, check a corpus."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .extras import close_instrument_set
from .facts import FactBase, build_facts
from .instrument import all_methods_set, instrument_program
from .scope import (
    DEFAULT_SEEDS,
    ScopeResult,
    SeedConfig,
    compute_intersection,
    compute_sink_set,
    compute_source_set,
    parse_seeds,
)
from .tir import parse_program, validate_program
from .tir.model import InstrumentedProgram, InstrumentSet, Program
from .vm import RunConfig, RunReport, run

LEVELS = ("none", "partial", "full")


@dataclass
class Analysis:
    facts: FactBase
    scope: ScopeResult
    iset: InstrumentSet


def analyze(
    program: Program,
    seeds: SeedConfig = DEFAULT_SEEDS,
    caller_closure: bool = False,
    rule1_global: bool = False,
    extras: bool = True,
) -> Analysis:
    fb = build_facts(program)
    src = compute_source_set(fb.edges, seeds, caller_closure)
    snk = compute_sink_set(fb.edges, seeds)
    scope = compute_intersection(src, snk)
    iset = close_instrument_set(fb, fb.edges, scope, rule1_global=rule1_global, extras=extras)
    return Analysis(fb, scope, iset)


def instrument_levels(program: Program, iset: InstrumentSet) -> dict[str, InstrumentedProgram]:
    return {
        "none": instrument_program(program, InstrumentSet()),
        "partial": instrument_program(program, iset),
        "full": instrument_program(program, all_methods_set(program)),
    }


@dataclass
class CorpusCase:
    name: str
    program: Program
    inputs: tuple[int, ...]
    expected: list[tuple[str, int, int]]
    scope_sparse: bool = False
    extras_required: bool = False


def load_corpus(directory: Path | str) -> list[CorpusCase]:
    cases = []
    for path in sorted(Path(directory).glob("*.tir")):
        meta_path = path.with_suffix(".expect.json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        cases.append(CorpusCase(
            name=path.stem,
            program=parse_program(path.read_text(encoding="utf-8")),
            inputs=tuple(meta.get("input", ())),
            expected=[(v["sink"], v["mask"], v["ordinal"]) for v in meta.get("violations", [])],
            scope_sparse=bool(meta.get("scope_sparse", False)),
            extras_required=bool(meta.get("extras_required", False)),
        ))
    return cases


def corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"


def overhead(x: int, none: int) -> float:
    return (x - none) / none * 100.0 if none else 0.0


@dataclass
class CaseResult:
    name: str
    checks: dict[str, bool] = field(default_factory=dict)
    reports: dict[str, RunReport] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    methods_total: int = 0
    methods_partial: int = 0
    intersection_size: int = 0

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def counts(self) -> dict[str, int]:
        return {k: r.instructions for k, r in self.reports.items()}


def check_case(case: CorpusCase, seeds: SeedConfig = DEFAULT_SEEDS, extras: bool = True) -> CaseResult:
    res = CaseResult(case.name)
    program = case.program
    errors = validate_program(program)
    if errors:
        res.checks["valid"] = False
        res.notes.append(f"invalid program: {errors[0]}")
        return res
    a = analyze(program, seeds, extras=extras)
    res.methods_total = len(program.methods())
    res.methods_partial = len(a.iset)
    res.intersection_size = len(a.scope.intersection)
    levels = instrument_levels(program, a.iset)

    linker = True
    for level, ip in levels.items():
        errs = validate_program(ip.program)
        if errs:
            linker = False
            res.notes.append(f"{level}: {errs[0]}")
    cfg = RunConfig(inputs=case.inputs, seeds=seeds)
    for level, ip in levels.items():
        rep = run(ip, cfg)
        res.reports[level] = rep
        if rep.halted != "normal":
            linker = False
            res.notes.append(f"{level}: halted {rep.halted}: {rep.error}")
    res.checks["linker"] = linker

    keys = {k: r.violation_keys() for k, r in res.reports.items()}
    res.checks["detection"] = keys["partial"] == keys["full"] == case.expected
    if not res.checks["detection"]:
        res.notes.append(f"violations partial={keys['partial']} full={keys['full']} expected={case.expected}")
    outs = [r.output for r in res.reports.values()]
    res.checks["semantics"] = all(o == outs[0] for o in outs)

    c = res.counts()
    res.checks["overhead"] = c["none"] <= c["partial"] <= c["full"]
    if case.scope_sparse:
        op, of = overhead(c["partial"], c["none"]), overhead(c["full"], c["none"])
        res.checks["sparse"] = op <= 0.7 * of
    return res


def check_corpus(cases: list[CorpusCase], seeds: SeedConfig = DEFAULT_SEEDS, extras: bool = True) -> list[CaseResult]:
    return [check_case(c, seeds, extras) for c in cases]


def load_seeds(path: Optional[str]) -> SeedConfig:
    if path is None:
        return DEFAULT_SEEDS
    return parse_seeds(Path(path).read_text(encoding="utf-8"))
