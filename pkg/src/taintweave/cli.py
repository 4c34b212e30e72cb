"""Command-line frontend: analyze, instrument, run, bench, check."""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .facts import FactError, dump_facts
from .instrument import InstrumentError, all_methods_set, instrument_program
from .pipeline import (
    CaseResult,
    analyze,
    check_case,
    load_corpus,
    load_seeds,
    overhead,
    instrument_levels,
)
from .scope import MethodsFile, MethodsFileError, SeedsError, emit_methods_file, parse_methods_file
from .tir import (
    InstrumentSet,
    ParseError,
    SignatureError,
    emit_artifact,
    parse_artifact,
    parse_program,
    parse_sig,
    validate_program,
)
from .tir.model import InstrumentedProgram
from .vm import RunConfig, run

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION, EXIT_RUN = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors share the input-error code
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_program(path: str):
    program = parse_program(_read(path))
    errors = validate_program(program)
    if errors:
        raise UsageError(f"{path}: invalid program:\n" + "\n".join(f"  {e}" for e in errors))
    return program


# -- analyze ----------------------------------------------------------------

def cmd_analyze(args) -> int:
    program = _load_program(args.program)
    seeds = load_seeds(args.seeds)
    a = analyze(program, seeds, args.source_caller_closure, args.rule1_global, not args.no_extras)
    if args.dump_facts:
        atomic_write(args.dump_facts, dump_facts(a.facts))
    text = emit_methods_file(MethodsFile(a.iset.methods))
    if args.out:
        atomic_write(args.out, text)
    elif not args.explain and not args.json:
        sys.stdout.write(text)
    for want in args.explain or ():
        if want == "all":
            for s in a.iset.sorted():
                print(f"{s}  rule={a.iset.provenance.get(s, 'intersection')}")
            continue
        sig = parse_sig(want)
        print(f"{sig}  rule={a.iset.provenance.get(sig, 'none') if sig in a.iset else 'none'}")
    if args.json:
        print(json.dumps({
            "source": sorted(map(str, a.scope.source)),
            "sink": sorted(map(str, a.scope.sink)),
            "intersection": sorted(map(str, a.scope.intersection)),
            "instrument": {str(s): a.iset.provenance.get(s, "") for s in a.iset.sorted()},
        }, indent=2))
    return EXIT_OK


# -- instrument -------------------------------------------------------------

def cmd_instrument(args) -> int:
    program = _load_program(args.program)
    if args.full:
        iset = all_methods_set(program)
    elif args.none:
        iset = InstrumentSet()
    else:
        if not args.methods:
            raise UsageError("a methods file is required unless --full or --none is given")
        mf = parse_methods_file(_read(args.methods))
        known = program.method_map()
        unknown = sorted(str(s) for s in mf.methods if s not in known)
        if unknown:
            raise UsageError("unknown signatures in methods file:\n" + "\n".join(f"  {s}" for s in unknown))
        iset = InstrumentSet(mf.methods)
    ip = instrument_program(program, iset)
    _emit(emit_artifact(ip), args.out)
    return EXIT_OK


# -- run --------------------------------------------------------------------

def parse_inputs(text: Optional[str]) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"--input expects comma-separated integers, got {text!r}") from None


def cmd_run(args) -> int:
    artifact = parse_artifact(_read(args.program))
    program = artifact.program if isinstance(artifact, InstrumentedProgram) else artifact
    errors = validate_program(program)
    if errors:
        raise UsageError(f"{args.program}: invalid program:\n" + "\n".join(f"  {e}" for e in errors))
    cfg = RunConfig(
        inputs=parse_inputs(args.input),
        seeds=load_seeds(args.seeds),
        budget=args.budget,
        trace_calls=args.trace_calls,
    )
    report = run(artifact, cfg)
    _emit(json.dumps(report.to_dict(), indent=2 if args.json else None) + "\n", args.out)
    if report.halted != "normal":
        return EXIT_RUN
    if args.fail_on_violation and report.violations:
        return EXIT_VIOLATION
    return EXIT_OK


# -- bench ------------------------------------------------------------------

@dataclass(frozen=True)
class BenchRow:
    name: str
    none: int
    partial: int
    full: int
    methods_total: int
    methods_partial: int

    @property
    def overhead_partial(self) -> float:
        return overhead(self.partial, self.none)

    @property
    def overhead_full(self) -> float:
        return overhead(self.full, self.none)


BENCH_COLUMNS = ("program", "none", "partial", "partial_pct", "full", "full_pct", "methods", "instrumented")


def bench_rows(corpus: str, seeds, iterations: int) -> tuple[list[BenchRow], list[str]]:
    rows, failures = [], []
    for case in load_corpus(corpus):
        try:
            a = analyze(case.program, seeds)
            levels = instrument_levels(case.program, a.iset)
            counts = {}
            for level, ip in levels.items():
                for _ in range(iterations):
                    rep = run(ip, RunConfig(inputs=case.inputs, seeds=seeds))
                if rep.halted != "normal":
                    raise RuntimeError(f"{level}: {rep.halted}: {rep.error}")
                counts[level] = rep.instructions
        except Exception as exc:
            failures.append(f"{case.name}: {exc}")
            continue
        rows.append(BenchRow(case.name, counts["none"], counts["partial"], counts["full"],
                             len(case.program.methods()), len(a.iset)))
    return rows, failures


def _cells(r: BenchRow) -> list[str]:
    return [r.name, str(r.none), str(r.partial), f"{r.overhead_partial:.2f}", str(r.full),
            f"{r.overhead_full:.2f}", str(r.methods_total), str(r.methods_partial)]


def bench_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for r in rows:
        w.writerow(_cells(r))
    return buf.getvalue()


def bench_text(rows: list[BenchRow]) -> str:
    table = [list(BENCH_COLUMNS)] + [_cells(r) for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(BENCH_COLUMNS))]
    lines = []
    for row in table:
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


def _row(cells: list[str]) -> BenchRow:
    name, none, partial, _, full, _, total, inst = cells
    return BenchRow(name, int(none), int(partial), int(full), int(total), int(inst))


def parse_bench_csv(text: str) -> list[BenchRow]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != BENCH_COLUMNS:
        raise ValueError("not a bench CSV")
    return [_row(cells) for cells in reader if cells]


def parse_bench_text(text: str) -> list[BenchRow]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or tuple(lines[0].split()) != BENCH_COLUMNS:
        raise ValueError("not a bench table")
    return [_row(ln.split()) for ln in lines[1:]]


def cmd_bench(args) -> int:
    if args.iterations < 1:
        raise UsageError("--iterations must be at least 1")
    rows, failures = bench_rows(args.corpus, load_seeds(args.seeds), args.iterations)
    if args.csv:
        atomic_write(args.csv, bench_csv(rows))
    if args.json:
        text = json.dumps([{
            "program": r.name, "none": r.none, "partial": r.partial, "full": r.full,
            "overhead_partial": r.overhead_partial, "overhead_full": r.overhead_full,
            "methods": r.methods_total, "instrumented": r.methods_partial,
        } for r in rows], indent=2) + "\n"
    else:
        text = bench_text(rows)
    _emit(text, args.out)
    for f in failures:
        print(f"error: {f}", file=sys.stderr)
    return EXIT_RUN if failures else EXIT_OK


# -- check ------------------------------------------------------------------

CHECKS = ("linker", "detection", "semantics", "overhead", "sparse")


def check_matrix(results: list[CaseResult]) -> str:
    width = max([len("program")] + [len(r.name) for r in results])
    lines = [("program".ljust(width) + "  " + "  ".join(c.ljust(9) for c in CHECKS)).rstrip()]
    for r in results:
        marks = []
        for c in CHECKS:
            v = r.checks.get(c)
            marks.append(("-" if v is None else "pass" if v else "FAIL").ljust(9))
        lines.append(r.name.ljust(width) + "  " + "  ".join(marks).rstrip())
    passed = sum(r.ok for r in results)
    lines.append(f"{passed}/{len(results)} programs pass")
    return "\n".join(lines) + "\n"


def cmd_check(args) -> int:
    seeds = load_seeds(args.seeds)
    results = [check_case(c, seeds, extras=not args.no_extras) for c in load_corpus(args.corpus)]
    if args.json:
        text = json.dumps([{"program": r.name, "checks": r.checks, "notes": r.notes} for r in results], indent=2) + "\n"
    else:
        text = check_matrix(results)
        for r in results:
            for c, ok in r.checks.items():
                if not ok:
                    text += f"{r.name}: {c} failed\n"
            for n in r.notes:
                text += f"  {n}\n"
    _emit(text, args.out)
    return EXIT_OK if all(r.ok for r in results) else EXIT_VIOLATION


# -- entry ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seeds", help="seeds file with [sources] and [sinks] sections")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    p = _Parser(prog="taintweave", description="Partial taint-tracking instrumentation for TIR programs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", parents=[common], help="compute the methods to instrument")
    a.add_argument("program")
    a.add_argument("--explain", action="append", metavar="SIG", help="print why SIG is instrumented ('all' for every method)")
    a.add_argument("--dump-facts", metavar="PATH", help="write the extracted facts, one per line")
    a.add_argument("--source-caller-closure", action="store_true", help="also close the source set over callers")
    a.add_argument("--rule1-global", action="store_true", help="unscoped array-field rule")
    a.add_argument("--no-extras", action="store_true", help="skip the additional-method rules")
    a.set_defaults(func=cmd_analyze)

    i = sub.add_parser("instrument", parents=[common], help="rewrite a program for a methods file")
    i.add_argument("program")
    i.add_argument("methods", nargs="?")
    mode = i.add_mutually_exclusive_group()
    mode.add_argument("--full", action="store_true", help="instrument every application method")
    mode.add_argument("--none", action="store_true", help="instrument nothing")
    i.set_defaults(func=cmd_instrument)

    r = sub.add_parser("run", parents=[common], help="execute a program or instrumented artifact")
    r.add_argument("program")
    r.add_argument("--input", help="comma-separated input values")
    r.add_argument("--budget", type=int, default=10**8)
    r.add_argument("--fail-on-violation", action="store_true")
    r.add_argument("--trace-calls", action="store_true")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", parents=[common], help="instruction counts for none/partial/full")
    b.add_argument("corpus")
    b.add_argument("--iterations", type=int, default=10)
    b.add_argument("--csv", metavar="PATH")
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("check", parents=[common], help="corpus acceptance matrix")
    c.add_argument("corpus")
    c.add_argument("--no-extras", action="store_true", help="skip the additional-method rules")
    c.set_defaults(func=cmd_check)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError, SignatureError, SeedsError, MethodsFileError, FactError, InstrumentError) as exc:
        print(f"taintweave: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
