"""Source, sink and intersection sets, plus the seeds and methods file codecs.

The recursive queries are evaluated semi-naively: each round applies the
step relation only to the members derived in the previous round.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Hashable, Iterable, Optional, TypeVar

from .facts import CallEdge
from .tir import builtins
from .tir.model import MethodSig, SignatureError, parse_sig, sig_sort_key

T = TypeVar("T", bound=Hashable)


def fixpoint(
    base: Iterable[T],
    step: Callable[[set[T]], Iterable[T]],
    universe: Optional[set[T]] = None,
    on_round: Optional[Callable[[set[T]], None]] = None,
) -> set[T]:
    """Least set containing ``base`` and closed under ``step``.

    ``step`` receives only the delta of the previous round. Members outside
    ``universe`` (when given) are never derived.
    """
    result = {x for x in base if universe is None or x in universe}
    delta = set(result)
    while delta:
        if on_round is not None:
            on_round(delta)
        derived = step(delta)
        delta = {x for x in derived if x not in result and (universe is None or x in universe)}
        result |= delta
    return result


def _pairs(edges: Iterable) -> list[tuple]:
    out = []
    for e in edges:
        if isinstance(e, CallEdge):
            out.append((e.caller, e.callee))
        else:
            out.append(tuple(e))
    return out


def _index(pairs: list[tuple]) -> tuple[dict, dict]:
    succ: dict = defaultdict(set)
    pred: dict = defaultdict(set)
    for x, y in pairs:
        succ[x].add(y)
        pred[y].add(x)
    return succ, pred


def _seed_list(seeds, kind: str) -> set:
    if isinstance(seeds, SeedConfig):
        return set(getattr(seeds, kind))
    return set(seeds)


def _excluded(node, callers: set) -> bool:
    """Intrinsics enter the sets only as callers (of application callbacks)."""
    return node not in callers and isinstance(node, MethodSig) and builtins.is_intrinsic(node)


def compute_source_set(edges: Iterable, seeds, caller_closure: bool = False) -> set:
    """Callers of source seeds, closed over callees.

    ``seeds`` is a SeedConfig or an iterable of source seeds. With
    ``caller_closure`` the set is also closed over callers.
    """
    pairs = _pairs(edges)
    succ, pred = _index(pairs)
    sources = _seed_list(seeds, "sources")
    callers = set(succ)
    base = {x for x, y in pairs if y in sources and not _excluded(x, callers)}

    def step(delta: set) -> set:
        out = {c for y in delta for c in succ.get(y, ())}
        if caller_closure:
            out |= {c for y in delta for c in pred.get(y, ())}
        return {c for c in out if not _excluded(c, callers)}

    return fixpoint(base, step)


def compute_sink_set(edges: Iterable, seeds) -> set:
    """Callers of sink seeds, closed over callers.

    ``seeds`` is a SeedConfig or an iterable of sink seeds.
    """
    pairs = _pairs(edges)
    _, pred = _index(pairs)
    seed_set = _seed_list(seeds, "sinks")
    base = {x for x, y in pairs if y in seed_set}
    return fixpoint(base, lambda delta: {c for y in delta for c in pred.get(y, ())})


@dataclass(frozen=True)
class ScopeResult:
    source: frozenset
    sink: frozenset
    intersection: frozenset


def compute_intersection(src: Iterable, snk: Iterable) -> ScopeResult:
    src_f, snk_f = frozenset(src), frozenset(snk)
    return ScopeResult(src_f, snk_f, src_f & snk_f)


# -- seeds ------------------------------------------------------------------

class SeedsError(ValueError):
    pass


@dataclass(frozen=True)
class SeedConfig:
    sources: tuple[MethodSig, ...] = ()
    sinks: tuple[MethodSig, ...] = ()

    def __post_init__(self) -> None:
        if len(set(self.sources)) != len(self.sources) or len(set(self.sinks)) != len(self.sinks):
            raise SeedsError("duplicate seed")
        if len(self.sources) > 64:
            raise SeedsError("at most 64 source seeds fit in a taint mask")

    def label_bit(self, sig: MethodSig) -> Optional[int]:
        try:
            return self.sources.index(sig)
        except ValueError:
            return None


DEFAULT_SEEDS = SeedConfig(
    sources=(builtins.READ, builtins.READ_BUF),
    sinks=(builtins.WRITE, builtins.EXEC),
)


def parse_seeds(text: str) -> SeedConfig:
    sections: dict[str, list[MethodSig]] = {"sources": [], "sinks": []}
    current: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in sections:
                raise SeedsError(f"line {lineno}: unknown section [{current}]")
            continue
        if current is None:
            raise SeedsError(f"line {lineno}: signature outside a [sources]/[sinks] section")
        try:
            sig = parse_sig(line)
        except SignatureError:
            raise SeedsError(f"line {lineno}: malformed signature {line!r}") from None
        if sig in sections[current]:
            raise SeedsError(f"line {lineno}: duplicate seed {sig}")
        sections[current].append(sig)
    try:
        return SeedConfig(tuple(sections["sources"]), tuple(sections["sinks"]))
    except SeedsError as exc:
        raise SeedsError(str(exc)) from None


def emit_seeds(seeds: SeedConfig) -> str:
    lines = ["[sources]", *map(str, seeds.sources), "", "[sinks]", *map(str, seeds.sinks)]
    return "\n".join(lines) + "\n"


# -- methods file -----------------------------------------------------------

class MethodsFileError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class MethodsFile:
    methods: frozenset[MethodSig] = frozenset()

    def sorted(self) -> list[MethodSig]:
        return sorted(self.methods, key=sig_sort_key)


def emit_methods_file(m: MethodsFile | Iterable[MethodSig]) -> str:
    methods = m.methods if isinstance(m, MethodsFile) else frozenset(m)
    return "".join(f"{s}\n" for s in sorted({str(s) for s in methods}))


def parse_methods_file(text: str) -> MethodsFile:
    out = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            out.add(parse_sig(line))
        except SignatureError:
            raise MethodsFileError(f"malformed signature {line!r}", lineno) from None
    return MethodsFile(frozenset(out))
