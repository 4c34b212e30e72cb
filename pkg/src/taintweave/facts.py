"""Relational facts about a program and the flattened caller -> callee graph."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

from .tir import builtins
from .tir.hierarchy import Hierarchy
from .tir.model import Instr, MethodDef, MethodSig, Program, sig_sort_key
from .tir.regtypes import RegTypeError, infer_register_types
from .tir.validate import validate_program


class FactError(ValueError):
    pass


@dataclass(frozen=True)
class InvocationFact:
    caller: MethodSig
    index: int  # position among the caller's instructions
    kind: str  # static | virtual | dynamic
    declared: Optional[MethodSig] = None

    @property
    def site_id(self) -> str:
        return f"{self.caller}#{self.index}"


@dataclass(frozen=True)
class CallEdge:
    caller: MethodSig
    callee: MethodSig

    def __str__(self) -> str:
        return f"{self.caller} -> {self.callee}"


@dataclass(frozen=True)
class OverrideFact:
    sub: MethodSig
    sup: MethodSig


@dataclass(frozen=True)
class ArrayFieldWriteFact:
    method: MethodSig
    owner_class: str
    field: str


@dataclass(frozen=True)
class FieldAccessFact:
    method: MethodSig
    owner_class: str
    field: str
    write: bool


@dataclass(frozen=True)
class MultiDimBoundaryFact:
    callee: MethodSig
    via: str  # param | return


@dataclass
class FactBase:
    invocations: list[InvocationFact] = field(default_factory=list)
    edges: set[CallEdge] = field(default_factory=set)
    overrides: set[OverrideFact] = field(default_factory=set)
    array_field_writes: set[ArrayFieldWriteFact] = field(default_factory=set)
    field_accesses: set[FieldAccessFact] = field(default_factory=set)
    multidim_boundaries: set[MultiDimBoundaryFact] = field(default_factory=set)
    stdlib_called: set[MethodSig] = field(default_factory=set)
    intrinsic_callees: set[MethodSig] = field(default_factory=set)
    # virtual site -> its CHA targets, filled by flattening
    site_targets: dict[InvocationFact, frozenset[MethodSig]] = field(default_factory=dict)

    def sorted_edges(self) -> list[CallEdge]:
        return sorted(self.edges, key=lambda e: (str(e.caller), str(e.callee)))


def _sk(sig: MethodSig) -> str:
    return str(sig)


def extract_facts(program: Program) -> FactBase:
    errors = validate_program(program)
    if errors:
        raise FactError(f"cannot extract facts from an invalid program: {errors[0]}")
    h = Hierarchy(program)
    fb = FactBase()
    for m in program.methods():
        _method_facts(m, h, fb)
        for sup in h.overridden(m):
            fb.overrides.add(OverrideFact(m.sig, sup))
        for t in m.sig.params:
            if t.is_array and t.dims > 1:
                fb.multidim_boundaries.add(MultiDimBoundaryFact(m.sig, "param"))
        if m.sig.ret is not None and m.sig.ret.is_array and m.sig.ret.dims > 1:
            fb.multidim_boundaries.add(MultiDimBoundaryFact(m.sig, "return"))
    return fb


def _method_facts(m: MethodDef, h: Hierarchy, fb: FactBase) -> None:
    kinds = {"scall": "static", "vcall": "virtual", "dyncall": "dynamic"}
    for i, ins in enumerate(m.instructions()):
        if ins.op in kinds:
            fb.invocations.append(InvocationFact(m.sig, i, kinds[ins.op], ins.sig))
        elif ins.op in ("get", "put"):
            owner, ftype = h.resolve_field(ins.fref.cls, ins.fref.name)  # type: ignore[misc]
            write = ins.op == "put"
            fb.field_accesses.add(FieldAccessFact(m.sig, owner, ins.fref.name, write))
            if write and ftype.is_array:
                fb.array_field_writes.add(ArrayFieldWriteFact(m.sig, owner, ins.fref.name))


def cha_targets(program: Program, declared: MethodSig, h: Optional[Hierarchy] = None) -> set[MethodSig]:
    """Declared method plus every override in transitive subclasses of its owner."""
    h = h or Hierarchy(program)
    if not h.resolves(declared):
        raise FactError(f"unresolved call target {declared}")
    out = {declared}
    for sub in h.subclasses(declared.owner):
        cdef = h.classes[sub]
        cand = cdef.method(declared.with_owner(sub))
        if cand is not None and not cand.static:
            out.add(cand.sig)
    return out


def string_constants(m: MethodDef) -> dict[int, frozenset[str]]:
    """Registers whose every definition in ``m`` is a string literal (or a copy of one)."""
    defs: dict[int, list[Instr]] = {}
    for ins in m.instructions():
        if ins.dst is not None:
            defs.setdefault(ins.dst, []).append(ins)
        if ins.shadows and ins.shadows[0] is not None:
            defs.setdefault(ins.shadows[0], []).append(ins)

    memo: dict[int, Optional[frozenset[str]]] = {}

    def resolve(reg: int, visiting: frozenset[int]) -> Optional[frozenset[str]]:
        if reg in memo:
            return memo[reg]
        if reg < m.param_slots or reg not in defs or reg in visiting:
            return None
        out: set[str] = set()
        for d in defs[reg]:
            if d.op == "sconst" and d.dst == reg:
                out.add(d.text)  # type: ignore[arg-type]
            elif d.op == "move" and d.dst == reg:
                sub = resolve(d.srcs[0], visiting | {reg})
                if sub is None:
                    return None
                out |= sub
            else:
                return None
        memo[reg] = frozenset(out)
        return memo[reg]

    result = {}
    for reg in defs:
        lits = resolve(reg, frozenset())
        if lits is not None:
            result[reg] = lits
    return result


def dynamic_targets(program: Program, m: MethodDef, ins: Instr, h: Hierarchy) -> list[MethodSig]:
    """Over-approximate the methods a dyncall may reach."""
    instance = [x for x in program.methods() if not x.static]
    lits = string_constants(m).get(ins.srcs[0])
    if lits is not None:
        return [x.sig for x in instance if x.sig.name in lits]
    recv_class = None
    try:
        rtype = infer_register_types(m, h).get(ins.srcs[1])
        if rtype is not None and rtype.kind == "class" and rtype.name in h.classes:
            recv_class = rtype.name
    except RegTypeError:
        pass
    if recv_class is None:
        return [x.sig for x in instance]
    cone = set(h.chain(recv_class)) | set(h.subclasses(recv_class))
    return [x.sig for x in instance if x.sig.owner in cone]


def flatten_call_edges(fb: FactBase, program: Program) -> FactBase:
    h = Hierarchy(program)
    edges = set(fb.edges)
    site_targets = dict(fb.site_targets)
    for inv in fb.invocations:
        if inv.kind == "static":
            edges.add(CallEdge(inv.caller, inv.declared))  # type: ignore[arg-type]
        elif inv.kind == "virtual":
            targets = frozenset(cha_targets(program, inv.declared, h))  # type: ignore[arg-type]
            site_targets[inv] = targets
            for t in targets:
                edges.add(CallEdge(inv.caller, t))
        else:
            m = h.methods[inv.caller]
            ins = m.instructions()[inv.index]
            for t in dynamic_targets(program, m, ins, h):
                edges.add(CallEdge(inv.caller, t))
    return replace(fb, edges=edges, site_targets=site_targets)


def mark_stdlib_called(fb: FactBase, program: Program) -> FactBase:
    """Mark application callbacks that intrinsics may invoke.

    Intrinsics accepting callback objects are modeled as callers of every
    CHA target of the callback signature; those edges join the graph.
    """
    h = Hierarchy(program)
    edges = set(fb.edges)
    called = set(fb.stdlib_called)
    intrinsic_callees = {e.callee for e in fb.edges if builtins.is_intrinsic(e.callee)}
    for intrinsic in sorted(intrinsic_callees, key=_sk):
        for cb in builtins.CALLBACK_CALLERS.get(intrinsic, ()):
            for t in cha_targets(program, cb, h):
                if builtins.is_intrinsic(t):
                    continue
                edges.add(CallEdge(intrinsic, t))
                called.add(t)
    return replace(fb, edges=edges, stdlib_called=called, intrinsic_callees=intrinsic_callees)


def build_facts(program: Program) -> FactBase:
    """extract -> flatten -> mark callbacks."""
    fb = extract_facts(program)
    fb = flatten_call_edges(fb, program)
    return mark_stdlib_called(fb, program)


def dump_facts(fb: FactBase) -> str:
    lines = [f"EDGE {e.caller} -> {e.callee}" for e in fb.sorted_edges()]
    lines += sorted(f"OVERRIDE {o.sub} over {o.sup}" for o in fb.overrides)
    lines += sorted(f"ARRFIELD {w.method} writes {w.owner_class}.{w.field}" for w in fb.array_field_writes)
    lines += sorted(f"MDIM {b.callee} via {b.via}" for b in fb.multidim_boundaries)
    lines += sorted(f"STDLIBCB {s}" for s in fb.stdlib_called)
    return "".join(line + "\n" for line in lines)


def callers_of(edges: Iterable[CallEdge]) -> set[MethodSig]:
    return {e.caller for e in edges}
