"""Partial instrumentation: shadow registers, mangled methods and stubs.

Frame layout of an instrumented method with ``k`` parameter slots, ``j``
shadow parameters and ``n`` original registers:

    r0 .. r(k-1)          original parameters (receiver first)
    rk .. r(k+j-1)        shadow parameters
    r(k+j) ..             remaining original registers, shifted by j
    r(n+j+i)              shadow of original register i
    r(2n+j)               scratch register for boxing

Shadows of primitive registers hold taint masks; shadows of primitive
1-dim arrays hold the parallel taint array. Arrays of two or more
dimensions are lifted to arrays of ``runtime.TaintedIntArray`` boxes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .tir import builtins
from .tir.hierarchy import Hierarchy
from .tir.model import (
    INT,
    ClassDef,
    FieldRef,
    Instr,
    InstrumentedProgram,
    InstrumentSet,
    Label,
    MethodDef,
    MethodSig,
    Program,
    ReflectionTable,
    TableEntry,
    TypeDesc,
    array_of,
    box_class_for,
    class_type,
    mangled_sig,
    needs_mangling,
    shadow_param_types,
)
from .tir.regtypes import RegTypeError, infer_register_types, shape

TAINT_SUFFIX = "$$taint"
TAINT_ARR_SUFFIX = "$$taintArr"
LIFTED = builtins.LIFTED_BOX


class InstrumentError(ValueError):
    pass


@dataclass(frozen=True)
class SignatureTransform:
    original: MethodSig
    mangled: Optional[MethodSig]
    shadow_param_map: tuple[tuple[int, int], ...]  # (param index, shadow param index)
    boxed_return: bool

    @property
    def changed(self) -> bool:
        return self.mangled is not None


def transform_signature(s: MethodSig) -> SignatureTransform:
    if not needs_mangling(s):
        return SignatureTransform(s, None, (), False)
    n = len(s.params)
    pairs = tuple((pi, n + q) for q, (pi, _) in enumerate(shadow_param_types(s)))
    boxed = s.ret is not None and s.ret.is_prim
    return SignatureTransform(s, mangled_sig(s), pairs, boxed)


def lift_multidim(t: Optional[TypeDesc]) -> Optional[TypeDesc]:
    if t is not None and t.is_prim_array and t.dims > 1:
        return array_of(class_type(LIFTED), t.dims - 1)
    return t


def _callee_instrumented(sig: MethodSig, iset: InstrumentSet) -> bool:
    # stdlib intrinsics are natively taint-aware; runtime helpers are plumbing
    if builtins.is_intrinsic(sig):
        return sig.owner.startswith("stdlib.")
    return sig in iset


# -- shadow fields -----------------------------------------------------

def touched_classes(program: Program, iset: InstrumentSet, h: Optional[Hierarchy] = None) -> set[str]:
    """Classes that need shadow fields under ``iset``."""
    h = h or Hierarchy(program)
    out = {s.owner for s in iset.methods}
    for m in program.methods():
        if m.sig not in iset:
            continue
        for ins in m.instructions():
            if ins.op in ("get", "put"):
                resolved = h.resolve_field(ins.fref.cls, ins.fref.name)  # type: ignore[union-attr]
                if resolved is not None:
                    out.add(resolved[0])
    return out


def add_shadow_fields(c: ClassDef, iset: InstrumentSet, touched: Optional[Iterable[str]] = None) -> ClassDef:
    """Add ``f$$taint`` / ``g$$taintArr`` companions when the set touches ``c``.

    ``touched`` is the result of touched_classes; without it only classes
    declaring a member of the set count.
    """
    hit = c.name in set(touched) if touched is not None else any(m.sig in iset for m in c.methods)
    if not hit:
        return c
    extra = []
    for fname, ftype in c.fields:
        if ftype.is_prim:
            extra.append((fname + TAINT_SUFFIX, INT))
        elif ftype.is_prim_array and ftype.dims == 1:
            extra.append((fname + TAINT_ARR_SUFFIX, array_of(INT)))
    if not extra:
        return c
    return ClassDef(c.name, c.superclass, c.fields + tuple(extra), c.methods)


# -- reflection table ----------------------------------------------------

def build_reflection_table(p: Program, iset: InstrumentSet) -> ReflectionTable:
    entries: dict[tuple[str, str, int], TableEntry] = {}
    for m in p.methods():
        if m.static:
            continue
        key = (m.sig.owner, m.sig.name, len(m.sig.params))
        if key in entries:
            continue  # first declaration wins for same-arity overloads
        mangled = mangled_sig(m.sig) if m.sig in iset and needs_mangling(m.sig) else None
        entries[key] = TableEntry(key[0], key[1], key[2], m.sig, mangled)
    return ReflectionTable(tuple(entries[k] for k in sorted(entries)))


# -- method bodies -------------------------------------------------------

@dataclass(frozen=True)
class RegisterLayout:
    k: int
    j: int
    n: int

    def r(self, i: int) -> int:
        return i if i < self.k else i + self.j

    def sh(self, i: int) -> int:
        return self.n + self.j + i

    @property
    def temp(self) -> int:
        return 2 * self.n + self.j

    @property
    def size(self) -> int:
        return 2 * self.n + self.j + 1


def _box_field(box: str, name: str) -> FieldRef:
    return FieldRef(box, name)


def rewrite_call_site(
    ins: Instr,
    caller_in_set: bool,
    callee_transform: SignatureTransform,
    callee_in_set: bool,
    layout: Optional[RegisterLayout] = None,
) -> list[Instr]:
    """Instruction sequence replacing one scall/vcall.

    Uninstrumented callers keep the call as is: the original signature is
    either the untouched method or its stub. Instrumented callers pass
    shadows to a mangled callee and unbox its result, or set the result
    shadow to the default taint for an uninstrumented callee.
    """
    if not caller_in_set:
        return [ins]
    if layout is None:
        raise InstrumentError("an instrumented caller needs its register layout")
    L = layout
    args = [L.r(a) for a in ins.srcs]
    dst = None if ins.dst is None else L.r(ins.dst)
    ret = ins.sig.ret  # type: ignore[union-attr]
    out: list[Instr] = []
    if callee_in_set and callee_transform.changed:
        offset = 1 if ins.op == "vcall" else 0
        shadows = [L.sh(ins.srcs[pi + offset]) for pi, _ in callee_transform.shadow_param_map]
        out.append(Instr(ins.op, dst=dst, srcs=tuple(args + shadows), sig=callee_transform.mangled))
        if dst is not None and callee_transform.boxed_return:
            box = box_class_for(ret)  # type: ignore[arg-type]
            out.append(Instr("get", dst=L.sh(ins.dst), srcs=(dst,), fref=_box_field(box, "taint")))  # type: ignore[arg-type]
            out.append(Instr("get", dst=dst, srcs=(dst,), fref=_box_field(box, "val")))
            return out
    else:
        out.append(Instr(ins.op, dst=dst, srcs=tuple(args), sig=ins.sig))
    if dst is not None and ret is not None:
        kind, _ = shape(ret)
        if kind == "prim":
            out.append(Instr("const", dst=L.sh(ins.dst), imm=0))  # type: ignore[arg-type]
        elif kind == "parr":
            out.append(Instr("scall", dst=L.sh(ins.dst), srcs=(dst,), sig=builtins.BLANK))  # type: ignore[arg-type]
    return out


class _BodyRewriter:
    def __init__(self, m: MethodDef, iset: InstrumentSet, h: Hierarchy):
        self.m = m
        self.iset = iset
        self.h = h
        try:
            self.types = infer_register_types(m, h)
        except RegTypeError as exc:
            raise InstrumentError(str(exc)) from None
        self.t = transform_signature(m.sig)
        self.L = RegisterLayout(m.param_slots, len(self.t.shadow_param_map), m.num_regs)

    def kind(self, reg: int) -> tuple[str, int]:
        return shape(self.types.get(reg))

    def body(self) -> list:
        L = self.L
        out: list = []
        slot0 = 0 if self.m.static else 1
        for q, (pi, _) in enumerate(self.t.shadow_param_map):
            out.append(Instr("move", dst=L.sh(slot0 + pi), srcs=(L.k + q,)))
        for item in self.m.body:
            if isinstance(item, Label):
                out.append(item)
            else:
                out.extend(self.instr(item))
        return out

    def instr(self, ins: Instr) -> list[Instr]:
        L, op = self.L, ins.op
        R, S = L.r, L.sh
        d = ins.dst
        if op == "const":
            return [Instr("const", dst=S(d), imm=0), Instr("const", dst=R(d), imm=ins.imm)]
        if op == "sconst":
            return [Instr("sconst", dst=R(d), text=ins.text)]
        if op == "move":
            out = []
            if self.kind(ins.srcs[0])[0] in ("prim", "parr"):
                out.append(Instr("move", dst=S(d), srcs=(S(ins.srcs[0]),)))
            return out + [Instr("move", dst=R(d), srcs=(R(ins.srcs[0]),))]
        if op == "bin":
            a, b = ins.srcs
            return [
                Instr("bin", dst=S(d), srcs=(S(a), S(b)), binop="or"),
                Instr("bin", dst=R(d), srcs=(R(a), R(b)), binop=ins.binop),
            ]
        if op == "new":
            return [Instr("new", dst=R(d), cls=ins.cls)]
        if op == "newarr":
            t = ins.type
            length = R(ins.srcs[0])
            if t.is_prim_array and t.dims == 1:  # type: ignore[union-attr]
                return [
                    Instr("newarr", dst=S(d), srcs=(length,), type=array_of(INT)),
                    Instr("newarr", dst=R(d), srcs=(length,), type=t),
                ]
            return [Instr("newarr", dst=R(d), srcs=(length,), type=lift_multidim(t))]
        if op == "aload":
            a, i = ins.srcs
            kind, dims = self.kind(a)
            if kind == "parr":
                return [
                    Instr("aload", dst=S(d), srcs=(S(a), R(i))),
                    Instr("aload", dst=R(d), srcs=(R(a), R(i))),
                ]
            if kind == "marr" and dims == 2:
                return [
                    Instr("aload", dst=R(d), srcs=(R(a), R(i))),
                    Instr("get", dst=S(d), srcs=(R(d),), fref=FieldRef(LIFTED, "taintArr")),
                    Instr("get", dst=R(d), srcs=(R(d),), fref=FieldRef(LIFTED, "arr")),
                ]
            return [Instr("aload", dst=R(d), srcs=(R(a), R(i)))]
        if op == "astore":
            a, i, v = ins.srcs
            kind, dims = self.kind(a)
            if kind == "parr":
                return [
                    Instr("astore", srcs=(S(a), R(i), S(v))),
                    Instr("astore", srcs=(R(a), R(i), R(v))),
                ]
            if kind == "marr" and dims == 2:
                tmp = L.temp
                return [
                    Instr("new", dst=tmp, cls=LIFTED),
                    Instr("put", srcs=(tmp, R(v)), fref=FieldRef(LIFTED, "arr")),
                    Instr("put", srcs=(tmp, S(v)), fref=FieldRef(LIFTED, "taintArr")),
                    Instr("astore", srcs=(R(a), R(i), tmp)),
                ]
            return [Instr("astore", srcs=(R(a), R(i), R(v)))]
        if op in ("get", "put"):
            return self.field_access(ins)
        if op in ("scall", "vcall"):
            callee = ins.sig
            return rewrite_call_site(
                ins, True, transform_signature(callee), _callee_instrumented(callee, self.iset), L)  # type: ignore[arg-type]
        if op == "dyncall":
            shadows = (None if d is None else S(d),) + tuple(S(r) for r in ins.srcs[2:])
            return [Instr("dyncall", dst=None if d is None else R(d),
                          srcs=tuple(R(r) for r in ins.srcs), shadows=shadows)]
        if op == "ret":
            if not ins.srcs:
                return [ins]
            v = ins.srcs[0]
            if self.t.boxed_return:
                box = box_class_for(self.m.sig.ret)  # type: ignore[arg-type]
                tmp = L.temp
                return [
                    Instr("new", dst=tmp, cls=box),
                    Instr("put", srcs=(tmp, R(v)), fref=FieldRef(box, "val")),
                    Instr("put", srcs=(tmp, S(v)), fref=FieldRef(box, "taint")),
                    Instr("ret", srcs=(tmp,)),
                ]
            return [Instr("ret", srcs=(R(v),))]
        if op == "jmp":
            return [ins]
        if op == "br":
            return [Instr("br", srcs=(R(ins.srcs[0]),), target=ins.target)]
        raise InstrumentError(f"unknown opcode {op!r}")

    def field_access(self, ins: Instr) -> list[Instr]:
        R, S = self.L.r, self.L.sh
        fref = ins.fref
        _, ftype = self.h.resolve_field(fref.cls, fref.name)  # type: ignore[misc,union-attr]
        companion = None
        if ftype.is_prim:
            companion = FieldRef(fref.cls, fref.name + TAINT_SUFFIX)  # type: ignore[union-attr]
        elif ftype.is_prim_array and ftype.dims == 1:
            companion = FieldRef(fref.cls, fref.name + TAINT_ARR_SUFFIX)  # type: ignore[union-attr]
        if ins.op == "get":
            o, d = ins.srcs[0], ins.dst
            main = Instr("get", dst=R(d), srcs=(R(o),), fref=fref)  # type: ignore[arg-type]
            if companion is None:
                return [main]
            return [Instr("get", dst=S(d), srcs=(R(o),), fref=companion), main]  # type: ignore[arg-type]
        o, v = ins.srcs
        main = Instr("put", srcs=(R(o), R(v)), fref=fref)
        if companion is None:
            return [main]
        return [Instr("put", srcs=(R(o), S(v)), fref=companion), main]


def make_stub(m: MethodDef) -> MethodDef:
    """Original-signature method forwarding to the mangled one with zero taints."""
    t = transform_signature(m.sig)
    k = m.param_slots
    j = len(t.shadow_param_map)
    res = k + j
    slot0 = 0 if m.static else 1
    body: list = []
    for q, (pi, _) in enumerate(t.shadow_param_map):
        if m.sig.params[pi].is_prim:
            body.append(Instr("const", dst=k + q, imm=0))
        else:
            body.append(Instr("scall", dst=k + q, srcs=(slot0 + pi,), sig=builtins.BLANK))
    dst = None if m.sig.ret is None else res
    body.append(Instr("scall" if m.static else "vcall", dst=dst, srcs=tuple(range(k + j)), sig=t.mangled))
    if dst is None:
        body.append(Instr("ret"))
    else:
        if t.boxed_return:
            box = box_class_for(m.sig.ret)  # type: ignore[arg-type]
            body.append(Instr("get", dst=res, srcs=(res,), fref=FieldRef(box, "val")))
        body.append(Instr("ret", srcs=(res,)))
    return MethodDef(m.sig, res + 1, tuple(body), m.static)


def instrument_method(m: MethodDef, iset: InstrumentSet, h: Hierarchy) -> list[MethodDef]:
    rw = _BodyRewriter(m, iset, h)
    sig = rw.t.mangled or m.sig
    inst = MethodDef(sig, rw.L.size, tuple(rw.body()), m.static)
    if rw.t.changed:
        return [make_stub(m), inst]
    return [inst]


def instrument_program(p: Program, iset: InstrumentSet) -> InstrumentedProgram:
    h = Hierarchy(p)
    members = {s for s in iset.methods if s in h.methods}
    unknown = sorted(str(s) for s in iset.methods - members)
    if unknown:
        raise InstrumentError("instrument set names unknown methods: " + ", ".join(unknown))
    touched = touched_classes(p, iset, h)
    errors: list[str] = []
    classes = []
    for c in p.classes:
        methods: list[MethodDef] = []
        for m in c.methods:
            if m.sig in iset:
                try:
                    methods.extend(instrument_method(m, iset, h))
                except InstrumentError as exc:
                    errors.append(str(exc))
            else:
                methods.append(m)
        c2 = ClassDef(c.name, c.superclass, c.fields, tuple(methods))
        classes.append(add_shadow_fields(c2, iset, touched))
    if errors:
        raise InstrumentError("; ".join(errors))
    out = Program(tuple(classes), p.entry)
    return InstrumentedProgram(out, build_reflection_table(p, iset), InstrumentSet(frozenset(members), dict(iset.provenance)))


def all_methods_set(p: Program) -> InstrumentSet:
    return InstrumentSet(frozenset(m.sig for m in p.methods()))
