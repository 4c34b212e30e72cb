"""Deterministic interpreter for plain and instrumented TIR programs."""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from typing import Optional, Union

from .facts import CallEdge
from .instrument import build_reflection_table, transform_signature
from .scope import DEFAULT_SEEDS, SeedConfig
from .tir import builtins
from .tir.hierarchy import Hierarchy
from .tir.model import (
    FieldRef,
    Instr,
    InstrumentedProgram,
    InstrumentSet,
    Label,
    MethodDef,
    MethodSig,
    Program,
    ReflectionTable,
    TypeDesc,
    mangled_sig,
    needs_mangling,
)

_MASK64 = (1 << 64) - 1
MAX_DEPTH = 2000


class RunError(Exception):
    pass


class _Budget(Exception):
    pass


class Obj:
    __slots__ = ("cls", "fields")

    def __init__(self, cls: str, fields: dict):
        self.cls = cls
        self.fields = fields


class Arr:
    __slots__ = ("type", "data")

    def __init__(self, type: TypeDesc, data: list):
        self.type = type
        self.data = data


@dataclass
class RunConfig:
    inputs: tuple[int, ...] = ()
    seeds: SeedConfig = DEFAULT_SEEDS
    budget: int = 10**8
    trace_calls: bool = False
    check_boundary: bool = True

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise ValueError("budget must be positive")


@dataclass(frozen=True)
class Violation:
    sink: MethodSig
    mask: int
    ordinal: int
    stack: tuple[MethodSig, ...] = ()

    @property
    def key(self) -> tuple[str, int, int]:
        return (str(self.sink), self.mask, self.ordinal)


@dataclass
class RunReport:
    output: list[int] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    instructions: int = 0
    halted: str = "normal"  # normal | budget-exceeded | run-error
    error: Optional[str] = None
    trace: Optional[list[CallEdge]] = None

    def violation_keys(self) -> list[tuple[str, int, int]]:
        return [v.key for v in self.violations]

    def to_dict(self) -> dict:
        d: dict = {
            "output": list(self.output),
            "violations": [{"sink": s, "mask": m, "ordinal": k} for s, m, k in self.violation_keys()],
            "instructions": self.instructions,
            "halted": self.halted,
        }
        if self.error is not None:
            d["error"] = self.error
        if self.trace is not None:
            d["trace"] = [[str(e.caller), str(e.callee)] for e in self.trace]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _wrap(x: int) -> int:
    x &= _MASK64
    return x - (1 << 64) if x >> 63 else x


def _int(v, what: str) -> int:
    if type(v) is not int:
        raise RunError(f"type mismatch: {what} expects an int, got {_describe(v)}")
    return v


def _describe(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, Obj):
        return v.cls
    if isinstance(v, Arr):
        return str(v.type)
    if isinstance(v, str):
        return "string"
    return "int"


def dispatch_dynamic(
    table: ReflectionTable,
    iset: InstrumentSet,
    name: str,
    recv_class: str,
    arity: int,
    caller_in_set: bool,
    h: Hierarchy,
) -> MethodSig:
    """Resolve a reflective call through the embedded table.

    The mangled target is chosen only for instrumented callers; everyone
    else gets the original signature, which is the stub when the method
    itself is instrumented.
    """
    lookup = table.lookup()
    for cls in h.chain(recv_class):
        entry = lookup.get((cls, name, arity))
        if entry is not None:
            if caller_in_set and entry.mangled is not None:
                return entry.mangled
            return entry.original
    raise RunError(f"unresolvable dyncall: no method {name}/{arity} on {recv_class}")


class _Method:
    __slots__ = ("sig", "num_regs", "code", "plain", "stub")

    def __init__(self, m: MethodDef, plain: bool, stub: bool):
        labels: dict[str, int] = {}
        code: list[Instr] = []
        for item in m.body:
            if isinstance(item, Label):
                labels[item.name] = len(code)
            else:
                code.append(item)
        # branch targets become instruction indices
        self.code = [
            Instr(i.op, srcs=i.srcs, imm=labels[i.target]) if i.op in ("jmp", "br") else i
            for i in code
        ]
        self.sig = m.sig
        self.num_regs = m.num_regs
        self.plain = plain
        self.stub = stub


class _Machine:
    def __init__(self, program: Program, table: ReflectionTable, iset: InstrumentSet, cfg: RunConfig):
        self.program = program
        self.table = table
        self.lookup = table.lookup()
        self.iset = iset
        self.cfg = cfg
        self.h = Hierarchy(program)
        self.methods: dict[MethodSig, _Method] = {}
        for m in program.methods():
            plain = m.sig not in iset and not m.sig.is_mangled
            stub = m.sig in iset and needs_mangling(m.sig) and not m.sig.is_mangled
            self.methods[m.sig] = _Method(m, plain, stub)
        self.demangle: dict[MethodSig, MethodSig] = {}
        for s in list(iset.methods) + list(builtins.INTRINSIC_METHODS):
            if needs_mangling(s) and not s.is_mangled:
                self.demangle[mangled_sig(s)] = s
        self.inputs = list(cfg.inputs)
        self.input_pos = 0
        self.report = RunReport(trace=[] if cfg.trace_calls else None)
        self._trace_seen: set[CallEdge] = set()
        self.stack: list[MethodSig] = []
        self.sink_count = 0
        self._dispatch_cache: dict = {}
        self._field_cache: dict = {}
        self._fields_of: dict[str, list] = {}
        self.sinks = set(cfg.seeds.sinks)
        self.check = cfg.check_boundary

    # -- helpers ---------------------------------------------------------
    def original(self, sig: MethodSig) -> MethodSig:
        return self.demangle.get(sig, sig)

    def trace(self, caller: MethodSig, callee: MethodSig) -> None:
        if self.report.trace is None:
            return
        e = CallEdge(self.original(caller), self.original(callee))
        if e not in self._trace_seen:
            self._trace_seen.add(e)
            self.report.trace.append(e)

    def boxy(self, v) -> bool:
        if isinstance(v, Obj):
            return builtins.is_box_class(v.cls)
        if isinstance(v, Arr):
            return v.type.class_name == builtins.LIFTED_BOX
        return False

    def boundary(self, v, where: str) -> None:
        if self.boxy(v):
            raise RunError(f"boundary violation: {_describe(v)} reaches uninstrumented {where}")

    def new_obj(self, cls: str) -> Obj:
        layout = self._fields_of.get(cls)
        if layout is None:
            layout = []
            for name in reversed(self.h.chain(cls)):
                cdef = self.h.classes.get(name)
                fields = cdef.fields if cdef is not None else builtins.BOX_FIELDS.get(name, ())
                for fname, ftype in fields:
                    layout.append(((name, fname), 0 if ftype.is_prim else None))
            self._fields_of[cls] = layout
        return Obj(cls, dict(layout))

    def new_arr(self, t: TypeDesc, length: int) -> Arr:
        if length < 0:
            raise RunError(f"negative array length {length}")
        elem = t.element_type()
        if elem.is_prim:
            return Arr(t, [0] * length)
        if t.dims == 1 and elem.name == builtins.LIFTED_BOX:
            return Arr(t, [self.new_obj(builtins.LIFTED_BOX) for _ in range(length)])
        return Arr(t, [None] * length)

    def field_key(self, fref: FieldRef) -> tuple[str, str]:
        key = self._field_cache.get(fref)
        if key is None:
            resolved = self.h.resolve_field(fref.cls, fref.name)
            if resolved is None:
                raise RunError(f"unresolved field {fref}")
            key = (resolved[0], fref.name)
            self._field_cache[fref] = key
        return key

    def obj(self, v, what: str) -> Obj:
        if v is None:
            raise RunError(f"null dereference in {what}")
        if not isinstance(v, Obj):
            raise RunError(f"type mismatch: {what} expects an object, got {_describe(v)}")
        return v

    def arr(self, v, idx, what: str) -> Arr:
        if v is None:
            raise RunError(f"null dereference in {what}")
        if not isinstance(v, Arr):
            raise RunError(f"type mismatch: {what} expects an array, got {_describe(v)}")
        i = _int(idx, what)
        if not 0 <= i < len(v.data):
            raise RunError(f"index {i} out of bounds for length {len(v.data)}")
        return v

    def virtual_target(self, recv, sig: MethodSig) -> MethodSig:
        o = self.obj(recv, f"call to {sig}")
        key = (o.cls, sig)
        target = self._dispatch_cache.get(key)
        if target is None:
            if not self.h.is_subclass(o.cls, sig.owner):
                raise RunError(f"type mismatch: receiver {o.cls} is not a {sig.owner}")
            target = self.h.dispatch(o.cls, sig)
            if target is None:
                raise RunError(f"abstract method {sig} on {o.cls}")
            self._dispatch_cache[key] = target
        return target

    # -- execution -------------------------------------------------------
    def invoke(self, caller: Optional[_Method], sig: MethodSig, args: list):
        if caller is not None:
            if not (caller.stub or builtins.BLANK == sig):
                self.trace(caller.sig, sig)
        if builtins.is_intrinsic(sig):
            return self.intrinsic(sig, args, caller)
        m = self.methods.get(sig)
        if m is None:
            raise RunError(f"no method {sig}")
        if m.plain and self.check:
            for a in args:
                self.boundary(a, f"parameter of {sig}")
        if len(self.stack) >= MAX_DEPTH:
            raise RunError("call depth exceeded")
        self.stack.append(sig)
        try:
            return self.execute(m, args)
        finally:
            self.stack.pop()

    def execute(self, m: _Method, args: list):
        regs = [0] * m.num_regs
        regs[: len(args)] = args
        code = m.code
        pc = 0
        report = self.report
        budget = self.cfg.budget
        check = self.check and m.plain
        while True:
            ins = code[pc]
            pc += 1
            report.instructions += 1
            if report.instructions > budget:
                raise _Budget()
            op = ins.op
            if op == "bin":
                a = _int(regs[ins.srcs[0]], "bin")
                b = _int(regs[ins.srcs[1]], "bin")
                bop = ins.binop
                if bop == "add":
                    r = _wrap(a + b)
                elif bop == "or":
                    r = a | b
                elif bop == "sub":
                    r = _wrap(a - b)
                elif bop == "mul":
                    r = _wrap(a * b)
                elif bop == "lt":
                    r = 1 if a < b else 0
                elif bop == "eq":
                    r = 1 if a == b else 0
                elif bop == "and":
                    r = a & b
                elif bop == "xor":
                    r = a ^ b
                else:
                    if b == 0:
                        raise RunError("division by zero")
                    q = abs(a) // abs(b)
                    r = _wrap(q if (a < 0) == (b < 0) else -q)
                regs[ins.dst] = r
            elif op == "const":
                regs[ins.dst] = ins.imm
            elif op == "move":
                regs[ins.dst] = regs[ins.srcs[0]]
            elif op == "br":
                if _int(regs[ins.srcs[0]], "br"):
                    pc = ins.imm
            elif op == "jmp":
                pc = ins.imm
            elif op == "aload":
                arr = self.arr(regs[ins.srcs[0]], regs[ins.srcs[1]], "aload")
                v = arr.data[regs[ins.srcs[1]]]
                if check:
                    self.boundary(v, f"array element in {m.sig}")
                regs[ins.dst] = v
            elif op == "astore":
                arr = self.arr(regs[ins.srcs[0]], regs[ins.srcs[1]], "astore")
                arr.data[regs[ins.srcs[1]]] = regs[ins.srcs[2]]
            elif op == "get":
                o = self.obj(regs[ins.srcs[0]], f"get {ins.fref}")
                key = self.field_key(ins.fref)
                if key not in o.fields:
                    raise RunError(f"type mismatch: {o.cls} has no field {ins.fref}")
                v = o.fields[key]
                if check:
                    self.boundary(v, f"field read in {m.sig}")
                regs[ins.dst] = v
            elif op == "put":
                o = self.obj(regs[ins.srcs[0]], f"put {ins.fref}")
                key = self.field_key(ins.fref)
                if key not in o.fields:
                    raise RunError(f"type mismatch: {o.cls} has no field {ins.fref}")
                o.fields[key] = regs[ins.srcs[1]]
            elif op == "scall" or op == "vcall":
                args = [regs[r] for r in ins.srcs]
                sig = ins.sig
                target = self.virtual_target(args[0], sig) if op == "vcall" else sig
                res = self.invoke(m, target, args)
                if ins.dst is not None:
                    if check:
                        self.boundary(res, f"result register in {m.sig}")
                    regs[ins.dst] = res
            elif op == "dyncall":
                self.dyncall(m, ins, regs)
            elif op == "ret":
                return regs[ins.srcs[0]] if ins.srcs else None
            elif op == "new":
                regs[ins.dst] = self.new_obj(ins.cls)
            elif op == "newarr":
                regs[ins.dst] = self.new_arr(ins.type, _int(regs[ins.srcs[0]], "newarr"))
            elif op == "sconst":
                regs[ins.dst] = ins.text
            else:
                raise RunError(f"unknown opcode {op}")

    def dyncall(self, m: _Method, ins: Instr, regs: list) -> None:
        name = regs[ins.srcs[0]]
        if not isinstance(name, str):
            raise RunError(f"type mismatch: dyncall name register holds {_describe(name)}")
        recv = self.obj(regs[ins.srcs[1]], f"dyncall {name}")
        args = [regs[r] for r in ins.srcs[1:]]
        instrumented = ins.shadows is not None
        sig = dispatch_dynamic(self.table, self.iset, name, recv.cls, len(args) - 1, instrumented, self.h)
        boxed = False
        if sig.is_mangled:
            t = transform_signature(self.original(sig))
            args += [regs[ins.shadows[1 + pi]] for pi, _ in t.shadow_param_map]  # type: ignore[index]
            boxed = t.boxed_return
        res = self.invoke(m, sig, args)
        if ins.dst is None:
            return
        if boxed:
            box = self.obj(res, "unbox")
            regs[ins.shadows[0]] = box.fields[(box.cls, "taint")]  # type: ignore[index]
            res = box.fields[(box.cls, "val")]
        elif instrumented and ins.shadows[0] is not None:  # type: ignore[index]
            regs[ins.shadows[0]] = 0  # type: ignore[index]
        if m.plain and self.check:
            self.boundary(res, f"result register in {m.sig}")
        regs[ins.dst] = res

    # -- intrinsics ------------------------------------------------------
    def next_input(self) -> tuple[int, bool]:
        if self.input_pos < len(self.inputs):
            v = self.inputs[self.input_pos]
            self.input_pos += 1
            return v, True
        return 0, False

    def label(self, sig: MethodSig) -> int:
        bit = self.cfg.seeds.label_bit(sig)
        return 0 if bit is None else 1 << bit

    def box(self, v: int, taint: int, cls: str = "runtime.TaintedInt") -> Obj:
        o = self.new_obj(cls)
        o.fields[(cls, "val")] = v
        o.fields[(cls, "taint")] = taint
        return o

    def intrinsic(self, sig: MethodSig, args: list, caller: Optional[_Method]):
        if sig == builtins.BLANK:
            a = args[0]
            if a is None:
                return None
            if not isinstance(a, Arr):
                raise RunError(f"type mismatch: blank expects an array, got {_describe(a)}")
            return Arr(a.type, [0] * len(a.data))
        orig = self.original(sig)
        aware = orig != sig
        if orig == builtins.APPLY:
            raise RunError(f"abstract method {sig}")
        if orig in self.sinks:
            self.sink_count += 1
            if aware:
                n = len(orig.params)
                mask = 0
                for s in args[n:]:
                    if isinstance(s, int):
                        mask |= s
                    elif isinstance(s, Arr):
                        for x in s.data:
                            mask |= x
                mask &= _MASK64
                if mask:
                    stack = tuple(self.stack)
                    self.report.violations.append(Violation(orig, mask, self.sink_count, stack))
        if orig in (builtins.WRITE, builtins.PRINT, builtins.EXEC):
            self.report.output.append(_int(args[0], str(orig)))
            return None
        if orig == builtins.READ:
            v, fresh = self.next_input()
            if aware:
                return self.box(v, self.label(orig) if fresh else 0)
            return v
        if orig == builtins.READ_BUF:
            buf = args[0]
            if buf is None:
                raise RunError("null dereference in readBuf")
            if not isinstance(buf, Arr):
                raise RunError(f"type mismatch: readBuf expects an array, got {_describe(buf)}")
            shadow = args[1] if aware else None
            if aware and shadow is None:
                raise RunError("null dereference in readBuf shadow")
            count = 0
            for i in range(len(buf.data)):
                v, fresh = self.next_input()
                if not fresh:
                    break
                buf.data[i] = v
                if shadow is not None and i < len(shadow.data):
                    shadow.data[i] = self.label(orig)
                count += 1
            return self.box(count, 0) if aware else count
        if orig == builtins.MAP:
            fn = self.obj(args[0], "map")
            target = dispatch_dynamic(self.table, self.iset, "apply", fn.cls, 1, aware, self.h)
            fake = _Method.__new__(_Method)
            fake.sig, fake.stub = builtins.MAP, False
            if target.is_mangled:
                res = self.invoke(fake, target, [fn, args[1], args[2] if aware else 0])
                b = self.obj(res, "unbox")
                return self.box(b.fields[(b.cls, "val")], b.fields[(b.cls, "taint")])
            res = self.invoke(fake, target, [fn, args[1]])
            return self.box(res, 0) if aware else res
        raise RunError(f"no intrinsic {sig}")


def run(p: Union[Program, InstrumentedProgram], cfg: Optional[RunConfig] = None) -> RunReport:
    cfg = cfg or RunConfig()
    if isinstance(p, InstrumentedProgram):
        program, table, iset = p.program, p.table, p.instrument_set
    else:
        program, iset = p, InstrumentSet()
        table = build_reflection_table(p, iset)
    vm = _Machine(program, table, iset, cfg)
    if program.entry is None or program.entry not in vm.methods:
        vm.report.halted = "run-error"
        vm.report.error = "missing entry"
        return vm.report
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * MAX_DEPTH + 1000))
    try:
        vm.invoke(None, program.entry, [])
    except _Budget:
        vm.report.halted = "budget-exceeded"
        vm.report.instructions = cfg.budget
    except RunError as exc:
        vm.report.halted = "run-error"
        vm.report.error = str(exc)
    finally:
        sys.setrecursionlimit(old_limit)
    return vm.report
