"""Static link check: the IR analog of a JVM's resolution errors.

Never raises; every problem comes back as a categorized LinkError.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import builtins
from .hierarchy import Hierarchy
from .model import Instr, Label, MethodDef, Program

CATEGORIES = (
    "unresolved-method",
    "unresolved-field",
    "unresolved-type",
    "bad-register",
    "bad-label",
    "missing-ret",
    "bad-hierarchy",
    "missing-entry",
)


@dataclass(frozen=True)
class LinkError:
    category: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.category}: {self.where}: {self.message}"


def validate_program(program: Program) -> list[LinkError]:
    errors: list[LinkError] = []
    h = Hierarchy(program)
    _check_hierarchy(program, h, errors)
    for cls in program.classes:
        for fname, ftype in cls.fields:
            if not h.type_resolves(ftype):
                errors.append(LinkError("unresolved-type", f"{cls.name}.{fname}", f"unknown type {ftype}"))
        for m in cls.methods:
            _check_method(m, h, errors)
    _check_entry(program, h, errors)
    return errors


def _check_hierarchy(program: Program, h: Hierarchy, errors: list[LinkError]) -> None:
    for cls in program.classes:
        if builtins.is_intrinsic_name(cls.name):
            errors.append(LinkError("bad-hierarchy", cls.name, "reserved class namespace"))
        sup = cls.superclass
        if sup is None:
            continue
        if sup in builtins.INTRINSIC_CLASSES:
            if sup not in builtins.EXTENSIBLE:
                errors.append(LinkError("bad-hierarchy", cls.name, f"cannot extend {sup}"))
        elif sup not in h.classes:
            errors.append(LinkError("bad-hierarchy", cls.name, f"unknown superclass {sup}"))
        chain = h.chain(cls.name)
        last = chain[-1]
        if h.superclass(last) in chain:
            errors.append(LinkError("bad-hierarchy", cls.name, "cyclic superclass chain"))
    for cls in program.classes:
        for m in cls.methods:
            for name in h.chain(cls.name)[1:]:
                cdef = h.classes.get(name)
                if cdef is None:
                    continue
                for sm in cdef.methods:
                    if sm.sig.name == m.sig.name and sm.sig.params == m.sig.params:
                        if sm.sig.ret != m.sig.ret or sm.static != m.static:
                            errors.append(LinkError(
                                "bad-hierarchy", str(m.sig), f"incompatible override of {sm.sig}"))


def _check_entry(program: Program, h: Hierarchy, errors: list[LinkError]) -> None:
    entry = program.entry
    if entry is None:
        errors.append(LinkError("missing-entry", "<program>", "no entry declared"))
        return
    m = h.methods.get(entry)
    if m is None:
        errors.append(LinkError("missing-entry", str(entry), "entry method not declared"))
    elif not m.static or entry.params or entry.ret is not None:
        errors.append(LinkError("missing-entry", str(entry), "entry must be static, void and parameterless"))


def _check_method(m: MethodDef, h: Hierarchy, errors: list[LinkError]) -> None:
    where = str(m.sig)

    def err(category: str, message: str, index: int | None = None) -> None:
        loc = where if index is None else f"{where}#{index}"
        errors.append(LinkError(category, loc, message))

    for t in (m.sig.ret, *m.sig.params):
        if not h.type_resolves(t):
            err("unresolved-type", f"unknown type {t}")
    if m.num_regs < m.param_slots:
        err("bad-register", f"regs {m.num_regs} below {m.param_slots} parameter slots")

    labels: set[str] = set()
    for item in m.body:
        if isinstance(item, Label):
            if item.name in labels:
                err("bad-label", f"duplicate label {item.name}")
            labels.add(item.name)

    index = -1
    for item in m.body:
        if isinstance(item, Label):
            continue
        index += 1
        for r in item.registers():
            if r >= m.num_regs:
                err("bad-register", f"r{r} out of range (regs {m.num_regs})", index)
        _check_instr(item, m, h, labels, lambda c, msg: err(c, msg, index))

    last = m.body[-1] if m.body else None
    if not isinstance(last, Instr) or last.op not in ("ret", "jmp"):
        err("missing-ret", "control can fall off the end of the body")


def _check_instr(ins: Instr, m: MethodDef, h: Hierarchy, labels: set[str], err) -> None:
    op = ins.op
    if op in ("jmp", "br"):
        if ins.target not in labels:
            err("bad-label", f"unknown label {ins.target}")
    elif op in ("get", "put"):
        if h.resolve_field(ins.fref.cls, ins.fref.name) is None:
            err("unresolved-field", f"unknown field {ins.fref}")
    elif op == "new":
        if not h.is_known_class(ins.cls) or ins.cls.startswith("stdlib."):
            err("unresolved-type", f"cannot instantiate {ins.cls}")
    elif op == "newarr":
        if not ins.type.is_array or not h.type_resolves(ins.type):
            err("unresolved-type", f"bad array type {ins.type}")
    elif op in ("scall", "vcall"):
        static = h.is_static(ins.sig)
        if static is None:
            err("unresolved-method", f"no method {ins.sig}")
            return
        if static != (op == "scall"):
            err("unresolved-method", f"{op} cannot target {'static' if static else 'instance'} {ins.sig}")
            return
        expected = len(ins.sig.params) + (0 if static else 1)
        if len(ins.srcs) != expected:
            err("bad-register", f"{ins.sig} takes {expected} argument registers, got {len(ins.srcs)}")
        if ins.dst is not None and ins.sig.ret is None:
            err("bad-register", f"void {ins.sig} has no result")
    elif op == "dyncall":
        if ins.shadows is not None and len(ins.shadows) != len(ins.srcs) - 1:
            err("bad-register", "shadow list must hold the result shadow plus one per argument")
    elif op == "ret":
        if m.sig.ret is None and ins.srcs:
            err("bad-register", "void method returns a value")
        if m.sig.ret is not None and not ins.srcs:
            err("bad-register", "non-void method returns nothing")
