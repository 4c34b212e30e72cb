"""Flow-insensitive register typing for method bodies.

The instrumenter needs to know, per register, whether it holds a
primitive, a primitive 1-dim array, a multi-dim primitive array or a
reference, because each gets a different kind of shadow. Registers are
required to keep one such shape for the whole body.
"""
from __future__ import annotations

from typing import Optional

from .hierarchy import Hierarchy
from .model import BOOL, INT, Instr, MethodDef, TypeDesc, class_type

STRING = class_type("$string")


class RegTypeError(ValueError):
    pass


def shape(t: Optional[TypeDesc]) -> tuple[str, int]:
    """Shadow-relevant shape: ('prim'|'parr'|'marr'|'ref', dims)."""
    if t is None or t.is_prim:
        return ("prim", 0)
    if t.is_prim_array:
        return ("parr", 1) if t.dims == 1 else ("marr", t.dims)
    return ("ref", 0)


def infer_register_types(m: MethodDef, h: Hierarchy) -> dict[int, TypeDesc]:
    types: dict[int, TypeDesc] = {}
    slot = 0
    if not m.static:
        types[0] = class_type(m.sig.owner)
        slot = 1
    for i, p in enumerate(m.sig.params):
        types[slot + i] = p

    instrs = m.instructions()
    changed = True
    while changed:
        changed = False
        for ins in instrs:
            if ins.dst is None:
                continue
            t = _result_type(ins, types, h)
            if t is None:
                continue
            old = types.get(ins.dst)
            if old is None:
                types[ins.dst] = t
                changed = True
            elif shape(old) != shape(t):
                raise RegTypeError(
                    f"{m.sig}: r{ins.dst} used as both {old} and {t}")
    return types


def _result_type(ins: Instr, types: dict[int, TypeDesc], h: Hierarchy) -> Optional[TypeDesc]:
    op = ins.op
    if op == "const":
        return INT
    if op == "sconst":
        return STRING
    if op == "move":
        return types.get(ins.srcs[0])
    if op == "bin":
        return BOOL if ins.binop in ("lt", "eq") else INT
    if op == "new":
        return class_type(ins.cls)
    if op == "newarr":
        return ins.type
    if op == "aload":
        arr = types.get(ins.srcs[0])
        if arr is None or not arr.is_array:
            return None
        return arr.element_type()
    if op == "get":
        resolved = h.resolve_field(ins.fref.cls, ins.fref.name)
        return resolved[1] if resolved else None
    if op in ("scall", "vcall"):
        return ins.sig.ret
    if op == "dyncall":
        # reflective results are treated as primitives
        return INT
    return None
