"""Intrinsic ``stdlib.*`` classes and ``runtime.*`` builtins.

The VM implements these natively. Their signatures are known to the
validator, the fact extractor and the instrumenter, but they never have
TIR bodies.
"""
from __future__ import annotations

from .model import (
    INT,
    BOOL,
    MethodSig,
    TypeDesc,
    array_of,
    class_type,
    mangled_sig,
    needs_mangling,
)

FN = "stdlib.Fn"

READ = MethodSig("stdlib.In", INT, "read", ())
READ_BUF = MethodSig("stdlib.In", INT, "readBuf", (array_of(INT),))
WRITE = MethodSig("stdlib.Out", None, "write", (INT,))
PRINT = MethodSig("stdlib.Out", None, "print", (INT,))
EXEC = MethodSig("stdlib.Sys", None, "exec", (INT,))
MAP = MethodSig("stdlib.Hof", INT, "map", (class_type(FN), INT))
APPLY = MethodSig(FN, INT, "apply", (INT,))
BLANK = MethodSig("runtime.Shadow", array_of(INT), "blank", (array_of(INT),))

# sig -> is static
_STDLIB: dict[MethodSig, bool] = {
    READ: True,
    READ_BUF: True,
    WRITE: True,
    PRINT: True,
    EXEC: True,
    MAP: True,
    APPLY: False,
}

# Application classes may only extend these intrinsic classes.
EXTENSIBLE = frozenset({FN})

# Signatures an intrinsic class declares for application overrides.
CALLBACK_SIGS = frozenset({APPLY})

# Intrinsics that call back into application code: intrinsic -> callback sigs.
CALLBACK_CALLERS: dict[MethodSig, tuple[MethodSig, ...]] = {MAP: (APPLY,)}

BOX_FIELDS: dict[str, tuple[tuple[str, TypeDesc], ...]] = {
    "runtime.TaintedInt": (("val", INT), ("taint", INT)),
    "runtime.TaintedBool": (("val", BOOL), ("taint", INT)),
    "runtime.TaintedIntArray": (("arr", array_of(INT)), ("taintArr", array_of(INT))),
}
LIFTED_BOX = "runtime.TaintedIntArray"

_RUNTIME_METHODS: dict[MethodSig, bool] = {BLANK: True}


def _with_variants(table: dict[MethodSig, bool]) -> dict[MethodSig, bool]:
    out = dict(table)
    for sig, static in table.items():
        if needs_mangling(sig):
            out[mangled_sig(sig)] = static
    return out


INTRINSIC_METHODS: dict[MethodSig, bool] = {
    **_with_variants(_STDLIB),
    **_RUNTIME_METHODS,
}

INTRINSIC_CLASSES = frozenset(
    {sig.owner for sig in INTRINSIC_METHODS} | set(BOX_FIELDS)
)


def is_intrinsic_name(name: str) -> bool:
    return name.startswith("stdlib.") or name.startswith("runtime.")


def is_intrinsic(sig: MethodSig) -> bool:
    return is_intrinsic_name(sig.owner)


def intrinsic_field(cls: str, name: str) -> TypeDesc | None:
    for fname, ftype in BOX_FIELDS.get(cls, ()):
        if fname == name:
            return ftype
    return None


def is_box_class(name: str) -> bool:
    return name in BOX_FIELDS
