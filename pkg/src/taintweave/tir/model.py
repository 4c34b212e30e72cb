"""Core data types of the textual IR (TIR).

Everything here is immutable so programs can be hashed, compared
structurally and shared between analysis, instrumentation and execution.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

MANGLE_SUFFIX = "$$INVIVO_PC"

_IDENT = r"[A-Za-z_$][\w$]*"
_QUALIFIED = rf"{_IDENT}(?:\.{_IDENT})*"
_TYPE_RE = re.compile(rf"^({_QUALIFIED})((?:\[\])*)$")
_SIG_RE = re.compile(
    rf"^<\s*({_QUALIFIED})\s*:\s*(\S+)\s+({_IDENT})\s*\(([^()]*)\)\s*>$"
)


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class TypeDesc:
    kind: str  # int | bool | class | array
    name: Optional[str] = None
    element: Optional["TypeDesc"] = None
    dims: int = 0

    def __post_init__(self) -> None:
        if self.kind == "array":
            if self.element is None or self.element.kind == "array" or self.dims < 1:
                raise ValueError("array TypeDesc needs a non-array element and dims >= 1")
        elif self.kind == "class":
            if not self.name:
                raise ValueError("class TypeDesc needs a name")
        elif self.kind not in ("int", "bool"):
            raise ValueError(f"unknown type kind {self.kind!r}")

    def __str__(self) -> str:
        if self.kind == "array":
            return str(self.element) + "[]" * self.dims
        if self.kind == "class":
            return self.name  # type: ignore[return-value]
        return self.kind

    @property
    def is_prim(self) -> bool:
        return self.kind in ("int", "bool")

    @property
    def is_array(self) -> bool:
        return self.kind == "array"

    @property
    def is_prim_array(self) -> bool:
        return self.kind == "array" and self.element.is_prim  # type: ignore[union-attr]

    @property
    def class_name(self) -> Optional[str]:
        """Class referenced by this type, looking through arrays."""
        base = self.element if self.kind == "array" else self
        return base.name if base.kind == "class" else None  # type: ignore[union-attr]

    def element_type(self) -> "TypeDesc":
        """Type produced by indexing one level into this array."""
        if self.kind != "array":
            raise ValueError(f"{self} is not an array")
        if self.dims == 1:
            return self.element  # type: ignore[return-value]
        return array_of(self.element, self.dims - 1)  # type: ignore[arg-type]


INT = TypeDesc("int")
BOOL = TypeDesc("bool")


def class_type(name: str) -> TypeDesc:
    return TypeDesc("class", name=name)


def array_of(element: TypeDesc, dims: int = 1) -> TypeDesc:
    if element.kind == "array":
        return TypeDesc("array", element=element.element, dims=element.dims + dims)
    return TypeDesc("array", element=element, dims=dims)


def parse_type(text: str) -> TypeDesc:
    m = _TYPE_RE.match(text.strip())
    if not m:
        raise SignatureError(f"malformed type {text!r}")
    base_name, brackets = m.groups()
    if base_name in ("int", "bool"):
        base = TypeDesc(base_name)
    else:
        base = class_type(base_name)
    dims = len(brackets) // 2
    return array_of(base, dims) if dims else base


@dataclass(frozen=True)
class MethodSig:
    owner: str
    ret: Optional[TypeDesc]  # None means void
    name: str
    params: tuple[TypeDesc, ...] = ()

    def __str__(self) -> str:
        ret = "void" if self.ret is None else str(self.ret)
        params = ",".join(str(p) for p in self.params)
        return f"<{self.owner}: {ret} {self.name}({params})>"

    def __lt__(self, other: "MethodSig") -> bool:
        return str(self) < str(other)

    @property
    def key(self) -> tuple[str, tuple[TypeDesc, ...]]:
        """Dispatch key: name plus parameter types."""
        return (self.name, self.params)

    @property
    def is_mangled(self) -> bool:
        return self.name.endswith(MANGLE_SUFFIX)

    def with_owner(self, owner: str) -> "MethodSig":
        return MethodSig(owner, self.ret, self.name, self.params)


def parse_sig(text: str) -> MethodSig:
    """Parse a canonical ``<Owner: ret name(p1,p2)>`` signature."""
    m = _SIG_RE.match(text.strip())
    if not m:
        raise SignatureError(f"malformed signature {text!r}")
    owner, ret_text, name, params_text = m.groups()
    ret = None if ret_text == "void" else parse_type(ret_text)
    params_text = params_text.strip()
    params = tuple(parse_type(p) for p in params_text.split(",")) if params_text else ()
    return MethodSig(owner, ret, name, params)


def sig_sort_key(sig: MethodSig) -> str:
    return str(sig)


def box_class_for(ret: TypeDesc) -> str:
    return "runtime.TaintedBool" if ret.kind == "bool" else "runtime.TaintedInt"


def needs_mangling(sig: MethodSig) -> bool:
    """True when instrumenting ``sig`` changes its signature.

    Primitive or primitive 1-dim array params get shadow params appended;
    primitive returns get boxed.
    """
    if sig.ret is not None and sig.ret.is_prim:
        return True
    return any(_has_shadow(p) for p in sig.params)


def _has_shadow(t: TypeDesc) -> bool:
    return t.is_prim or (t.is_prim_array and t.dims == 1)


def shadow_param_types(sig: MethodSig) -> list[tuple[int, TypeDesc]]:
    """(param index, shadow type) for every param that carries a shadow."""
    out = []
    for i, p in enumerate(sig.params):
        if p.is_prim:
            out.append((i, INT))
        elif p.is_prim_array and p.dims == 1:
            out.append((i, array_of(INT)))
    return out


def mangled_sig(sig: MethodSig) -> MethodSig:
    ret = sig.ret
    if ret is not None and ret.is_prim:
        ret = class_type(box_class_for(ret))
    extra = tuple(t for _, t in shadow_param_types(sig))
    return MethodSig(sig.owner, ret, sig.name + MANGLE_SUFFIX, sig.params + extra)


@dataclass(frozen=True)
class FieldRef:
    cls: str
    name: str

    def __str__(self) -> str:
        return f"{self.cls}.{self.name}"


@dataclass(frozen=True)
class Label:
    name: str


BIN_OPS = ("add", "sub", "mul", "div", "or", "and", "xor", "lt", "eq")
OPCODES = (
    "const", "sconst", "move", "bin", "new", "newarr", "aload", "astore",
    "get", "put", "scall", "vcall", "dyncall", "ret", "jmp", "br",
)


@dataclass(frozen=True)
class Instr:
    """One register-machine instruction.

    Operand slots are shared across opcodes; unused ones stay at their
    defaults. A call without a destination register has ``dst=None``.

      const   dst, imm           sconst dst, text
      move    dst, srcs[0]       bin    binop, dst, srcs[0], srcs[1]
      new     dst, cls           newarr dst, type, srcs[0]
      aload   dst, srcs=(arr,idx)
      astore  srcs=(arr,idx,val)
      get     dst, srcs[0], fref put    srcs=(obj,val), fref
      scall   dst, sig, srcs=args
      vcall   dst, sig, srcs=(recv, *args)
      dyncall dst, srcs=(name, recv, *args), shadows=(dst_shadow, *arg_shadows)
      ret     srcs=() or (val,)
      jmp     target             br     srcs[0], target
    """

    op: str
    dst: Optional[int] = None
    srcs: tuple[int, ...] = ()
    imm: Optional[int] = None
    text: Optional[str] = None
    binop: Optional[str] = None
    cls: Optional[str] = None
    type: Optional[TypeDesc] = None
    fref: Optional[FieldRef] = None
    sig: Optional[MethodSig] = None
    target: Optional[str] = None
    shadows: Optional[tuple[Optional[int], ...]] = None

    def registers(self) -> list[int]:
        regs = [] if self.dst is None else [self.dst]
        regs.extend(self.srcs)
        if self.shadows:
            regs.extend(r for r in self.shadows if r is not None)
        return regs


BodyItem = Union[Instr, Label]


@dataclass(frozen=True)
class MethodDef:
    sig: MethodSig
    num_regs: int
    body: tuple[BodyItem, ...]
    static: bool = False

    @property
    def param_slots(self) -> int:
        """Registers occupied by incoming arguments (receiver included)."""
        return len(self.sig.params) + (0 if self.static else 1)

    def instructions(self) -> list[Instr]:
        return [item for item in self.body if isinstance(item, Instr)]


@dataclass(frozen=True)
class ClassDef:
    name: str
    superclass: Optional[str] = None
    fields: tuple[tuple[str, TypeDesc], ...] = ()
    methods: tuple[MethodDef, ...] = ()

    def field_type(self, name: str) -> Optional[TypeDesc]:
        for fname, ftype in self.fields:
            if fname == name:
                return ftype
        return None

    def method(self, sig: MethodSig) -> Optional[MethodDef]:
        for m in self.methods:
            if m.sig == sig:
                return m
        return None


@dataclass(frozen=True)
class Program:
    classes: tuple[ClassDef, ...] = ()
    entry: Optional[MethodSig] = None

    def class_map(self) -> dict[str, ClassDef]:
        return {c.name: c for c in self.classes}

    def methods(self) -> list[MethodDef]:
        return [m for c in self.classes for m in c.methods]

    def method_map(self) -> dict[MethodSig, MethodDef]:
        return {m.sig: m for c in self.classes for m in c.methods}


@dataclass(frozen=True)
class TableEntry:
    cls: str
    name: str
    arity: int
    original: MethodSig
    mangled: Optional[MethodSig] = None

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.cls, self.name, self.arity)


@dataclass(frozen=True)
class ReflectionTable:
    entries: tuple[TableEntry, ...] = ()

    def lookup(self) -> dict[tuple[str, str, int], TableEntry]:
        return {e.key: e for e in self.entries}


RULE_TAGS = ("intersection", "array-field", "override", "stdlib-callback", "multidim-boundary")


@dataclass(frozen=True)
class InstrumentSet:
    methods: frozenset[MethodSig] = frozenset()
    provenance: dict[MethodSig, str] = field(default_factory=dict, compare=False, hash=False)

    def __contains__(self, sig: object) -> bool:
        return sig in self.methods

    def __len__(self) -> int:
        return len(self.methods)

    def sorted(self) -> list[MethodSig]:
        return sorted(self.methods, key=sig_sort_key)


@dataclass(frozen=True)
class InstrumentedProgram:
    program: Program
    table: ReflectionTable
    instrument_set: InstrumentSet
