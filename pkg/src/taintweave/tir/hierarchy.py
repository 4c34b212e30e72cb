from __future__ import annotations

from functools import cached_property
from typing import Optional

from . import builtins
from .model import ClassDef, MethodDef, MethodSig, Program, TypeDesc


class Hierarchy:
    """Class-hierarchy queries over a program plus the intrinsic classes."""

    def __init__(self, program: Program):
        self.program = program
        self.classes: dict[str, ClassDef] = program.class_map()
        self.methods: dict[MethodSig, MethodDef] = program.method_map()

    def is_known_class(self, name: str) -> bool:
        return name in self.classes or name in builtins.INTRINSIC_CLASSES

    def type_resolves(self, t: Optional[TypeDesc]) -> bool:
        if t is None:
            return True
        name = t.class_name
        return name is None or self.is_known_class(name)

    def superclass(self, name: str) -> Optional[str]:
        cls = self.classes.get(name)
        return cls.superclass if cls else None

    def chain(self, name: str) -> list[str]:
        """``name`` followed by its superclasses, nearest first; cycle-safe."""
        out: list[str] = []
        cur: Optional[str] = name
        while cur is not None and cur not in out:
            out.append(cur)
            cur = self.superclass(cur)
        return out

    def is_subclass(self, sub: str, sup: str) -> bool:
        return sup in self.chain(sub)

    @cached_property
    def children(self) -> dict[str, list[str]]:
        kids: dict[str, list[str]] = {}
        for cls in self.program.classes:
            if cls.superclass is not None:
                kids.setdefault(cls.superclass, []).append(cls.name)
        return kids

    def subclasses(self, name: str) -> list[str]:
        """Transitive subclasses of ``name`` in declaration order (excluding it)."""
        out: list[str] = []
        stack = list(reversed(self.children.get(name, [])))
        while stack:
            cur = stack.pop()
            if cur in out or cur == name:
                continue
            out.append(cur)
            stack.extend(reversed(self.children.get(cur, [])))
        return out

    def resolve_field(self, cls: str, fname: str) -> Optional[tuple[str, TypeDesc]]:
        """(declaring class, field type) for ``cls.fname``, searching superclasses."""
        for name in self.chain(cls):
            cdef = self.classes.get(name)
            if cdef is not None:
                ftype = cdef.field_type(fname)
                if ftype is not None:
                    return name, ftype
            else:
                ftype = builtins.intrinsic_field(name, fname)
                if ftype is not None:
                    return name, ftype
        return None

    def all_fields(self, cls: str) -> list[tuple[str, TypeDesc]]:
        """Fields of ``cls`` including inherited ones, root class first."""
        out: list[tuple[str, TypeDesc]] = []
        for name in reversed(self.chain(cls)):
            cdef = self.classes.get(name)
            if cdef is not None:
                out.extend(cdef.fields)
            else:
                out.extend(builtins.BOX_FIELDS.get(name, ()))
        return out

    def is_static(self, sig: MethodSig) -> Optional[bool]:
        """Static-ness of a declared or intrinsic method, None when unresolved."""
        m = self.methods.get(sig)
        if m is not None:
            return m.static
        return builtins.INTRINSIC_METHODS.get(sig)

    def resolves(self, sig: MethodSig) -> bool:
        return self.is_static(sig) is not None

    def dispatch(self, recv_class: str, sig: MethodSig) -> Optional[MethodSig]:
        """Most specific instance method matching ``sig``'s name and params."""
        for name in self.chain(recv_class):
            cdef = self.classes.get(name)
            if cdef is None:
                return None
            for m in cdef.methods:
                if not m.static and m.sig.name == sig.name and m.sig.params == sig.params:
                    return m.sig
        return None

    def overridden(self, m: MethodDef) -> list[MethodSig]:
        """Every superclass method (application or intrinsic) that ``m`` overrides."""
        if m.static:
            return []
        out = []
        for name in self.chain(m.sig.owner)[1:]:
            cand = m.sig.with_owner(name)
            cdef = self.classes.get(name)
            if cdef is not None:
                sm = cdef.method(cand)
                if sm is not None and not sm.static:
                    out.append(cand)
            elif builtins.INTRINSIC_METHODS.get(cand) is False:
                out.append(cand)
        return out
