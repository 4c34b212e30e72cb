"""Closing the intersection under the additional-method rules.

Each rule names methods that must be instrumented together with the
current set, otherwise the caller/callee contract or the shadow state
breaks at run time. The rules are iterated jointly to a fixpoint.
"""
from __future__ import annotations

from typing import Iterable, Optional, Union

from .facts import CallEdge, FactBase
from .scope import ScopeResult
from .tir import builtins
from .tir.model import InstrumentSet, MethodSig, needs_mangling, sig_sort_key

__all__ = [
    "InstrumentSet",
    "close_instrument_set",
    "infer_array_field_methods",
    "infer_multidim_boundary",
    "infer_override_closure",
    "infer_stdlib_callbacks",
]


def _app(sigs: Iterable[MethodSig]) -> set[MethodSig]:
    return {s for s in sigs if not builtins.is_intrinsic(s)}


def infer_array_field_methods(fb: FactBase, current: Iterable[MethodSig], global_scope: bool = False) -> set[MethodSig]:
    """Writers of array fields that the current set can observe.

    A field is observable when a member belongs to the declaring class or
    accesses the field. ``global_scope`` drops that condition.
    """
    current = set(current)
    owners = {m.owner for m in current}
    touched = {(a.owner_class, a.field) for a in fb.field_accesses if a.method in current}
    out = set()
    for w in fb.array_field_writes:
        if w.method in current:
            continue
        if global_scope or w.owner_class in owners or (w.owner_class, w.field) in touched:
            out.add(w.method)
    return _app(out)


def infer_override_closure(fb: FactBase, current: Iterable[MethodSig]) -> set[MethodSig]:
    """Overrides of members, plus the CHA cone of mangled virtual sites.

    An instrumented caller invokes the mangled name at a virtual site, so
    every possible target must provide it once any one of them does.
    """
    current = set(current)
    out = {o.sub for o in fb.overrides if o.sup in current and o.sub not in current}
    for inv, targets in fb.site_targets.items():
        if inv.caller not in current or not needs_mangling(inv.declared):  # type: ignore[arg-type]
            continue
        if builtins.is_intrinsic(inv.declared) or targets & current:  # type: ignore[arg-type]
            out |= {t for t in targets if t not in current}
    return _app(out)


def infer_stdlib_callbacks(fb: FactBase, current: Iterable[MethodSig]) -> set[MethodSig]:
    current = set(current)
    return _app(s for s in fb.stdlib_called if s not in current and needs_mangling(s))


def infer_multidim_boundary(fb: FactBase, edges: Iterable, current: Iterable[MethodSig]) -> set[MethodSig]:
    current = set(current)
    boundary = {b.callee for b in fb.multidim_boundaries}
    out = set()
    for e in edges:
        caller, callee = (e.caller, e.callee) if isinstance(e, CallEdge) else e
        if caller in current and callee in boundary and callee not in current:
            out.add(callee)
    return _app(out)


def close_instrument_set(
    fb: FactBase,
    edges: Optional[Iterable] = None,
    scope: Union[ScopeResult, InstrumentSet, Iterable[MethodSig]] = (),
    rule1_global: bool = False,
    extras: bool = True,
) -> InstrumentSet:
    """Least superset of the start set closed under all four rules.

    ``scope`` is a ScopeResult (its intersection is the start) or any set
    of signatures, so an already closed set can be closed again.
    """
    edges = list(fb.edges if edges is None else edges)
    if isinstance(scope, ScopeResult):
        start = scope.intersection
    elif isinstance(scope, InstrumentSet):
        start = scope.methods
    else:
        start = frozenset(scope)
    provenance: dict[MethodSig, str] = {}
    if isinstance(scope, InstrumentSet):
        provenance.update(scope.provenance)
    for s in _app(start):
        provenance.setdefault(s, "intersection")
    current = _app(start)

    rules = (
        ("array-field", lambda cur: infer_array_field_methods(fb, cur, rule1_global)),
        ("override", lambda cur: infer_override_closure(fb, cur)),
        ("stdlib-callback", lambda cur: infer_stdlib_callbacks(fb, cur)),
        ("multidim-boundary", lambda cur: infer_multidim_boundary(fb, edges, cur)),
    )
    changed = extras
    while changed:
        changed = False
        for tag, rule in rules:
            new = rule(current) - current
            for s in sorted(new, key=sig_sort_key):
                provenance.setdefault(s, tag)
            if new:
                current |= new
                changed = True
    return InstrumentSet(frozenset(current), {s: provenance[s] for s in current})
