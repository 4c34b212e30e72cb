from taintweave.extras import (
    close_instrument_set,
    infer_array_field_methods,
    infer_multidim_boundary,
    infer_override_closure,
    infer_stdlib_callbacks,
)
from taintweave.facts import build_facts
from taintweave.fuzz import random_program
from taintweave.pipeline import analyze, corpus_dir
from taintweave.tir import InstrumentSet, parse_program, parse_sig

S = parse_sig


def facts(body):
    p = parse_program("entry <Main: void main()>\n" + body + "\nclass Main { static method <Main: void main()> { ret } }")
    return build_facts(p)


ARRAY = """
class D {
  field buf : int[]
  static method <D: void w(D,int)> { newarr r2, int[], r1
    put r0, D.buf, r2
    ret }
}
class E {
  field other : int[]
  static method <E: void w2(E,int)> { newarr r2, int[], r1
    put r0, E.other, r2
    ret }
}
class K {
  static method <K: void h(D)> { get r1, r0, D.buf
    ret }
}
"""


def test_rule1_no_array_fields():
    fb = facts("class K { static method <K: void h(int)> { ret } }")
    assert infer_array_field_methods(fb, {S("<K: void h(int)>")}) == set()


def test_rule1_writer_of_observed_field():
    fb = facts(ARRAY)
    assert infer_array_field_methods(fb, {S("<K: void h(D)>")}) == {S("<D: void w(D,int)>")}


def test_rule1_scoped_and_global():
    fb = facts(ARRAY)
    assert S("<E: void w2(E,int)>") not in infer_array_field_methods(fb, {S("<K: void h(D)>")})
    assert S("<E: void w2(E,int)>") in infer_array_field_methods(fb, {S("<K: void h(D)>")}, global_scope=True)


CHAIN = """
class A { method <A: int f(int)> { ret r1 } }
class B extends A { method <B: int f(int)> { ret r1 } }
class C extends B { method <C: int f(int)> { ret r1 } }
"""


def test_rule2_no_overridable_members():
    fb = facts(CHAIN)
    assert infer_override_closure(fb, {S("<C: int f(int)>")}) == set()


def test_rule2_direct_override():
    fb = facts(CHAIN)
    assert S("<B: int f(int)>") in infer_override_closure(fb, {S("<A: int f(int)>")})


def test_rule2_transitive_chain_after_closure():
    fb = facts(CHAIN)
    iset = close_instrument_set(fb, scope={S("<A: int f(int)>")})
    assert iset.methods == {S("<A: int f(int)>"), S("<B: int f(int)>"), S("<C: int f(int)>")}
    assert iset.provenance[S("<C: int f(int)>")] == "override"


def test_rule2_sibling_completion():
    fb = facts("""
class A { method <A: int f(int)> { ret r1 } }
class B extends A { method <B: int f(int)> { ret r1 } }
class U { static method <U: void go(A)> { const r1, 1
  vcall r2, <A: int f(int)>, r0, r1
  ret } }
""")
    # an instrumented caller with one instrumented target pulls in the whole cone
    got = close_instrument_set(fb, scope={S("<U: void go(A)>"), S("<B: int f(int)>")})
    assert S("<A: int f(int)>") in got


def test_rule3_callbacks():
    fb = facts("class Cmp extends stdlib.Fn { method <Cmp: int apply(int)> { ret r1 } }")
    assert infer_stdlib_callbacks(fb, set()) == set()  # never handed to stdlib
    fb = build_facts(parse_program((corpus_dir() / "callback.tir").read_text()))
    assert infer_stdlib_callbacks(fb, set()) == {S("<Inc: int apply(int)>")}


def test_rule3_object_only_callback_needs_nothing():
    fb = build_facts(parse_program("""
entry <Main: void main()>
class Holder { }
class V { static method <V: void see(Holder)> { ret } }
class Main { static method <Main: void main()> { ret } }
"""))
    assert infer_stdlib_callbacks(fb, set()) == set()


MULTI = """
class M { static method <M: int[][] mk(int)> { newarr r1, int[][], r0
  ret r1 } }
class H { static method <H: void h(int)> { scall r1, <M: int[][] mk(int)>, r0
  ret } }
class G { static method <G: void g(int)> { scall r1, <M: int[][] mk(int)>, r0
  ret } }
"""


def test_rule4_multidim():
    fb = facts(MULTI)
    assert infer_multidim_boundary(fb, fb.edges, set()) == set()
    assert infer_multidim_boundary(fb, fb.edges, {S("<H: void h(int)>")}) == {S("<M: int[][] mk(int)>")}
    assert infer_multidim_boundary(fb, fb.edges, {S("<K: void k()>")}) == set()


def test_rule4_no_multidim():
    fb = facts(CHAIN)
    assert infer_multidim_boundary(fb, fb.edges, {S("<A: int f(int)>")}) == set()


def test_empty_intersection_closes_to_empty():
    fb = facts(CHAIN)
    assert close_instrument_set(fb, scope=set()).methods == frozenset()


def test_ex1_with_override():
    p = parse_program("""
entry <Main: void main()>
class H { method <H: void h(int)> { scall _, <stdlib.Out: void write(int)>, r1
  ret } }
class B extends H { method <B: void h(int)> { ret } }
class Main { static method <Main: void main()> {
  scall r0, <stdlib.In: int read()>
  new r1, H
  vcall _, <H: void h(int)>, r1, r0
  ret } }
""")
    a = analyze(p)
    assert a.iset.methods == {S("<Main: void main()>"), S("<H: void h(int)>"), S("<B: void h(int)>")}
    assert a.iset.provenance[S("<B: void h(int)>")] == "override"


def test_no_extras_is_the_intersection():
    p = parse_program((corpus_dir() / "override_dispatch.tir").read_text())
    a = analyze(p, extras=False)
    assert a.iset.methods == a.scope.intersection


def _check_closure(p):
    fb = build_facts(p)
    a = analyze(p)
    s = a.iset
    again = close_instrument_set(fb, scope=s)
    assert again.methods == s.methods
    assert close_instrument_set(fb, scope=InstrumentSet(s.methods)).methods == s.methods
    assert {m for m in a.scope.intersection if not m.owner.startswith(("stdlib.", "runtime."))} <= s.methods
    for o in fb.overrides:
        if o.sup in s:
            assert o.sub in s
    boundary = {b.callee for b in fb.multidim_boundaries}
    for e in fb.edges:
        if e.caller in s and e.callee in boundary:
            assert e.callee in s
    assert all(not m.owner.startswith(("stdlib.", "runtime.")) for m in s.methods)
    assert len(s) <= len(p.methods())


def test_closure_properties_on_fuzzed_programs():
    for seed in range(100):
        _check_closure(random_program(seed, multidim=True))
