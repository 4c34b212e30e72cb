from taintweave.facts import (
    CallEdge,
    OverrideFact,
    build_facts,
    cha_targets,
    dump_facts,
    extract_facts,
    flatten_call_edges,
)
from taintweave.fuzz import random_inputs, random_program
from taintweave.pipeline import corpus_dir, load_corpus
from taintweave.tir import parse_program, parse_sig
from taintweave.vm import RunConfig, run

S = parse_sig


def prog(body):
    return parse_program("entry <Main: void main()>\n" + body)


def ex1():
    return parse_program((corpus_dir() / "ex1_chain.tir").read_text())


def test_minimal_has_no_facts():
    fb = extract_facts(prog("class Main { static method <Main: void main()> { ret } }"))
    assert fb.invocations == [] and fb.overrides == set()


def test_override_fact():
    p = prog("""
class A { method <A: int f(int)> { ret r1 } }
class B extends A { method <B: int f(int)> { ret r1 } }
class Main { static method <Main: void main()> { ret } }
""")
    assert extract_facts(p).overrides == {OverrideFact(S("<B: int f(int)>"), S("<A: int f(int)>"))}


def test_ex1_invocations_and_edges():
    fb = build_facts(ex1())
    assert len(fb.invocations) == 3
    main, h = S("<Main: void main()>"), S("<H: void h(int)>")
    assert fb.edges == {
        CallEdge(main, S("<stdlib.In: int read()>")),
        CallEdge(main, h),
        CallEdge(h, S("<stdlib.Out: void write(int)>")),
    }


CONE = """
class A { method <A: int f(int)> { ret r1 } }
class B extends A { method <B: int f(int)> { ret r1 } }
class C extends A { method <C: int f(int)> { ret r1 } }
class Main {
  static method <Main: void main()> {
    new r0, A
    const r1, 1
    vcall r2, <A: int f(int)>, r0, r1
    ret
  }
}
"""


def test_virtual_site_cha_cone():
    fb = build_facts(prog(CONE))
    main = S("<Main: void main()>")
    assert {e.callee for e in fb.edges if e.caller == main} == {
        S("<A: int f(int)>"), S("<B: int f(int)>"), S("<C: int f(int)>")}


def test_dyncall_constant_name():
    p = prog("""
class A { method <A: int f(int)> { ret r1 }
          method <A: int g(int)> { ret r1 } }
class Main {
  static method <Main: void main()> {
    new r0, A
    sconst r1, "f"
    const r2, 1
    dyncall r3, r1, r0, r2
    ret
  }
}
""")
    fb = build_facts(p)
    assert {e.callee for e in fb.edges} == {S("<A: int f(int)>")}


def test_cha_targets():
    p = prog(CONE)
    assert cha_targets(p, S("<B: int f(int)>")) == {S("<B: int f(int)>")}
    assert S("<A: int f(int)>") in cha_targets(p, S("<A: int f(int)>"))


def test_cha_four_level_chain():
    p = prog("""
class L0 { method <L0: int f(int)> { ret r1 } }
class L1 extends L0 { method <L1: int f(int)> { ret r1 } }
class L2 extends L1 { }
class L3 extends L2 { method <L3: int f(int)> { ret r1 } }
class Main { static method <Main: void main()> { ret } }
""")
    assert cha_targets(p, S("<L0: int f(int)>")) == {
        S("<L0: int f(int)>"), S("<L1: int f(int)>"), S("<L3: int f(int)>")}


def test_no_callbacks():
    assert build_facts(ex1()).stdlib_called == set()


CALLBACKS = """
class Cmp extends stdlib.Fn { method <Cmp: int apply(int)> { ret r1 } }
class Other extends stdlib.Fn { method <Other: int apply(int)> { ret r1 } }
class Main {
  static method <Main: void main()> {
    new r0, Cmp
    const r1, 3
    scall r2, <stdlib.Hof: int map(stdlib.Fn,int)>, r0, r1
    ret
  }
}
"""


def test_stdlib_callbacks_over_approximate():
    fb = build_facts(prog(CALLBACKS))
    assert fb.stdlib_called == {S("<Cmp: int apply(int)>"), S("<Other: int apply(int)>")}


def test_dump_format():
    lines = dump_facts(build_facts(prog(CALLBACKS))).splitlines()
    assert "STDLIBCB <Cmp: int apply(int)>" in lines
    assert any(ln.startswith("EDGE <Main: void main()> -> ") for ln in lines)


def test_multidim_boundary_facts():
    p = prog("""
class M { static method <M: int[][] mk(int)> { newarr r1, int[][], r0
 ret r1 } }
class Main { static method <Main: void main()> { ret } }
""")
    assert {(b.callee, b.via) for b in extract_facts(p).multidim_boundaries} == {
        (S("<M: int[][] mk(int)>"), "return")}


def test_extraction_is_deterministic():
    p = random_program(7)
    a, b = build_facts(p), build_facts(p)
    assert dump_facts(a) == dump_facts(b)


def test_flatten_is_monotone_under_added_method():
    p = prog(CONE)
    before = build_facts(p).edges
    q = prog(CONE.replace("class C extends A {", "class D extends C { method <D: int f(int)> { ret r1 } }\nclass C extends A {"))
    after = build_facts(q).edges
    assert before <= after
    assert flatten_call_edges(extract_facts(p), p).edges == before


def test_dynamic_trace_within_static_edges():
    programs = [c.program for c in load_corpus(corpus_dir())]
    programs += [random_program(s) for s in range(40)]
    for i, p in enumerate(programs):
        edges = build_facts(p).edges
        rep = run(p, RunConfig(inputs=random_inputs(i), trace_calls=True))
        assert rep.halted == "normal"
        assert set(rep.trace) <= edges
