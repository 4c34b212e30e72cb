"""Known blind spots of partial instrumentation, pinned so they stay documented."""
from taintweave.pipeline import analyze, instrument_levels
from taintweave.tir import parse_program, parse_sig
from taintweave.vm import RunConfig, run

WRITE = "<stdlib.Out: void write(int)>"


def levels(text, inputs=(4,), **kw):
    p = parse_program(text)
    a = analyze(p, **kw)
    return a, {k: run(ip, RunConfig(inputs=inputs)) for k, ip in instrument_levels(p, a.iset).items()}


READ_IN_CALLEE = """
entry <Main: void main()>
class G { static method <G: int get()> { scall r0, <stdlib.In: int read()>
  ret r0 } }
class Main { static method <Main: void main()> {
  scall r0, <G: int get()>
  scall _, <stdlib.Out: void write(int)>, r0
  ret } }
"""


def test_taint_returned_by_a_reader_outside_the_sink_set_is_missed():
    a, reps = levels(READ_IN_CALLEE)
    assert a.iset.methods == frozenset()
    assert reps["full"].violation_keys() == [(WRITE, 1, 1)]
    assert reps["partial"].violations == []


def test_caller_closure_alone_does_not_recover_it():
    a, reps = levels(READ_IN_CALLEE, caller_closure=True)
    assert parse_sig("<Main: void main()>") in a.iset
    assert parse_sig("<G: int get()>") not in a.iset
    assert reps["partial"].violations == []


LEAF_HELPER = """
entry <Main: void main()>
class U { static method <U: int inc(int)> { const r1, 1
  bin add, r1, r0, r1
  ret r1 } }
class Main { static method <Main: void main()> {
  scall r0, <stdlib.In: int read()>
  scall r0, <U: int inc(int)>, r0
  scall _, <stdlib.Out: void write(int)>, r0
  ret } }
"""


def test_taint_through_an_uninstrumented_leaf_helper_is_dropped():
    a, reps = levels(LEAF_HELPER)
    assert a.iset.methods == {parse_sig("<Main: void main()>")}
    assert reps["full"].violation_keys() == [(WRITE, 1, 1)]
    assert reps["partial"].violations == []
    assert reps["partial"].output == reps["full"].output == [5]


STALE_FIELD = """
entry <Main: void main()>
class Acc {
  field v : int
  static method <Acc: void add(Acc,int)> { get r2, r0, Acc.v
    bin add, r2, r2, r1
    put r0, Acc.v, r2
    ret }
  static method <Acc: void flush(Acc)> { get r1, r0, Acc.v
    scall _, <stdlib.Out: void write(int)>, r1
    ret }
}
class Main { static method <Main: void main()> {
  scall r0, <stdlib.In: int read()>
  new r1, Acc
  scall _, <Acc: void add(Acc,int)>, r1, r0
  scall _, <Acc: void flush(Acc)>, r1
  ret } }
"""


def test_field_written_by_uninstrumented_method_keeps_a_stale_shadow():
    a, reps = levels(STALE_FIELD)
    assert parse_sig("<Acc: void add(Acc,int)>") not in a.iset
    assert reps["full"].violation_keys() == [(WRITE, 1, 1)]
    assert reps["partial"].violations == []


STUB_HEAVY = """
entry <Main: void main()>
class R { method <R: int f(int)> {
  scall _, <stdlib.Out: void write(int)>, r1
  ret r1 } }
class U { static method <U: void go()> {
  new r0, R
  const r1, 1
  vcall r2, <R: int f(int)>, r0, r1
  ret } }
class W { static method <W: void run()> {
  scall r0, <stdlib.In: int read()>
  new r1, R
  vcall r2, <R: int f(int)>, r1, r0
  ret } }
class Main { static method <Main: void main()> {
  scall _, <U: void go()>
  scall _, <W: void run()>
  ret } }
"""


def test_stub_cost_can_exceed_instrumenting_a_trivial_caller():
    _, reps = levels(STUB_HEAVY)
    counts = {k: r.instructions for k, r in reps.items()}
    assert reps["partial"].violation_keys() == reps["full"].violation_keys()
    assert counts["partial"] > counts["full"]
