import json

from taintweave.fuzz import random_inputs, random_program
from taintweave.pipeline import analyze, check_case, corpus_dir, instrument_levels, load_corpus, overhead
from taintweave.vm import RunConfig, run


def test_corpus_metadata():
    cases = load_corpus(corpus_dir())
    assert len(cases) >= 15
    for c in cases:
        meta = json.loads((corpus_dir() / f"{c.name}.expect.json").read_text())
        assert set(meta) == {"input", "violations", "scope_sparse", "extras_required"}
    assert {c.name for c in cases if c.extras_required} >= {"override_dispatch", "callback", "multidim", "array_field"}


def test_every_extras_fixture_needs_the_extras():
    for c in load_corpus(corpus_dir()):
        if c.extras_required:
            assert check_case(c).ok
            assert not check_case(c, extras=False).ok, c.name


def test_overhead_formula():
    assert overhead(150, 100) == 50.0
    assert overhead(5, 0) == 0.0


def test_fuzzed_programs_run_identically_at_every_level():
    for seed in range(120):
        p = random_program(seed, multidim=seed % 2 == 1)
        a = analyze(p)
        cfg = RunConfig(inputs=random_inputs(seed), budget=10**6)
        reps = {k: run(ip, cfg) for k, ip in instrument_levels(p, a.iset).items()}
        assert all(r.halted == "normal" for r in reps.values()), (seed, {k: r.error for k, r in reps.items()})
        assert reps["none"].output == reps["partial"].output == reps["full"].output, seed
        assert reps["none"].violations == []
