import pytest

from taintweave.fuzz import random_program, random_program_text
from taintweave.pipeline import corpus_dir
from taintweave.tir import (
    INT,
    MethodSig,
    ParseError,
    SignatureError,
    array_of,
    class_type,
    emit_program,
    parse_program,
    parse_sig,
    parse_type,
    validate_program,
)

MINIMAL = "entry <Main: void main()>\nclass Main { static method <Main: void main()> { ret } }"


def ex1_text():
    return (corpus_dir() / "ex1_chain.tir").read_text()


def categories(p):
    return [e.category for e in validate_program(p)]


def test_empty_source_has_no_classes_and_no_entry():
    p = parse_program("")
    assert p.classes == ()
    assert categories(p) == ["missing-entry"]


def test_minimal_program():
    p = parse_program("class Main { method <Main: void main()> { ret } }")
    assert len(p.classes) == 1 and len(p.methods()) == 1


def test_minimal_with_entry_validates():
    assert validate_program(parse_program(MINIMAL)) == []


def test_ex1_parses_and_round_trips():
    p = parse_program(ex1_text())
    assert [c.name for c in p.classes] == ["Main", "H"]
    assert parse_program(emit_program(p)) == p


def test_emission_is_deterministic():
    p = parse_program(ex1_text())
    assert emit_program(p) == emit_program(parse_program(ex1_text()))
    assert emit_program(parse_program(emit_program(p))) == emit_program(p)


def test_minimal_canonical_text():
    text = emit_program(parse_program(MINIMAL))
    assert "class Main {" in text
    assert "static method <Main: void main()> regs 0 {" in text


def test_unresolved_method():
    p = parse_program(
        "entry <Main: void main()>\n"
        "class Main { static method <Main: void main()> { scall _, <A: void f()>\n ret } }")
    assert categories(p) == ["unresolved-method"]


def test_unresolved_field():
    p = parse_program(
        "entry <Main: void main()>\nclass A {}\n"
        "class Main { static method <Main: void main()> { new r0, A\n get r1, r0, A.nope\n ret } }")
    assert "unresolved-field" in categories(p)


def test_bad_label_and_register():
    p = parse_program(
        "entry <Main: void main()>\n"
        "class Main { static method <Main: void main()> regs 1 { const r3, 1\n jmp Nowhere\n ret } }")
    cats = categories(p)
    assert "bad-register" in cats and "bad-label" in cats


def test_validate_is_deterministic():
    p = random_program(11)
    assert validate_program(p) == validate_program(p)


def test_syntax_error_has_position():
    with pytest.raises(ParseError) as exc:
        parse_program("class Main {\n  method <Main: void main()> {\n    frob r0\n  }\n}")
    assert "3" in str(exc.value)


def test_duplicate_method_rejected():
    with pytest.raises(ParseError):
        parse_program("class A { method <A: void f()> { ret }\n method <A: void f()> { ret } }")


def test_icu_signature():
    s = parse_sig("<com.ibm.icu.util.ULocale$IDParser: void append(char)>")
    assert s == MethodSig("com.ibm.icu.util.ULocale$IDParser", None, "append", (class_type("char"),))
    assert str(s) == "<com.ibm.icu.util.ULocale$IDParser: void append(char)>"


@pytest.mark.parametrize("text", [
    "<A: void f()>", "<A: int g(int,bool)>", "<p.q.R: int[][] h(int[],p.q.R)>",
    "<A: A$B k(A$B[])>",
])
def test_signature_round_trip(text):
    assert str(parse_sig(text)) == text


@pytest.mark.parametrize("bad", ["A: void f()", "<A void f()>", "<A: void f(>", "<: void f()>"])
def test_malformed_signature(bad):
    with pytest.raises(SignatureError):
        parse_sig(bad)


def test_types():
    assert parse_type("int") == INT
    t = parse_type("int[][]")
    assert t == array_of(INT, 2) and t.dims == 2 and t.element_type() == array_of(INT)


def test_round_trip_200_generated_programs():
    for seed in range(200):
        p = random_program(seed, multidim=seed % 2 == 0)
        assert validate_program(p) == []
        assert parse_program(emit_program(p)) == p, seed


def test_generator_is_deterministic():
    assert random_program_text(5) == random_program_text(5)
