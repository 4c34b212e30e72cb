import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from taintweave.cli import (
    BenchRow,
    bench_csv,
    bench_rows,
    bench_text,
    main,
    parse_bench_csv,
    parse_bench_text,
)
from taintweave.pipeline import corpus_dir
from taintweave.scope import DEFAULT_SEEDS

EX1 = str(corpus_dir() / "ex1_chain.tir")


def test_analyze_ex1(tmp_path, capsys):
    out = tmp_path / "methods"
    assert main(["analyze", EX1, "--out", str(out)]) == 0
    assert out.read_text() == "<H: void h(int)>\n<Main: void main()>\n"


def test_analyze_explain_and_dump(tmp_path, capsys):
    facts = tmp_path / "facts.txt"
    assert main(["analyze", EX1, "--explain", "<H: void h(int)>", "--dump-facts", str(facts)]) == 0
    assert capsys.readouterr().out == "<H: void h(int)>  rule=intersection\n"
    assert "EDGE <Main: void main()> -> <H: void h(int)>" in facts.read_text()


def test_analyze_json(capsys):
    assert main(["analyze", EX1, "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["intersection"] == ["<H: void h(int)>", "<Main: void main()>"]


def test_analyze_no_sources_gives_empty_file(tmp_path):
    src = tmp_path / "p.tir"
    src.write_text("entry <Main: void main()>\nclass Main { static method <Main: void main()> { ret } }\n")
    out = tmp_path / "methods"
    assert main(["analyze", str(src), "--out", str(out)]) == 0
    assert out.read_text() == ""


def test_malformed_seeds_names_line(tmp_path, capsys):
    seeds = tmp_path / "seeds"
    seeds.write_text("[sources]\n<stdlib.In: int read()>\nbroken\n")
    assert main(["analyze", EX1, "--seeds", str(seeds)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_invalid_program_exit_1(tmp_path, capsys):
    src = tmp_path / "p.tir"
    src.write_text("entry <Main: void main()>\nclass Main { static method <Main: void main()> { scall _, <A: void f()>\n ret } }\n")
    assert main(["analyze", str(src)]) == 1
    assert "unresolved-method" in capsys.readouterr().err


def test_instrument_golden_and_full(tmp_path):
    methods, part, full = tmp_path / "m", tmp_path / "p.tir", tmp_path / "f.tir"
    assert main(["analyze", EX1, "--out", str(methods)]) == 0
    assert main(["instrument", EX1, str(methods), "--out", str(part)]) == 0
    assert part.read_text() == (Path(__file__).parent / "golden" / "ex1_partial.tir").read_text()
    assert main(["instrument", EX1, "--full", "--out", str(full)]) == 0
    mangled = lambda p: {ln.strip() for ln in p.read_text().splitlines() if "$$INVIVO_PC" in ln and "method" in ln}
    assert mangled(part) <= mangled(full)


def test_instrument_unknown_signature(tmp_path, capsys):
    methods = tmp_path / "m"
    methods.write_text("<Nope: void x()>\n")
    assert main(["instrument", EX1, str(methods)]) == 1
    assert "<Nope: void x()>" in capsys.readouterr().err


def test_instrument_requires_methods(capsys):
    assert main(["instrument", EX1]) == 1


def test_run_exit_codes(tmp_path, capsys):
    assert main(["run", EX1, "--input", "5"]) == 0
    assert json.loads(capsys.readouterr().out)["violations"] == []
    methods, part = tmp_path / "m", tmp_path / "p.tir"
    main(["analyze", EX1, "--out", str(methods)])
    main(["instrument", EX1, str(methods), "--out", str(part)])
    assert main(["run", str(part), "--input", "5", "--fail-on-violation"]) == 2
    assert main(["run", str(part), "--input", "5"]) == 0
    loop = tmp_path / "loop.tir"
    loop.write_text("entry <Main: void main()>\nclass Main { static method <Main: void main()> {\nL:\n jmp L\n } }\n")
    assert main(["run", str(loop), "--budget", "10"]) == 3
    capsys.readouterr()
    assert main(["run", EX1, "--input", "x"]) == 1


def test_run_trace(capsys):
    assert main(["run", EX1, "--input", "5", "--trace-calls"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert ["<Main: void main()>", "<H: void h(int)>"] in doc["trace"]


def test_usage_error_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_check_shipped_corpus(capsys):
    assert main(["check", str(corpus_dir())]) == 0
    assert "19/19 programs pass" in capsys.readouterr().out


def test_check_no_extras_fails_override(capsys):
    assert main(["check", str(corpus_dir()), "--no-extras"]) != 0
    out = capsys.readouterr().out
    assert "override_dispatch: detection failed" in out


def test_check_empty_corpus(tmp_path, capsys):
    assert main(["check", str(tmp_path)]) == 0
    assert "0/0 programs pass" in capsys.readouterr().out


def test_bench_tables(tmp_path, capsys):
    csv_path = tmp_path / "b.csv"
    assert main(["bench", str(corpus_dir()), "--iterations", "1", "--csv", str(csv_path)]) == 0
    text = capsys.readouterr().out
    rows = parse_bench_csv(csv_path.read_text())
    assert parse_bench_text(text) == rows
    assert len(rows) == 19
    for r in rows:
        assert r.overhead_partial <= r.overhead_full


def test_bench_row_round_trip():
    rows = [BenchRow("a", 10, 12, 20, 3, 1), BenchRow("b", 7, 7, 9, 2, 0)]
    assert parse_bench_csv(bench_csv(rows)) == rows
    assert parse_bench_text(bench_text(rows)) == rows
    assert rows[1].overhead_partial == 0.0


def test_bench_trivial_program(tmp_path):
    shutil.copy(corpus_dir() / "negative_print.tir", tmp_path / "t.tir")
    rows, failures = bench_rows(str(tmp_path), DEFAULT_SEEDS, 2)
    assert failures == [] and rows[0].overhead_partial == 0.0


def test_pipeline_is_byte_stable(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / str(k)
        d.mkdir()
        main(["analyze", EX1, "--out", str(d / "m")])
        main(["instrument", EX1, str(d / "m"), "--out", str(d / "i.tir")])
        main(["run", str(d / "i.tir"), "--input", "5", "--out", str(d / "r.json")])
        outs.append([(d / n).read_bytes() for n in ("m", "i.tir", "r.json")])
    assert outs[0] == outs[1]


def test_console_script_module():
    r = subprocess.run([sys.executable, "-m", "taintweave.cli", "run", EX1, "--input", "5"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["output"] == [5]
