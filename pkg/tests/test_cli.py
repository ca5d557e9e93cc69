import shutil
import subprocess
import sys

import pytest

from architext.cli import EXIT_BUDGET, EXIT_INPUT, EXIT_INVALID, EXIT_OK, main, read_config
from architext.grammar import CondensedGrammar
from architext.metagrammar import validate
from architext.rewrite import CSV_HEADER

from conftest import FIG_QUOTIENT, STRUCTURED_GRAMMAR


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / "corpus"
    assert main(["generate", "--n", "60", "--seed", "7", "--dropout", "0.1", "--out", str(out)]) == EXIT_OK
    return out


def test_generate_writes_files(corpus_dir, capsys):
    assert {p.name for p in corpus_dir.iterdir()} == {"trees.txt", "entities.tsv", "grammar.txt"}
    assert len(corpus_dir.joinpath("trees.txt").read_text().splitlines()) == 60


def test_generate_from_schema_file(tmp_path):
    schema = tmp_path / "schema.txt"
    schema.write_text("group G0 = A B\ngroup G1 = C\nrelation R0 = G0 G1\n")
    assert main(["generate", "--schema", str(schema), "--n", "5", "--out", str(tmp_path / "o")]) == EXIT_OK
    schema.write_text("group G0 = A A\n")
    assert main(["generate", "--schema", str(schema), "--n", "5", "--out", str(tmp_path / "o")]) == EXIT_INPUT


def test_structure_end_to_end(corpus_dir, tmp_path, capsys):
    out = tmp_path / "run"
    code = main([
        "structure", "--trees", str(corpus_dir / "trees.txt"),
        "--entities", str(corpus_dir / "entities.tsv"), "--out", str(out),
    ])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "grammar: valid" in text
    grammar = CondensedGrammar.read(out / "grammar.txt")
    assert validate(grammar).valid
    csv = (out / "metrics.csv").read_text().splitlines()
    assert csv[0] == CSV_HEADER and len(csv) >= 2
    assert (out / "instance.txt").read_text().startswith("(ROOT")

    # the written instance is already structured
    again = tmp_path / "again"
    assert main(["structure", "--instance", str(out / "instance.txt"), "--out", str(again)]) == EXIT_OK
    assert CondensedGrammar.read(again / "grammar.txt") == grammar
    assert "iterations: 0" in capsys.readouterr().out


def test_structure_budget_exit_code(corpus_dir, tmp_path, capsys):
    code = main([
        "structure", "--trees", str(corpus_dir / "trees.txt"), "--entities", str(corpus_dir / "entities.tsv"),
        "--max-cycles", "1", "--out", str(tmp_path / "r"),
    ])
    assert code == EXIT_BUDGET
    assert "budget exhausted" in capsys.readouterr().out


def test_structure_config_file(corpus_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\ntau = 0.9\nmax-cycles = 1\n")
    assert read_config(cfg) == {"tau": 0.9, "max_cycles": 1}
    base = ["structure", "--trees", str(corpus_dir / "trees.txt"), "--entities", str(corpus_dir / "entities.tsv"),
            "--config", str(cfg), "--out", str(tmp_path / "r")]
    assert main(base) == EXIT_BUDGET
    # flags override the file
    assert main(base + ["--max-cycles", "50"]) == EXIT_OK


@pytest.mark.parametrize("content", ["speed = 3\n", "tau = high\n", "tau\n"])
def test_bad_config(tmp_path, content, corpus_dir):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(content)
    code = main(["structure", "--trees", str(corpus_dir / "trees.txt"), "--config", str(cfg),
                 "--out", str(tmp_path / "r")])
    assert code == EXIT_INPUT


def test_structure_input_errors(tmp_path, capsys):
    assert main(["structure", "--out", str(tmp_path / "r")]) == EXIT_INPUT
    assert main(["structure", "--trees", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "r")]) == EXIT_INPUT
    bad = tmp_path / "bad.txt"
    bad.write_text("(S (NN a)\n")
    assert main(["structure", "--trees", str(bad), "--out", str(tmp_path / "r")]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_structure_empty_corpus(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert main(["structure", "--trees", str(empty), "--out", str(tmp_path / "r")]) == EXIT_OK
    assert "0 rules" in capsys.readouterr().out


def test_validate(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text(STRUCTURED_GRAMMAR)
    assert main(["validate", "--grammar", str(g)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "valid"
    g.write_text(STRUCTURED_GRAMMAR.replace("REL_1 -> GROUP_1 GROUP_2", "REL_1 -> GROUP_1"))
    assert main(["validate", "--grammar", str(g)]) == EXIT_INVALID
    assert "meta-rule 17" in capsys.readouterr().out
    g.write_text("this is not a grammar\n")
    assert main(["validate", "--grammar", str(g)]) == EXIT_INPUT


def test_extract(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    inst.write_text(FIG_QUOTIENT + "\n")
    assert main(["extract", "--instance", str(inst)]) == EXIT_OK
    assert capsys.readouterr().out == "ROOT -> X+ Y\nX -> a b c\nY -> a\n"
    out = tmp_path / "g.txt"
    assert main(["extract", "--instance", str(inst), "--out", str(out)]) == EXIT_OK
    assert out.read_text() == "ROOT -> X+ Y\nX -> a b c\nY -> a\n"


def test_extract_multiline_instance(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    inst.write_text("(ROOT\n  (GROUP_1 (ENT_A a))\n  (GROUP_1 (ENT_A b)))\n")
    assert main(["extract", "--instance", str(inst), "--entity-rules"]) == EXIT_OK
    assert capsys.readouterr().out == "ROOT -> GROUP_1+\nGROUP_1 -> ENT_A\nENT_A -> <data>\n"


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["structure", "--similarity", "cosine"])


def test_console_script(tmp_path):
    exe = shutil.which("architext")
    cmd = [exe] if exe else [sys.executable, "-m", "architext.cli"]
    done = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert done.returncode == 0
    for name in ("structure", "validate", "extract", "generate"):
        assert name in done.stdout
