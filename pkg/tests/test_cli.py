"""Command-line interface: every verb, the three output formats, exit
codes, and atomic --output writing."""

import json
import os
import subprocess
import sys

import pytest

from nablamu.cli import main

SYSTEM_SRC = "system\ninit: x\nx = or{p, dia x}\n"
NABLA_SRC = "system\ninit: x\nx = or{p, nab{x}}\n"
SPINE_SRC = "system\ninit: x\nx = nab{x}\n"
FRAME_SRC = (
    "states: s0 s1 s2\nedges: s0->s1 s1->s2\nlabels: p: s2\nroot: s0\n"
)
TREE_SRC = (
    "states: t0 t1 t2 leaf\nedges: t0->t1 t1->t2 t2->leaf\nlabels:\n"
    "root: t0\n"
)
SPINE_ANN = (
    "t0: x @ w.3+1; nab{x} @ w.3;\n"
    "t1: x @ w.2+1; nab{x} @ w.2;\n"
    "t2: x @ w+1; nab{x} @ w;\n"
    "leaf: x @ 1; nab{x} @ 0;\n"
)
GOOD_ANN = (
    "s0: x @ 3; or{dia x, p} @ 2; dia x @ 2;\n"
    "s1: x @ 2; or{dia x, p} @ 1; dia x @ 1;\n"
    "s2: x @ 1; or{dia x, p} @ 0; p @ 0;\n"
)
BAD_ANN = (
    "s0: x @ 1;\n"
    "s1: x @ 2; or{dia x, p} @ 1; dia x @ 1;\n"
    "s2: x @ 1; or{dia x, p} @ 0; p @ 0;\n"
)


@pytest.fixture
def files(tmp_path):
    def w(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return {
        "sys": w("sys.mes", SYSTEM_SRC),
        "nab": w("nab.mes", NABLA_SRC),
        "spine": w("spine.mes", SPINE_SRC),
        "frame": w("chain3.frame", FRAME_SRC),
        "flat": w("flat.frame", "states: a\nedges: a->a\nlabels:\n"),
        "tree": w("t.frame", TREE_SRC),
        "ann": w("t.ann", SPINE_ANN),
        "good": w("good.ann", GOOD_ANN),
        "bad": w("bad.ann", BAD_ANN),
        "donor_frame": w("d.frame",
                         "states: t2 leaf\nedges: t2->leaf\nlabels:\n"
                         "root: t2\n"),
        "donor_ann": w("d.ann",
                       "t2: x @ w+1; nab{x} @ w;\n"
                       "leaf: x @ 1; nab{x} @ 0;\n"),
        "donor_small": w("small.ann",
                         "t2: nab{x} @ w;\n"
                         "leaf: x @ 1; nab{x} @ 0;\n"),
        "tmp": tmp_path,
    }


def run(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as err:
        code = err.code
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -------------------------------------------------------------- formulas

def test_parse_prints_canonically(capsys):
    code, out, _ = run(capsys, ["parse", "--formula", "box p"])
    assert (code, out) == (0, "box p\n")


def test_parse_can_expand_sugar(capsys):
    code, out, _ = run(capsys, ["parse", "--formula", "box p", "--desugar"])
    assert (code, out) == (0, "nab{ff, p}\n")


def test_parse_json(capsys):
    code, out, _ = run(capsys,
                       ["parse", "--formula", "box p", "--format", "json"])
    assert code == 0
    assert json.loads(out) == {"formula": "box p"}


def test_desugar_verb(capsys):
    code, out, _ = run(capsys, ["desugar", "--formula", "dia p"])
    assert (code, out) == (0, "and{nab{p}, nab{}}\n")


def test_parse_error_exits_2(capsys):
    code, _, err = run(capsys, ["parse", "--formula", "or{p,"])
    assert code == 2
    assert "expected a formula" in err


# ------------------------------------------------------------ evaluation

def test_eval_system(capsys, files):
    code, out, _ = run(capsys, ["eval", "--system", files["sys"],
                                "--frame", files["frame"]])
    assert (code, out) == (0, "s0 s1 s2\n")


def test_eval_system_json(capsys, files):
    code, out, _ = run(capsys, ["eval", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--format", "json"])
    assert json.loads(out) == {"states": ["s0", "s1", "s2"]}


def test_eval_formula(capsys, files):
    code, out, _ = run(capsys, ["eval", "--formula", "nab{}",
                                "--frame", files["frame"]])
    assert (code, out) == (0, "s0 s1\n")


def test_eval_requires_a_frame(capsys):
    code, _, err = run(capsys, ["eval", "--formula", "p"])
    assert code == 2
    assert "--frame" in err


def test_approx(capsys, files):
    code, out, _ = run(capsys, ["approx", "--system", files["sys"],
                                "--frame", files["frame"], "--stage", "2"])
    assert (code, out) == (0, "s1 s2\n")


def test_approx_with_explicit_formula(capsys, files):
    code, out, _ = run(capsys, ["approx", "--system", files["sys"],
                                "--frame", files["frame"], "--stage", "1",
                                "--psi", "nab{x}"])
    assert (code, out) == (0, "s1 s2\n")


def test_co_text_and_json(capsys, files):
    code, out, _ = run(capsys, ["co", "--system", files["sys"],
                                "--frame", files["frame"]])
    assert (code, out) == (0, "3\n")
    code, out, _ = run(capsys, ["co", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--format", "json"])
    assert json.loads(out) == {"closure_ordinal": 3}


def test_co_rejects_dot(capsys, files):
    code, _, err = run(capsys, ["co", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--format", "dot"])
    assert code == 2
    assert "--format dot is not available for 'co'" in err


# ------------------------------------------------------------ annotations

def test_annotate(capsys, files):
    code, out, _ = run(capsys, ["annotate", "--system", files["sys"],
                                "--frame", files["frame"]])
    assert code == 0
    assert out.splitlines() == [
        "s0: dia x @ 2; or{dia x, p} @ 2; x @ 3;",
        "s1: dia x @ 1; or{dia x, p} @ 1; x @ 2;",
        "s2: or{dia x, p} @ 0; p @ 0; x @ 1;",
    ]


def test_annotate_json(capsys, files):
    code, out, _ = run(capsys, ["annotate", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--format", "json"])
    payload = json.loads(out)
    assert payload["s2"] == [
        {"formula": "or{dia x, p}", "ordinal": "0"},
        {"formula": "p", "ordinal": "0"},
        {"formula": "x", "ordinal": "1"},
    ]


def test_check_ann_reports_ok(capsys, files):
    code, out, _ = run(capsys, ["check-ann", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--ann", files["good"]])
    assert (code, out) == (0, "OK (0 violations)\n")


def test_check_ann_reports_violations_and_still_exits_zero(capsys, files):
    code, out, _ = run(capsys, ["check-ann", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--ann", files["bad"]])
    assert code == 0
    assert out.splitlines() == [
        "s0: D3.1-2 x @ 1 -- right-hand side is not annotated strictly"
        " below the variable",
        "FAIL (1 violations)",
    ]


def test_check_ann_json(capsys, files):
    code, out, _ = run(capsys, ["check-ann", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--ann", files["bad"], "--format", "json"])
    payload = json.loads(out)
    assert payload["count"] == 1
    assert payload["violations"][0] == {
        "state": "s0", "clause": "D3.1-2", "formula": "x", "ordinal": "1",
        "detail": "right-hand side is not annotated strictly below the"
                  " variable",
    }


def test_conservative_check(capsys, files):
    code, out, _ = run(capsys, ["conservative-check",
                                "--system", files["sys"],
                                "--frame", files["frame"],
                                "--ann", files["good"]])
    assert (code, out) == (0, "OK (0 violations)\n")
    code, out, _ = run(capsys, ["conservative-check",
                                "--system", files["sys"],
                                "--frame", files["frame"],
                                "--ann", files["bad"]])
    assert code == 0
    assert "s0: D3.2-2 x @ 1 -- least stage here is 3" in out
    assert out.splitlines()[-1] == "FAIL (3 violations)"


def test_relevant_sections(capsys, files):
    code, out, _ = run(capsys, ["relevant", "--system", files["nab"],
                                "--frame", files["frame"]])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# tree"
    assert "# theta" in lines and "# phi" in lines
    assert "s0: nab{x} @ 2; or{nab{x}, p} @ 2; x @ 3;" in lines


def test_relevant_needs_a_tree(capsys, files):
    code, _, err = run(capsys, ["relevant", "--system", files["spine"],
                                "--frame", files["flat"]])
    assert code == 1
    assert "tree frames" in err


# ---------------------------------------------------------- pairs / pump

def test_pairs_text(capsys, files):
    code, out, _ = run(capsys, ["pairs", "--system", files["spine"],
                                "--frame", files["tree"],
                                "--theta", files["ann"],
                                "--phi", files["ann"]])
    assert code == 0
    assert out.splitlines() == [
        "companion t0 @ w.3 -> bud t1 @ w.2 over nab{x}",
        "companion t1 @ w.2 -> bud t2 @ w over nab{x}",
        "companion t0 @ w.3 -> bud t2 @ w over nab{x}",
    ]


def test_pairs_json(capsys, files):
    code, out, _ = run(capsys, ["pairs", "--system", files["spine"],
                                "--frame", files["tree"],
                                "--theta", files["ann"],
                                "--phi", files["ann"],
                                "--format", "json"])
    payload = json.loads(out)
    assert payload["pairs"][0] == {
        "companion": "t0", "bud": "t1", "gamma": ["x"],
        "alpha": "w.3", "beta": "w.2",
    }
    assert len(payload["pairs"]) == 3


def test_pump_splices_and_prints_sections(capsys, files):
    code, out, _ = run(capsys, ["pump", "--system", files["spine"],
                                "--frame", files["tree"],
                                "--theta", files["ann"],
                                "--phi", files["ann"],
                                "--state", "t1",
                                "--donor-frame", files["donor_frame"],
                                "--donor-theta", files["donor_ann"],
                                "--donor-phi", files["donor_ann"]])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "# pumped t1 with donor rooted t2 (3 states)"
    assert "states: t0 t2 leaf" in lines
    assert "t0: nab{x} @ w.3; x @ w.3+1;" in lines


def test_pump_rejects_profile_mismatch(capsys, files):
    code, _, err = run(capsys, ["pump", "--system", files["spine"],
                                "--frame", files["tree"],
                                "--theta", files["ann"],
                                "--phi", files["ann"],
                                "--state", "t1",
                                "--donor-frame", files["donor_frame"],
                                "--donor-theta", files["donor_small"],
                                "--donor-phi", files["donor_small"]])
    assert code == 1
    assert "donor root profile differs from the profile at t1" in err


# ------------------------------------------------------------ conjunctive

def test_conjunctive_verb(capsys, files):
    code, out, _ = run(capsys, ["conjunctive", "--system", files["nab"],
                                "--random-count", "10"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "system"
    assert "x = or{nab{x}, p}" in lines
    assert lines[-1].startswith("# frames checked: ")
    assert lines[-1].endswith("; mismatches: 0")


# -------------------------------------------------------------- generators

def test_gen_chain(capsys):
    code, out, _ = run(capsys, ["gen", "chain", "--k", "3"])
    assert (code, out) == (0, "states: s0 s1 s2\nedges: s0->s1 s1->s2\n"
                              "root: s0\n")


def test_gen_czarnecki(capsys):
    code, out, _ = run(capsys, ["gen", "czarnecki", "--n", "1", "--k", "2"])
    assert (code, out) == (0, "states: c0 c1 c2\nedges: c0->c1 c1->c2\n"
                              "labels: p: c0 c1 c2\nroot: c0\n")


def test_gen_czarnecki_requires_both_parameters(capsys):
    code, _, err = run(capsys, ["gen", "czarnecki", "--k", "2"])
    assert code == 2
    assert "requires --n and --k" in err


def test_gen_random_seed_flag_matches_environment(capsys, files, monkeypatch):
    code, flagged, _ = run(capsys, ["gen", "random", "--size", "3",
                                    "--props", "p", "--seed", "5"])
    assert code == 0
    monkeypatch.setenv("NABLA_SEED", "5")
    code, from_env, _ = run(capsys, ["gen", "random", "--size", "3",
                                     "--props", "p"])
    assert code == 0
    assert flagged == from_env


def test_gen_dot_output(capsys):
    code, out, _ = run(capsys, ["gen", "chain", "--k", "2",
                                "--format", "dot"])
    assert code == 0
    assert out.startswith("digraph frame {")
    assert '"s0" -> "s1";' in out
    assert 'shape=doublecircle' in out


# ------------------------------------------------------------ plumbing

def test_missing_file_exits_2(capsys, files):
    code, _, err = run(capsys, ["co", "--system",
                                str(files["tmp"] / "nope.mes"),
                                "--frame", files["frame"]])
    assert code == 2
    assert "No such file" in err


def test_output_writes_file_atomically(capsys, files):
    dest = files["tmp"] / "result.txt"
    code, out, _ = run(capsys, ["co", "--system", files["sys"],
                                "--frame", files["frame"],
                                "--output", str(dest)])
    assert code == 0
    assert out == ""
    assert dest.read_text() == "3\n"
    leftovers = [p for p in os.listdir(files["tmp"])
                 if p.startswith("result.txt") and p != "result.txt"]
    assert leftovers == []


def test_console_script_is_installed(files):
    proc = subprocess.run(
        ["nablamu", "co", "--system", files["sys"],
         "--frame", files["frame"]],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == "3\n"


def test_module_entry_point(files):
    proc = subprocess.run(
        [sys.executable, "-m", "nablamu", "co", "--system", files["sys"],
         "--frame", files["frame"]],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == "3\n"
