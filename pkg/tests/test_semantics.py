"""Evaluation, ordinal-stage approximations, and per-frame closure ordinals."""

from random import Random

import pytest

from nablamu import (
    OMEGA,
    Ordinal,
    approx,
    chain,
    closure,
    closure_ordinal_on,
    czarnecki,
    czarnecki_formula,
    denotation,
    desugar,
    enumerate_frames,
    eval_formula,
    frame_index,
    iterate_stages,
    parse_formula,
    parse_frame,
    parse_system,
    random_frame,
    sig_approx,
    stabilize,
    to_equational,
    var,
)

from conftest import random_instance


CHAIN3 = parse_frame("states: s0 s1 s2\nedges: s0->s1 s1->s2\nlabels: p: s2\n")
REACH = parse_system("system\ninit: x\nx = or{p, dia x}\n")


# ------------------------------------------------------------- evaluation

def test_empty_cover_holds_exactly_at_states_with_successors():
    assert eval_formula(parse_formula("nab{}"), chain(2)) == frozenset({"s0"})


def test_cover_at_deadlock_iff_nonempty():
    deadlock = parse_frame("states: d\nlabels: p: d\n")
    assert eval_formula(parse_formula("nab{p}"), deadlock) == frozenset({"d"})
    assert eval_formula(parse_formula("nab{ff}"), deadlock) == frozenset({"d"})
    assert eval_formula(parse_formula("nab{}"), deadlock) == frozenset()


def test_box_is_vacuous_at_deadlocks():
    f = parse_frame("states: s0 s1\nedges: s0->s1\n")
    assert "s1" in eval_formula(parse_formula("box p"), f)
    assert "s0" not in eval_formula(parse_formula("box p"), f)


def test_closed_least_fixpoint_reachability():
    phi = parse_formula("mu x. or{p, dia x}")
    assert eval_formula(phi, CHAIN3) == frozenset({"s0", "s1", "s2"})


def test_boolean_clauses():
    assert eval_formula(parse_formula("tt"), CHAIN3) == frozenset(CHAIN3.states)
    assert eval_formula(parse_formula("ff"), CHAIN3) == frozenset()
    assert eval_formula(parse_formula("!p"), CHAIN3) == frozenset({"s0", "s1"})
    assert eval_formula(parse_formula("and{p, nab{}}"), CHAIN3) == frozenset()
    assert eval_formula(parse_formula("or{p, nab{}}"), CHAIN3) == frozenset(
        {"s0", "s1", "s2"})


def test_missing_valuation_entries_default_to_empty():
    assert eval_formula(var("x"), CHAIN3) == frozenset()
    got = eval_formula(parse_formula("nab{x}", vars={"x"}), CHAIN3,
                       {"x": {"s2"}})
    assert got == frozenset({"s1", "s2"})


def test_sugar_evaluates_like_its_expansion():
    rng = Random(5)
    for i in range(40):
        f = random_frame(rng.randint(1, 6), seed=i)
        for text in ("box p", "dia q", "box or{p, q}", "dia and{p, !q}"):
            sugared = parse_formula(text, keep_sugar=True)
            assert eval_formula(sugared, f) == eval_formula(desugar(sugared), f)


def test_box_dia_extensional_laws():
    rng = Random(11)
    for i in range(40):
        f = random_frame(rng.randint(1, 6), seed=100 + i)
        p = eval_formula(parse_formula("p"), f)
        boxed = eval_formula(parse_formula("box p"), f)
        diad = eval_formula(parse_formula("dia p"), f)
        assert boxed == frozenset(s for s in f.states if f.successors(s) <= p)
        assert diad == frozenset(s for s in f.states if f.successors(s) & p)


def test_cover_law_spot_check():
    gamma = [parse_formula("p"), parse_formula("q")]
    nab = parse_formula("nab{p, q}")
    expansion = parse_formula("or{box p, box q, dia and{p, q}}")
    for f in enumerate_frames(2, ("p", "q")):
        assert eval_formula(nab, f) == eval_formula(expansion, f)


# ---------------------------------------------------------- approximations

def test_stage_zero_is_empty():
    assert approx(var("x"), 0, REACH.system, CHAIN3) == frozenset()


def test_stage_two_pinned():
    assert approx(var("x"), 2, REACH.system, CHAIN3) == frozenset({"s1", "s2"})


def test_stages_are_cumulative():
    prev = frozenset()
    for a in range(5):
        cur = approx(var("x"), a, REACH.system, CHAIN3)
        assert prev <= cur
        prev = cur
    assert prev == frozenset({"s0", "s1", "s2"})


def test_limit_stage_is_union():
    assert approx(var("x"), OMEGA, REACH.system, CHAIN3) == frozenset(
        {"s0", "s1", "s2"})
    assert approx(var("x"), OMEGA + 5, REACH.system, CHAIN3) == approx(
        var("x"), OMEGA, REACH.system, CHAIN3)


def test_approx_of_compound_formula():
    body = REACH.system.eq("x")
    assert approx(body, 0, REACH.system, CHAIN3) == frozenset({"s2"})
    assert approx(body, 1, REACH.system, CHAIN3) == frozenset({"s1", "s2"})


def test_stabilize_respects_state_times_variable_bound():
    rng = Random(3)
    for i in range(60):
        eqf, frame = random_instance(i)
        values, stage = stabilize(eqf.system, frame)
        assert stage <= len(frame.states) * len(eqf.system.vars)
        for v in eqf.system.vars:
            assert values[v] == approx(var(v), stage, eqf.system, frame)


def test_denotation_is_stabilized_init():
    values, _ = stabilize(REACH.system, CHAIN3)
    assert denotation(REACH, CHAIN3) == values["x"]


def test_iterate_stages_masks_are_cumulative():
    idx = frame_index(CHAIN3)
    stages = iterate_stages(REACH.system, idx)
    assert stages[0] == {"x": 0}
    for earlier, later in zip(stages, stages[1:]):
        for v in earlier:
            assert earlier[v] & ~later[v] == 0
    assert stages[-1]["x"] == (1 << len(CHAIN3.states)) - 1


# -------------------------------------------------------- closure ordinals

def test_closure_ordinal_pinned_chain():
    assert closure_ordinal_on(CHAIN3, REACH) == 3


def test_closure_ordinal_zero_when_empty():
    unlabeled = chain(3)
    assert denotation(REACH, unlabeled) == frozenset()
    assert closure_ordinal_on(unlabeled, REACH) == 0


def test_closure_ordinal_tracks_staircase_depth():
    eqf = to_equational(czarnecki_formula(1))
    for k in (1, 2, 3, 6):
        assert closure_ordinal_on(czarnecki(1, k), eqf) == k + 1


def test_closure_ordinal_not_above_stabilization():
    for i in range(40):
        eqf, frame = random_instance(1000 + i)
        _, stage = stabilize(eqf.system, frame)
        assert closure_ordinal_on(frame, eqf) <= stage


# --------------------------------------------------------------- signatures

def test_signature_approximation_pinned():
    assert sig_approx(var("x"), (Ordinal.natural(2),), REACH.system,
                      CHAIN3) == frozenset({"s1", "s2"})
    assert sig_approx(var("x"), (Ordinal.natural(0),), REACH.system,
                      CHAIN3) == frozenset()


def test_signature_sandwich_spot_check():
    two = parse_system(
        "system\ninit: x\nx = or{p, nab{y}}\ny = or{q, nab{x}}\n")
    frame = random_frame(4, seed=77)
    sigs = [(Ordinal.natural(a), Ordinal.natural(b))
            for a in range(4) for b in range(4)]
    for psi in closure(two.system):
        for sig in sigs:
            total = sum(sig, Ordinal())
            lo = sig_approx(psi, sig, two.system, frame)
            mid = approx(psi, total, two.system, frame)
            hi = sig_approx(psi, (total, total), two.system, frame)
            assert lo <= mid <= hi


def test_signature_length_must_match_variables():
    with pytest.raises(ValueError):
        sig_approx(var("x"), (Ordinal.natural(1), Ordinal.natural(1)),
                   REACH.system, CHAIN3)
