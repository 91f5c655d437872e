"""Shared fixtures: the system corpus, seeded random generators, and the
annotated descent spines used by the repetition-pair and pump tests."""

from pathlib import Path
from random import Random
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from nablamu import (
    Annotation,
    EquationSystem,
    EquationalFormula,
    FF,
    Formula,
    Ordinal,
    TT,
    TreeFrame,
    box,
    conj,
    cover,
    dia,
    disj,
    free_vars,
    neg,
    parse_formula,
    parse_system,
    prop,
    random_frame,
    to_equational,
    var,
)
from nablamu.pump import AnnotatedTree

CORPUS_DIR = Path(__file__).parent / "corpus"

# Closed or quantified formulas that enter the corpus through the
# equational translation rather than as system files.
FORMULA_CORPUS: Tuple[str, ...] = (
    "box p",
    "dia p",
    "or{}",
    "and{}",
    "nab{}",
    "nab{p}",
    "mu x. or{p, dia x}",
    "mu x. or{and{p, dia x}, box ff}",
    "mu x. or{p, dia (mu y. or{x, dia y})}",
    "nu y. dia y",
)


def corpus_systems() -> List[Tuple[str, EquationalFormula]]:
    """All system files of the corpus, parsed with sugar preserved."""
    out = []
    for f in sorted(CORPUS_DIR.glob("*.mes")):
        out.append((f.stem, parse_system(f.read_text())))
    return out


def corpus_formulas() -> List[Tuple[str, EquationalFormula]]:
    """The formula corpus, brought into equational shape."""
    out = []
    for i, text in enumerate(FORMULA_CORPUS):
        out.append((f"formula_{i}_{text.split()[0].strip('{}')}",
                    to_equational(parse_formula(text, keep_sugar=True))))
    return out


def full_corpus() -> List[Tuple[str, EquationalFormula]]:
    return corpus_systems() + corpus_formulas()


def two_variable_corpus() -> List[Tuple[str, EquationalFormula]]:
    return [(n, eqf) for n, eqf in corpus_systems() if len(eqf.system.vars) == 2]


def random_system(seed: int, max_vars: int = 3,
                  props: Sequence[str] = ("p", "q")) -> EquationalFormula:
    """A seeded random guarded equation system over the given propositions.

    Variables occur only under a cover or a sugared modality, so every
    generated body passes the guardedness validation.
    """
    rng = Random(seed)
    names = [f"x{i}" for i in range(rng.randint(1, max_vars))]

    def closed() -> Formula:
        pick = rng.randrange(6)
        if pick == 0:
            return prop(props[0])
        if pick == 1:
            return prop(props[-1])
        if pick == 2:
            return neg(props[0])
        if pick == 3:
            return TT
        if pick == 4:
            return FF
        return cover()

    def guard() -> Formula:
        v = var(rng.choice(names))
        kind = rng.randrange(4)
        if kind == 0:
            return box(v)
        if kind == 1:
            return dia(v)
        members = [v]
        if rng.random() < 0.5:
            members.append(closed())
        if rng.random() < 0.3:
            members.append(var(rng.choice(names)))
        return cover(*members)

    def body() -> Formula:
        junct = disj if rng.random() < 0.6 else conj
        members = [guard() if rng.random() < 0.6 else closed()
                   for _ in range(rng.randint(1, 3))]
        if not any(free_vars(m) for m in members):
            members.append(guard())
        return junct(*members)

    system = EquationSystem([(n, body()) for n in names])
    return EquationalFormula(system, names[0])


def random_instance(seed: int, max_states: int = 6,
                    max_vars: int = 3) -> Tuple[EquationalFormula, "Frame"]:
    """A seeded (equational formula, frame) pair for property sweeps."""
    rng = Random(seed ^ 0x5EED)
    eqf = random_system(seed, max_vars=max_vars)
    frame = random_frame(
        rng.randint(1, max_states),
        edge_prob=rng.choice((0.15, 0.3, 0.5, 0.7)),
        props=("p", "q"),
        seed=seed,
    )
    return eqf, frame


SPINE_SYSTEM = parse_system("system\ninit: x\nx = nab{x}\n")

X = parse_formula("x", vars={"x"})
NAB_X = parse_formula("nab{x}", vars={"x"})


def descent_spine(
    n_limits: int,
    entry_fn: Optional[Callable[[int, Ordinal], Dict[Formula, Ordinal]]] = None,
    side_children: bool = False,
) -> AnnotatedTree:
    """A root-to-leaf spine whose cover annotations descend from
    w.n_limits through every smaller limit down to 0.

    Spine node i carries nab{x} at w.(n_limits - i) and x one stage
    higher; the final leaf sits at 0.  ``entry_fn`` may replace the
    per-node annotation sets (it receives the node index and the limit
    stage) to vary the stripped profiles.  With ``side_children`` each
    spine node gets an unannotated extra child, which empties the
    box-restricted set at that node without touching the trace.
    """
    names = [f"t{i}" for i in range(n_limits)] + ["leaf"]
    edges = [(names[i], names[i + 1]) for i in range(n_limits)]
    extra: List[str] = []
    if side_children:
        extra = [f"d{i}" for i in range(n_limits)]
        edges += [(f"t{i}", f"d{i}") for i in range(n_limits)]
    tree = TreeFrame(names + extra, edges, {}, root=names[0])

    entries: Dict[str, Dict[Formula, Ordinal]] = {}
    for i in range(n_limits):
        stage = Ordinal.omega_times(n_limits - i)
        if entry_fn is None:
            entries[names[i]] = {X: stage + 1, NAB_X: stage}
        else:
            entries[names[i]] = entry_fn(i, stage)
    entries["leaf"] = {X: Ordinal.natural(1), NAB_X: Ordinal()}
    ann = Annotation(tree, entries)
    return AnnotatedTree(tree, ann, ann)
