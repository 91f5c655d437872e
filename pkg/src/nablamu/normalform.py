"""Compilation pipeline for least-fixpoint formulas.

``to_equational`` turns a closed formula whose only open fixpoints are
least fixpoints over quantifier-free contexts into an equation system
with a distinguished initial variable; ``to_conjunctive`` rewrites an
equation system into conjunctive shape (every clause a disjunction of
closed formulas plus exactly one cover modality over variables),
verifying each translation against a semantic-equivalence oracle on an
exhaustive small-frame sweep plus a randomized sweep.  A mismatch
aborts the translation rather than shipping a wrong normal form.
"""

from __future__ import annotations

import zlib
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

from .syntax import (
    BigAnd,
    BigOr,
    Box,
    Dia,
    EquationSystem,
    EquationalFormula,
    Formula,
    Mu,
    Nabla,
    NegProp,
    Nu,
    Prop,
    UnguardedVariable,
    Var,
    conjuncts,
    desugar,
    disjuncts,
    format_formula,
    format_system,
    free_vars,
    is_closed,
    is_conjunctive,
    sort_key,
)
from .frame import Frame, enumerate_frames, random_frame
from .semantics import frame_index, iterate_stages

__all__ = [
    "NotSigmaFragment",
    "TranslationFailure",
    "TranslationReport",
    "to_equational",
    "to_conjunctive",
    "desugar",
    "is_conjunctive",
]


class NotSigmaFragment(ValueError):
    """The formula lies outside the least-fixpoint fragment."""


class TranslationFailure(ValueError):
    """A rewrite produced a non-conjunctive or non-equivalent system."""

    def __init__(self, message: str, *, subterm: Optional[Formula] = None,
                 mismatches: Tuple = ()):
        super().__init__(message)
        self.subterm = subterm
        self.mismatches = tuple(mismatches)


@dataclass(frozen=True)
class TranslationReport:
    """Provenance and oracle verdict for one conjunctive translation."""

    input: EquationalFormula
    output: EquationalFormula
    fresh: Tuple[Tuple[str, str], ...]
    frames_checked: int
    mismatches: Tuple[Tuple[str, Tuple[str, ...], Tuple[str, ...]], ...]
    closure_ordinals: Tuple[Tuple[str, int, int], ...]

    def to_json(self) -> dict:
        return {
            "input": format_system(self.input),
            "output": format_system(self.output),
            "fresh": {name: role for name, role in self.fresh},
            "frames_checked": self.frames_checked,
            "mismatches": [list(m) for m in self.mismatches],
            "closure_ordinals": [list(c) for c in self.closure_ordinals],
        }


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _idents(f: Formula, out: Set[str]) -> None:
    match f:
        case Prop(name) | NegProp(name) | Var(name):
            out.add(name)
        case BigAnd(args) | BigOr(args) | Nabla(args):
            for a in args:
                _idents(a, out)
        case Box(arg) | Dia(arg):
            _idents(arg, out)
        case Mu(v, body) | Nu(v, body):
            out.add(v)
            _idents(body, out)


def _prop_names(f: Formula, out: Set[str]) -> None:
    match f:
        case Prop(name) | NegProp(name):
            out.add(name)
        case BigAnd(args) | BigOr(args) | Nabla(args):
            for a in args:
                _prop_names(a, out)
        case Box(arg) | Dia(arg):
            _prop_names(arg, out)
        case Mu(_, body) | Nu(_, body):
            _prop_names(body, out)


def _fresh_names(used: Set[str]) -> Iterator[str]:
    i = 0
    while True:
        name = f"_y{i}"
        i += 1
        if name not in used:
            used.add(name)
            yield name


def _bottom_body(zbot: str) -> Formula:
    return BigAnd(frozenset({Nabla(frozenset({Var(zbot)})), Nabla(frozenset())}))


def _payload_gadget(psi: Formula, zbot: str) -> Formula:
    """(psi or deadlock) and (psi or has-successor): equivalent to psi."""
    dead = Nabla(frozenset({Var(zbot)}))
    alive = Nabla(frozenset())
    return BigAnd(frozenset({
        BigOr(frozenset({psi, dead})),
        BigOr(frozenset({psi, alive})),
    }))


def _resolve_unguarded(bodies: Dict[str, Formula]) -> Dict[str, Formula]:
    """Substitute defining bodies for variable occurrences that sit at
    the top boolean layer of an equation, so that every remaining
    occurrence is guarded.  A substitution cycle means the original
    binding was itself unguarded."""
    resolved: Dict[str, Formula] = {}
    active: Set[str] = set()

    def res(v: str) -> Formula:
        if v in resolved:
            return resolved[v]
        if v in active:
            raise UnguardedVariable(
                f"variable {v!r} occurs unguarded in its own unfolding")
        active.add(v)
        out = sub(bodies[v])
        active.discard(v)
        resolved[v] = out
        return out

    def sub(f: Formula) -> Formula:
        if isinstance(f, Var) and f.name in bodies:
            return res(f.name)
        if isinstance(f, BigAnd):
            return BigAnd(frozenset(sub(a) for a in f.args))
        if isinstance(f, BigOr):
            return BigOr(frozenset(sub(a) for a in f.args))
        return f

    for v in list(bodies):
        res(v)
    return resolved


# ---------------------------------------------------------------------------
# formula -> equation system
# ---------------------------------------------------------------------------


def to_equational(phi: Formula) -> EquationalFormula:
    """Replace the external least-fixpoint operators of a closed formula
    by equations.  A formula with no external fixpoint at all becomes a
    fresh guarded variable via the two-conjunct gadget."""
    fv = free_vars(phi)
    if fv:
        raise NotSigmaFragment(f"formula has free variables {sorted(fv)}")
    used: Set[str] = set()
    _idents(phi, used)
    props: Set[str] = set()
    _prop_names(phi, props)

    taken: Set[str] = set()
    equations: List[Optional[Tuple[str, Formula]]] = []

    def eqname_for(binder: str) -> str:
        if binder not in taken and binder not in props:
            taken.add(binder)
            return binder
        n = 2
        while f"{binder}{n}" in taken or f"{binder}{n}" in used:
            n += 1
        name = f"{binder}{n}"
        taken.add(name)
        used.add(name)
        return name

    def walk(f: Formula, env: Dict[str, str]) -> Formula:
        match f:
            case Prop() | NegProp():
                return f
            case Var(v):
                return Var(env[v])
            case BigAnd(args):
                return BigAnd(frozenset(walk(a, env) for a in args))
            case BigOr(args):
                return BigOr(frozenset(walk(a, env) for a in args))
            case Nabla(args):
                return Nabla(frozenset(walk(a, env) for a in args))
            case Box(arg):
                return Box(walk(arg, env))
            case Dia(arg):
                return Dia(walk(arg, env))
            case Mu(v, body):
                if is_closed(f) and f is not phi:
                    return f
                name = eqname_for(v)
                slot = len(equations)
                equations.append(None)
                equations[slot] = (name, walk(body, {**env, v: name}))
                return Var(name)
            case Nu(v, _):
                if is_closed(f):
                    return f
                raise NotSigmaFragment(
                    f"open greatest fixpoint {format_formula(f)}")
        raise TypeError(f"not a formula: {f!r}")

    walked = walk(phi, {})
    pairs: List[Tuple[str, Formula]]
    if equations:
        init = equations[0][0]
        pairs = [e for e in equations if e is not None]
    else:
        names = _fresh_names(used)
        init = next(names)
        zbot = next(names)
        pairs = [(init, _payload_gadget(walked, zbot)), (zbot, _bottom_body(zbot))]
    bodies = dict(pairs)
    resolved = _resolve_unguarded(bodies)
    system = EquationSystem([(name, resolved[name]) for name, _ in pairs])
    return EquationalFormula(system, init)


# ---------------------------------------------------------------------------
# equation system -> conjunctive shape
# ---------------------------------------------------------------------------


_RELATION_CAP = 4096


class _Conjunctivizer:
    def __init__(self, eqf: EquationalFormula):
        self.eqf = eqf
        used: Set[str] = set(eqf.system.vars)
        for _, body in eqf.system.equations:
            _idents(body, used)
        self.names = _fresh_names(used)
        self.roles: Dict[str, str] = {}
        self.order: List[str] = list(eqf.system.vars)
        self.raw: Dict[str, Formula] = {
            v: desugar(eqf.system.eq(v)) for v in eqf.system.vars
        }
        self.pending: deque = deque(self.order)
        self.hoisted: Dict[str, Formula] = {}
        self.resolved: Dict[str, Formula] = {}
        self.hoistmap: Dict[Formula, str] = {}
        self.closedmap: Dict[Formula, str] = {}
        self.merged: Dict[FrozenSet[str], str] = {}
        self.base_of: Dict[str, FrozenSet[str]] = {}
        self.zbot: Optional[str] = None

    # -- fresh equations ----------------------------------------------------

    def _new_var(self, name: str, body: Formula, role: str) -> str:
        self.raw[name] = body
        self.roles[name] = role
        self.order.append(name)
        self.pending.append(name)
        return name

    def need_zbot(self) -> str:
        if self.zbot is None:
            name = next(self.names)
            self.zbot = name
            self._new_var(name, _bottom_body(name),
                          "bottom variable (deadlock anchor)")
        return self.zbot

    def closed_var(self, psi: Formula) -> str:
        if psi in self.closedmap:
            return self.closedmap[psi]
        zbot = self.need_zbot()
        name = next(self.names)
        self.closedmap[psi] = name
        self._new_var(name, _payload_gadget(psi, zbot),
                      f"closed payload {format_formula(psi)}")
        return name

    def open_var(self, arg: Formula) -> str:
        if arg in self.hoistmap:
            return self.hoistmap[arg]
        name = next(self.names)
        self.hoistmap[arg] = name
        self._new_var(name, arg,
                      f"hoisted cover argument {format_formula(arg)}")
        return name

    def base(self, name: str) -> FrozenSet[str]:
        return self.base_of.get(name, frozenset({name}))

    def merge_var(self, bases: FrozenSet[str]) -> str:
        if len(bases) == 1:
            return next(iter(bases))
        if bases in self.merged:
            return self.merged[bases]
        name = next(self.names)
        self.merged[bases] = name
        self.base_of[name] = bases
        body = BigOr(frozenset(self.resolved[m] for m in bases))
        self.raw[name] = body
        self.resolved[name] = body
        self.roles[name] = "disjunction of " + ", ".join(sorted(bases))
        self.order.append(name)
        self.queue.append(name)
        return name

    # -- phase i: hoist non-variable cover arguments ------------------------

    def hoist(self, f: Formula) -> Formula:
        if is_closed(f):
            return f
        match f:
            case Var():
                return f
            case BigAnd(args):
                return BigAnd(frozenset(self.hoist(a) for a in args))
            case BigOr(args):
                return BigOr(frozenset(self.hoist(a) for a in args))
            case Nabla(args):
                new: Set[Formula] = set()
                for a in sorted(args, key=sort_key):
                    if isinstance(a, Var):
                        new.add(a)
                    elif is_closed(a):
                        new.add(Var(self.closed_var(a)))
                    else:
                        new.add(Var(self.open_var(a)))
                return Nabla(frozenset(new))
        raise TranslationFailure(
            f"irreducible open subterm {format_formula(f)}", subterm=f)

    # -- phase ii: conjunctive normal form over cover/closed atoms ----------

    def cnf(self, f: Formula) -> Set[FrozenSet[Formula]]:
        if isinstance(f, BigAnd):
            out: Set[FrozenSet[Formula]] = set()
            for a in f.args:
                out |= self.cnf(a)
            return out
        if isinstance(f, BigOr):
            acc: Set[FrozenSet[Formula]] = {frozenset()}
            for a in f.args:
                parts = self.cnf(a)
                acc = {c | d for c in acc for d in parts}
            return acc
        return {frozenset({f})}

    # -- phase iii: one cover modality per clause ----------------------------

    def fix_clause(self, clause: FrozenSet[Formula]) -> Set[FrozenSet[Formula]]:
        live = set(self.raw)
        covers: List[Nabla] = []
        rest: Set[Formula] = set()
        for atom in sorted(clause, key=sort_key):
            if isinstance(atom, Nabla) and all(
                    isinstance(a, Var) and a.name in live for a in atom.args):
                covers.append(atom)
            elif is_closed(atom):
                rest.add(atom)
            else:
                raise TranslationFailure(
                    f"irreducible open disjunct {format_formula(atom)}",
                    subterm=atom)
        if not covers:
            zbot = self.need_zbot()
            dead = Nabla(frozenset({Var(zbot)}))
            alive = Nabla(frozenset())
            return {frozenset(rest | {dead}), frozenset(rest | {alive})}
        if len(covers) == 1:
            return {clause}
        first, second = covers[0], covers[1]
        others = frozenset(rest) | frozenset(covers[2:])
        if not first.args or not second.args:
            # one empty side: "all successors somewhere" vs "has some
            # successor" exhausts every state, the clause is vacuous
            return set()
        left = sorted(first.args, key=sort_key)
        right = sorted(second.args, key=sort_key)
        pairs = [(a, b) for a in left for b in right]
        if 2 ** len(pairs) > _RELATION_CAP:
            raise TranslationFailure(
                "cover distribution too large for "
                f"{format_formula(first)} | {format_formula(second)}",
                subterm=BigOr(frozenset({first, second})))
        out: Set[FrozenSet[Formula]] = set()
        for mask in range(2 ** len(pairs)):
            chosen = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
            if {a for a, _ in chosen} != set(left):
                continue
            if {b for _, b in chosen} != set(right):
                continue
            members: Set[Formula] = set()
            for a, b in chosen:
                if a == b:
                    members.add(a)
                else:
                    members.add(Var(self.merge_var(self.base(a.name) | self.base(b.name))))
            out |= self.fix_clause(others | {Nabla(frozenset(members))})
        return out

    # -- driver ---------------------------------------------------------------

    def run(self) -> EquationalFormula:
        while self.pending:
            v = self.pending.popleft()
            if v in self.hoisted:
                continue
            self.hoisted[v] = self.hoist(self.raw[v])
        for name, body in _resolve_unguarded(self.hoisted).items():
            self.resolved.setdefault(name, body)
        final: Dict[str, Formula] = {}
        self.queue: deque = deque(self.order)
        while self.queue or self.pending:
            # clause fixing can mint new variables (the deadlock anchor,
            # for one); they land on the hoisting queue and still need a
            # slot in the finalisation queue
            while self.pending:
                w = self.pending.popleft()
                if w in self.hoisted:
                    continue
                self.hoisted[w] = self.hoist(self.raw[w])
                self.resolved.setdefault(w, self.hoisted[w])
                self.queue.append(w)
            if not self.queue:
                break
            v = self.queue.popleft()
            if v in final:
                continue
            clauses: Set[FrozenSet[Formula]] = set()
            for c in self.cnf(self.resolved[v]):
                clauses |= self.fix_clause(c)
            final[v] = _assemble(clauses)
        system = EquationSystem([(v, final[v]) for v in self.order])
        return EquationalFormula(system, self.eqf.init)


def _assemble(clauses: Set[FrozenSet[Formula]]) -> Formula:
    ors = frozenset(
        BigOr(c) if len(c) != 1 else next(iter(c)) for c in clauses
    )
    if len(ors) == 1:
        return next(iter(ors))
    return BigAnd(ors)


def _first_nonconjunctive(system: EquationSystem) -> Optional[Formula]:
    varset = frozenset(system.vars)
    for x in system.vars:
        for clause in conjuncts(system.eq(x)):
            parts = disjuncts(clause)
            modal = [
                p for p in parts
                if isinstance(p, Nabla)
                and all(isinstance(a, Var) and a.name in varset for a in p.args)
            ]
            if len(modal) != 1 or any(
                    free_vars(p) for p in parts if p not in modal):
                return system.eq(x)
    return None


# ---------------------------------------------------------------------------
# equivalence oracle
# ---------------------------------------------------------------------------


_EXHAUSTIVE_CACHE: Dict[Tuple[int, Tuple[str, ...]], Tuple[Frame, ...]] = {}


def _exhaustive_frames(max_states: int, props: Tuple[str, ...]) -> Tuple[Frame, ...]:
    key = (max_states, props)
    if key not in _EXHAUSTIVE_CACHE:
        _EXHAUSTIVE_CACHE[key] = tuple(enumerate_frames(max_states, props))
    return _EXHAUSTIVE_CACHE[key]


def _init_mask_and_stage(eqf: EquationalFormula, frame: Frame) -> Tuple[int, int]:
    index = frame_index(frame)
    stages = iterate_stages(eqf.system, index)
    last = stages[-1][eqf.init]
    stage = next(i for i, st in enumerate(stages) if st[eqf.init] == last)
    return last, stage


def _oracle_frames(
    eqf: EquationalFormula,
    exhaustive_max: int,
    random_count: int,
) -> Iterator[Tuple[str, Frame]]:
    props: Set[str] = set()
    for _, body in eqf.system.equations:
        _prop_names(body, props)
    prop_tuple = tuple(sorted(props))
    for i, fr in enumerate(_exhaustive_frames(exhaustive_max, prop_tuple)):
        yield f"E{len(fr.states)}#{i}", fr
    seed = zlib.crc32(format_system(eqf).encode())
    probs = (0.15, 0.3, 0.5, 0.7)
    for i in range(random_count):
        fr = random_frame(1 + i % 8, edge_prob=probs[i % 4],
                          props=prop_tuple, seed=seed + i)
        yield f"R#{i}", fr


def to_conjunctive(
    eqf: EquationalFormula,
    *,
    exhaustive_max: int = 3,
    random_count: int = 500,
) -> Tuple[EquationalFormula, TranslationReport]:
    """Rewrite an equation system into conjunctive shape and verify the
    rewrite semantically on every oracle frame."""
    worker = _Conjunctivizer(eqf)
    out = worker.run()
    if not is_conjunctive(out.system):
        raise TranslationFailure(
            "rewriting did not reach conjunctive shape",
            subterm=_first_nonconjunctive(out.system))
    mismatches: List[Tuple[str, Tuple[str, ...], Tuple[str, ...]]] = []
    ordinals: List[Tuple[str, int, int]] = []
    checked = 0
    for label, fr in _oracle_frames(eqf, exhaustive_max, random_count):
        checked += 1
        want, co_in = _init_mask_and_stage(eqf, fr)
        got, co_out = _init_mask_and_stage(out, fr)
        ordinals.append((label, co_in, co_out))
        if want != got:
            index = frame_index(fr)
            mismatches.append((
                label,
                tuple(sorted(index.unmask(want))),
                tuple(sorted(index.unmask(got))),
            ))
    if mismatches:
        raise TranslationFailure(
            f"translation disagrees with input on {len(mismatches)} of "
            f"{checked} oracle frames",
            mismatches=tuple(mismatches))
    report = TranslationReport(
        input=eqf,
        output=out,
        fresh=tuple(sorted(worker.roles.items())),
        frames_checked=checked,
        mismatches=(),
        closure_ordinals=tuple(ordinals),
    )
    return out, report
