"""Semantics of formulas and equation systems over finite frames.

States are handled internally as bit masks over the frame's state
tuple; the public functions accept and return frozen sets of state
names.  An equation system is evaluated by ordinal approximation from
below: stage 0 assigns every variable the empty set, stage a+1 adds the
evaluation of each right-hand side under stage a, and on a finite frame
the stages stabilise after at most |states| * |variables| steps.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .ordinal import Ordinal
from .syntax import (BigAnd, BigOr, Box, Dia, EquationalFormula, EquationSystem,
                     Formula, Mu, NegProp, Nabla, Nu, Prop, UnboundVariable, Var,
                     free_vars)
from .frame import Frame

__all__ = [
    "FrameIndex",
    "frame_index",
    "iterate_stages",
    "eval_formula",
    "denotation",
    "stabilize",
    "approx",
    "sig_approx",
    "closure_ordinal_on",
]

OrdinalLike = Union[int, Ordinal]


class FrameIndex:
    """A frame compiled to bit masks, with a cache for closed formulas."""

    __slots__ = ("frame", "n", "full", "position", "succ", "prop_mask", "_closed")

    def __init__(self, frame: Frame) -> None:
        object.__setattr__(self, "frame", frame)
        n = len(frame.states)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "full", (1 << n) - 1)
        pos = {s: i for i, s in enumerate(frame.states)}
        object.__setattr__(self, "position", pos)
        succ = [0] * n
        for a, b in frame.edges:
            succ[pos[a]] |= 1 << pos[b]
        object.__setattr__(self, "succ", tuple(succ))
        object.__setattr__(
            self, "prop_mask", {p: self.mask(ms) for p, ms in frame.labels.items()}
        )
        object.__setattr__(self, "_closed", {})

    def __setattr__(self, name: str, value: object) -> None:
        raise AttributeError("FrameIndex objects are immutable")

    def mask(self, states: Iterable[str]) -> int:
        m = 0
        for s in states:
            m |= 1 << self.position[s]
        return m

    def unmask(self, m: int) -> FrozenSet[str]:
        return frozenset(
            s for s, i in self.position.items() if m >> i & 1
        )

    def eval(self, f: Formula, env: Optional[Mapping[str, int]] = None) -> int:
        """Evaluate a formula to a state mask under a variable mask map."""
        env = env or {}
        closed = not free_vars(f)
        if closed:
            cached = self._closed.get(f)
            if cached is not None:
                return cached
        m = self._eval(f, env)
        if closed:
            self._closed[f] = m
        return m

    def _eval(self, f: Formula, env: Mapping[str, int]) -> int:
        n, full, succ = self.n, self.full, self.succ
        if isinstance(f, Prop):
            return self.prop_mask.get(f.name, 0)
        if isinstance(f, NegProp):
            return full & ~self.prop_mask.get(f.name, 0)
        if isinstance(f, Var):
            return env.get(f.name, 0)
        if isinstance(f, BigAnd):
            acc = full
            for a in f.args:
                acc &= self.eval(a, env)
                if not acc:
                    break
            return acc
        if isinstance(f, BigOr):
            acc = 0
            for a in f.args:
                acc |= self.eval(a, env)
                if acc == full:
                    break
            return acc
        if isinstance(f, Nabla):
            members = [self.eval(a, env) for a in f.args]
            inter = full
            for m in members:
                inter &= m
            out = 0
            for i in range(n):
                sm = succ[i]
                if sm & inter:
                    out |= 1 << i
                    continue
                for m in members:
                    if not sm & ~m:
                        out |= 1 << i
                        break
            return out
        if isinstance(f, Box):
            m = self.eval(f.arg, env)
            return sum(1 << i for i in range(n) if not succ[i] & ~m)
        if isinstance(f, Dia):
            m = self.eval(f.arg, env)
            return sum(1 << i for i in range(n) if succ[i] & m)
        if isinstance(f, (Mu, Nu)):
            cur = 0 if isinstance(f, Mu) else full
            inner = dict(env)
            while True:
                inner[f.var] = cur
                nxt = self.eval(f.body, inner)
                if nxt == cur:
                    return cur
                cur = nxt
        raise TypeError(f"cannot evaluate {type(f).__name__}")


@lru_cache(maxsize=256)
def frame_index(frame: Frame) -> FrameIndex:
    return FrameIndex(frame)


def iterate_stages(system: EquationSystem, index: FrameIndex) -> List[Dict[str, int]]:
    """All approximation stages as variable-to-mask maps.

    ``stages[a]`` is stage a; the last entry is the stable valuation
    (applying one more step leaves it unchanged).
    """
    stages: List[Dict[str, int]] = [{x: 0 for x in system.vars}]
    bound = index.n * len(system.vars) + 2
    while True:
        cur = stages[-1]
        nxt = {x: cur[x] | index.eval(system.eq(x), cur) for x in system.vars}
        if nxt == cur:
            return stages
        stages.append(nxt)
        if len(stages) > bound:
            raise AssertionError("approximation failed to stabilise within bound")


def _as_valuation(index: FrameIndex, valuation: Optional[Mapping[str, Iterable[str]]]) -> Dict[str, int]:
    env: Dict[str, int] = {}
    for x, states in (valuation or {}).items():
        env[x] = index.mask(states)
    return env


def eval_formula(
    phi: Formula,
    frame: Frame,
    valuation: Optional[Mapping[str, Iterable[str]]] = None,
) -> FrozenSet[str]:
    """Evaluate a formula on a frame; free variables read the valuation.

    Free variables missing from the valuation denote the empty set.
    """
    index = frame_index(frame)
    return index.unmask(index.eval(phi, _as_valuation(index, valuation)))


def stabilize(
    system: EquationSystem, frame: Frame
) -> Tuple[Dict[str, FrozenSet[str]], int]:
    """The stable valuation of the system and the least stage reaching it."""
    index = frame_index(frame)
    stages = iterate_stages(system, index)
    final = stages[-1]
    first = next(a for a, v in enumerate(stages) if v == final)
    return {x: index.unmask(m) for x, m in final.items()}, first


def denotation(eqf: EquationalFormula, frame: Frame) -> FrozenSet[str]:
    """The stable value of the designated variable."""
    valuation, _ = stabilize(eqf.system, frame)
    return valuation[eqf.init]


def closure_ordinal_on(frame: Frame, eqf: EquationalFormula) -> int:
    """Least stage at which the designated variable reaches its stable value."""
    index = frame_index(frame)
    stages = iterate_stages(eqf.system, index)
    final = stages[-1][eqf.init]
    return next(a for a, v in enumerate(stages) if v[eqf.init] == final)


def _stage_number(alpha: OrdinalLike, top: int) -> int:
    """Collapse an ordinal stage to an equivalent stage index <= top."""
    if isinstance(alpha, Ordinal):
        if alpha.is_finite:
            return min(alpha.to_int(), top)
        return top
    if alpha < 0:
        raise ValueError("approximation stages are non-negative")
    return min(alpha, top)


def approx(
    psi: Formula,
    alpha: OrdinalLike,
    system: EquationSystem,
    frame: Frame,
) -> FrozenSet[str]:
    """Evaluate a formula under the stage-alpha valuation of the system.

    Stages beyond the stabilisation point coincide with the stable
    valuation, so transfinite stages are collapsed to it.
    """
    index = frame_index(frame)
    stages = iterate_stages(system, index)
    env = stages[_stage_number(alpha, len(stages) - 1)]
    return index.unmask(index.eval(psi, env))


def _normalize_signature(
    sig, system: EquationSystem, cap: int
) -> Tuple[int, ...]:
    if isinstance(sig, Mapping):
        entries = []
        for x in system.vars:
            if x not in sig:
                raise UnboundVariable(f"signature missing variable {x!r}")
            entries.append(sig[x])
        extra = set(sig) - set(system.vars)
        if extra:
            raise UnboundVariable(f"signature names unknown variables {sorted(extra)}")
    else:
        entries = list(sig)
        if len(entries) != len(system.vars):
            raise ValueError(
                f"signature has {len(entries)} entries for {len(system.vars)} variables"
            )
    out = []
    for e in entries:
        if isinstance(e, Ordinal):
            out.append(e.to_int() if e.is_finite else cap)
        elif isinstance(e, int) and e >= 0:
            out.append(min(e, cap))
        else:
            raise ValueError(f"bad signature entry {e!r}")
    return tuple(out)


def sig_approx(
    psi: Formula,
    sig,
    system: EquationSystem,
    frame: Frame,
) -> FrozenSet[str]:
    """Evaluate a formula under a signature of per-variable stages.

    The signature assigns each system variable its own approximation
    stage: the value of variable i under signature s is the union over
    b < s_i of the right-hand side of i evaluated under s with entry i
    lowered to b.  ``sig`` may be a sequence aligned with the system's
    variable order or a mapping from variable names.  On a finite frame
    every entry beyond |states| * |variables| is equivalent to that
    bound, so transfinite entries are collapsed to it.
    """
    index = frame_index(frame)
    cap = index.n * len(system.vars) + 1
    entries = _normalize_signature(sig, system, cap)
    names = system.vars
    memo: Dict[Tuple[int, Tuple[int, ...]], int] = {}

    def var_val(i: int, s: Tuple[int, ...]) -> int:
        key = (i, s)
        got = memo.get(key)
        if got is not None:
            return got
        acc = 0
        for b in range(s[i]):
            acc |= body_val(i, s[:i] + (b,) + s[i + 1 :])
        memo[key] = acc
        return acc

    def body_val(i: int, s: Tuple[int, ...]) -> int:
        env = {names[j]: var_val(j, s) for j in range(len(names))}
        return index.eval(system.eq(names[i]), env)

    env = {names[j]: var_val(j, entries) for j in range(len(names))}
    return index.unmask(index.eval(psi, env))
