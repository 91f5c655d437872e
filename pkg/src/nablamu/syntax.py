"""Formula ASTs for the cover-modality mu-calculus, with parser, printer,
equation systems, Fischer-Ladner closure and conjunctive-shape recognition.

Grammar (concrete syntax):

    formula  := "mu" IDENT "." formula | "nu" IDENT "." formula | prefix
    prefix   := ("box" | "dia") prefix | primary
    primary  := "tt" | "ff" | "!" IDENT | IDENT
              | ("and" | "or" | "nab") "{" [formula ("," formula)*] "}"
              | "(" formula ")"

``tt`` is the empty conjunction, ``ff`` the empty disjunction.  ``box``
and ``dia`` are sugar (box f = nab{f, ff}, dia f = and{nab{f}, nab{}})
and are desugared at parse time unless asked otherwise.  Negation is
restricted to propositional constants.  Argument sets of and/or/nab are
genuine sets: duplicates collapse and order is irrelevant for equality.
"""

from __future__ import annotations

import re
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

__all__ = [
    "Formula", "Prop", "NegProp", "Var", "BigAnd", "BigOr", "Nabla",
    "Mu", "Nu", "Box", "Dia", "TT", "FF",
    "conj", "disj", "cover", "prop", "neg", "var", "mu", "nu", "box", "dia",
    "ParseError", "UnboundVariable", "NegatedVariable",
    "UnguardedVariable", "OpenQuantifier",
    "free_vars", "is_closed", "desugar", "substitute",
    "format_formula", "parse_formula", "sort_key",
    "EquationSystem", "EquationalFormula",
    "closure", "size", "is_conjunctive",
    "parse_system", "format_system",
]


class ParseError(ValueError):
    """Text outside the grammar; carries line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnboundVariable(ValueError):
    """A variable is used where no declaration binds it."""


class NegatedVariable(ValueError):
    """Negation applied to a variable; only propositions may be negated."""


class UnguardedVariable(ValueError):
    """A system variable occurs in an equation body outside every nabla."""


class OpenQuantifier(ValueError):
    """A mu/nu subformula of an equation body has free variables."""


# ---------------------------------------------------------------------------
# AST nodes
# ---------------------------------------------------------------------------


class Formula:
    """Base class.  Nodes are immutable by convention, hash-cached, and
    compare structurally (argument sets are order-insensitive)."""

    __slots__ = ("_hash", "_text")

    def _ident(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other):
            return False
        return self._ident() == other._ident()

    def __ne__(self, other) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._ident())
            object.__setattr__(self, "_hash", h)
            return h

    def __str__(self) -> str:
        return format_formula(self)

    def __repr__(self) -> str:
        return format_formula(self)


class Prop(Formula):
    __slots__ = ("name",)
    __match_args__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def _ident(self) -> tuple:
        return (self.name,)


class NegProp(Formula):
    __slots__ = ("name",)
    __match_args__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def _ident(self) -> tuple:
        return (self.name,)


class Var(Formula):
    __slots__ = ("name",)
    __match_args__ = ("name",)

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)

    def _ident(self) -> tuple:
        return (self.name,)


class _SetNode(Formula):
    __slots__ = ("args",)
    __match_args__ = ("args",)

    def __init__(self, args: Iterable[Formula] = ()):
        args = frozenset(args)
        for a in args:
            if not isinstance(a, Formula):
                raise TypeError(f"formula expected, got {a!r}")
        object.__setattr__(self, "args", args)

    def _ident(self) -> tuple:
        return (self.args,)


class BigAnd(_SetNode):
    __slots__ = ()


class BigOr(_SetNode):
    __slots__ = ()


class Nabla(_SetNode):
    __slots__ = ()


class _Binder(Formula):
    __slots__ = ("var", "body")
    __match_args__ = ("var", "body")

    def __init__(self, var: str, body: Formula):
        if not isinstance(body, Formula):
            raise TypeError(f"formula expected, got {body!r}")
        object.__setattr__(self, "var", var)
        object.__setattr__(self, "body", body)

    def _ident(self) -> tuple:
        return (self.var, self.body)


class Mu(_Binder):
    __slots__ = ()


class Nu(_Binder):
    __slots__ = ()


class _Prefix(Formula):
    """Sugar node (box/dia); eliminated by desugar()."""

    __slots__ = ("arg",)
    __match_args__ = ("arg",)

    def __init__(self, arg: Formula):
        if not isinstance(arg, Formula):
            raise TypeError(f"formula expected, got {arg!r}")
        object.__setattr__(self, "arg", arg)

    def _ident(self) -> tuple:
        return (self.arg,)


class Box(_Prefix):
    __slots__ = ()


class Dia(_Prefix):
    __slots__ = ()


TT = BigAnd()
FF = BigOr()


def conj(*args: Formula) -> BigAnd:
    return BigAnd(args)


def disj(*args: Formula) -> BigOr:
    return BigOr(args)


def cover(*args: Formula) -> Nabla:
    return Nabla(args)


def prop(name: str) -> Prop:
    return Prop(name)


def neg(name: str) -> NegProp:
    return NegProp(name)


def var(name: str) -> Var:
    return Var(name)


def mu(name: str, body: Formula) -> Mu:
    return Mu(name, body)


def nu(name: str, body: Formula) -> Nu:
    return Nu(name, body)


def box(arg: Formula) -> Box:
    return Box(arg)


def dia(arg: Formula) -> Dia:
    return Dia(arg)


# ---------------------------------------------------------------------------
# Structure helpers
# ---------------------------------------------------------------------------


def free_vars(f: Formula) -> FrozenSet[str]:
    """Free variable names of f (propositions do not count)."""
    match f:
        case Var(name):
            return frozenset((name,))
        case Prop() | NegProp():
            return frozenset()
        case BigAnd(args) | BigOr(args) | Nabla(args):
            out: FrozenSet[str] = frozenset()
            for a in args:
                out |= free_vars(a)
            return out
        case Mu(v, body) | Nu(v, body):
            return free_vars(body) - {v}
        case Box(arg) | Dia(arg):
            return free_vars(arg)
    raise TypeError(f"not a formula: {f!r}")


def is_closed(f: Formula) -> bool:
    return not free_vars(f)


def desugar(f: Formula) -> Formula:
    """Eliminate box/dia: box f = nab{f, ff}, dia f = and{nab{f}, nab{}}."""
    match f:
        case Prop() | NegProp() | Var():
            return f
        case BigAnd(args):
            return BigAnd(desugar(a) for a in args)
        case BigOr(args):
            return BigOr(desugar(a) for a in args)
        case Nabla(args):
            return Nabla(desugar(a) for a in args)
        case Mu(v, body):
            return Mu(v, desugar(body))
        case Nu(v, body):
            return Nu(v, desugar(body))
        case Box(arg):
            return Nabla((desugar(arg), FF))
        case Dia(arg):
            return BigAnd((Nabla((desugar(arg),)), Nabla()))
    raise TypeError(f"not a formula: {f!r}")


def substitute(f: Formula, name: str, value: Formula) -> Formula:
    """Replace free occurrences of Var(name).  The replacement is assumed
    closed (the only use is fixpoint unfolding), so no capture arises."""
    match f:
        case Var(n):
            return value if n == name else f
        case Prop() | NegProp():
            return f
        case BigAnd(args):
            return BigAnd(substitute(a, name, value) for a in args)
        case BigOr(args):
            return BigOr(substitute(a, name, value) for a in args)
        case Nabla(args):
            return Nabla(substitute(a, name, value) for a in args)
        case Mu(v, body):
            return f if v == name else Mu(v, substitute(body, name, value))
        case Nu(v, body):
            return f if v == name else Nu(v, substitute(body, name, value))
        case Box(arg):
            return Box(substitute(arg, name, value))
        case Dia(arg):
            return Dia(substitute(arg, name, value))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def format_formula(f: Formula) -> str:
    """Canonical text: set members sorted by their own canonical text."""
    try:
        return f._text
    except AttributeError:
        pass
    match f:
        case Prop(name) | Var(name):
            text = name
        case NegProp(name):
            text = "!" + name
        case BigAnd(args):
            text = "tt" if not args else "and{" + ", ".join(sorted(format_formula(a) for a in args)) + "}"
        case BigOr(args):
            text = "ff" if not args else "or{" + ", ".join(sorted(format_formula(a) for a in args)) + "}"
        case Nabla(args):
            text = "nab{" + ", ".join(sorted(format_formula(a) for a in args)) + "}"
        case Mu(v, body):
            text = f"mu {v}. {format_formula(body)}"
        case Nu(v, body):
            text = f"nu {v}. {format_formula(body)}"
        case Box(arg):
            text = "box " + _prefix_arg(arg)
        case Dia(arg):
            text = "dia " + _prefix_arg(arg)
        case _:
            raise TypeError(f"not a formula: {f!r}")
    object.__setattr__(f, "_text", text)
    return text


def _prefix_arg(arg: Formula) -> str:
    if isinstance(arg, (Mu, Nu)):
        return "(" + format_formula(arg) + ")"
    return format_formula(arg)


def sort_key(f: Formula) -> str:
    """The fixed total order on ASTs used for canonical sets and
    deterministic tie-breaking."""
    return format_formula(f)


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

KEYWORDS = frozenset({"and", "or", "nab", "mu", "nu", "box", "dia", "tt", "ff"})

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class _Token:
    __slots__ = ("kind", "value", "line", "col")

    def __init__(self, kind: str, value: str, line: int, col: int):
        self.kind = kind
        self.value = value
        self.line = line
        self.col = col


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch in "{},.!()":
            kinds = {"{": "LBRACE", "}": "RBRACE", ",": "COMMA", ".": "DOT",
                     "!": "BANG", "(": "LPAREN", ")": "RPAREN"}
            tokens.append(_Token(kinds[ch], ch, line, col))
            i += 1
            col += 1
            continue
        m = _IDENT.match(text, i)
        if m:
            word = m.group(0)
            tokens.append(_Token("IDENT", word, line, col))
            i = m.end()
            col += len(word)
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    tokens.append(_Token("EOF", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: List[_Token], vars: FrozenSet[str]):
        self.tokens = tokens
        self.pos = 0
        self.vars = vars

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind}, found {tok.value or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)

    def formula(self, scope: FrozenSet[str]) -> Formula:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.value in ("mu", "nu"):
            self.next()
            name_tok = self.expect("IDENT")
            if name_tok.value in KEYWORDS:
                raise ParseError(f"keyword {name_tok.value!r} cannot bind a variable", name_tok.line, name_tok.col)
            self.expect("DOT")
            body = self.formula(scope | {name_tok.value})
            return Mu(name_tok.value, body) if tok.value == "mu" else Nu(name_tok.value, body)
        return self.prefix(scope)

    def prefix(self, scope: FrozenSet[str]) -> Formula:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.value in ("box", "dia"):
            self.next()
            arg = self.prefix(scope)
            return Box(arg) if tok.value == "box" else Dia(arg)
        return self.primary(scope)

    def primary(self, scope: FrozenSet[str]) -> Formula:
        tok = self.peek()
        if tok.kind == "LPAREN":
            self.next()
            inner = self.formula(scope)
            self.expect("RPAREN")
            return inner
        if tok.kind == "BANG":
            self.next()
            name_tok = self.expect("IDENT")
            if name_tok.value in KEYWORDS:
                raise ParseError(f"cannot negate keyword {name_tok.value!r}", name_tok.line, name_tok.col)
            if name_tok.value in scope or name_tok.value in self.vars:
                raise NegatedVariable(f"variable {name_tok.value!r} may not be negated (line {name_tok.line})")
            return NegProp(name_tok.value)
        if tok.kind != "IDENT":
            raise self.error(f"expected a formula, found {tok.value or 'end of input'!r}")
        word = tok.value
        if word == "tt":
            self.next()
            return BigAnd()
        if word == "ff":
            self.next()
            return BigOr()
        if word in ("and", "or", "nab"):
            self.next()
            members = self.member_list(scope)
            return {"and": BigAnd, "or": BigOr, "nab": Nabla}[word](members)
        if word in KEYWORDS:
            raise self.error(f"keyword {word!r} is not a formula here")
        self.next()
        if word in scope or word in self.vars:
            return Var(word)
        return Prop(word)

    def member_list(self, scope: FrozenSet[str]) -> List[Formula]:
        self.expect("LBRACE")
        members: List[Formula] = []
        if self.peek().kind != "RBRACE":
            members.append(self.formula(scope))
            while self.peek().kind == "COMMA":
                self.next()
                members.append(self.formula(scope))
        self.expect("RBRACE")
        return members


def parse_formula(text: str, vars: Iterable[str] = (), keep_sugar: bool = False) -> Formula:
    """Parse one formula.  Identifiers in ``vars`` (or bound by an
    enclosing mu/nu) become Var nodes; every other identifier is a
    proposition.  box/dia are desugared unless keep_sugar is set."""
    parser = _Parser(_tokenize(text), frozenset(vars))
    f = parser.formula(frozenset())
    tok = parser.peek()
    if tok.kind != "EOF":
        raise ParseError(f"trailing input {tok.value!r}", tok.line, tok.col)
    return f if keep_sugar else desugar(f)


# ---------------------------------------------------------------------------
# Equation systems
# ---------------------------------------------------------------------------


class EquationSystem:
    """A finite set of variables with guarded quantifier-free defining
    formulas over the variables and closed formulas (Sigma-fragment
    equation system).  Bodies are stored as given (box/dia nodes are
    kept and count as guards); variable order is the declaration
    order."""

    __slots__ = ("vars", "_eqs")

    def __init__(self, equations: Union[Mapping[str, Formula], Iterable[Tuple[str, Formula]]]):
        if isinstance(equations, Mapping):
            items = list(equations.items())
        else:
            items = list(equations)
        names: List[str] = []
        eqs: Dict[str, Formula] = {}
        for name, body in items:
            if name in eqs:
                raise ValueError(f"duplicate equation for {name!r}")
            if not _IDENT.fullmatch(name) or name in KEYWORDS:
                raise ValueError(f"bad variable name {name!r}")
            names.append(name)
            if not isinstance(body, Formula):
                raise TypeError(f"equation body for {name!r} is not a formula")
            eqs[name] = body
        self_vars = tuple(names)
        object.__setattr__(self, "vars", self_vars)
        object.__setattr__(self, "_eqs", eqs)
        varset = frozenset(self_vars)
        for name in self_vars:
            _validate_body(eqs[name], name, varset)

    def eq(self, name: str) -> Formula:
        try:
            return self._eqs[name]
        except KeyError:
            raise UnboundVariable(f"no equation for {name!r}") from None

    @property
    def equations(self) -> Tuple[Tuple[str, Formula], ...]:
        return tuple((x, self._eqs[x]) for x in self.vars)

    def __eq__(self, other) -> bool:
        return isinstance(other, EquationSystem) and self.equations == other.equations

    def __hash__(self) -> int:
        return hash(self.equations)

    def __repr__(self) -> str:
        eqs = "; ".join(f"{x} = {format_formula(f)}" for x, f in self.equations)
        return f"EquationSystem({eqs})"


def _validate_body(f: Formula, owner: str, varset: FrozenSet[str], guarded: bool = False) -> None:
    """Equation bodies are quantifier-free over X and closed formulas;
    X-variables must sit under at least one nabla."""
    match f:
        case Var(name):
            if name not in varset:
                raise UnboundVariable(f"variable {name!r} in equation for {owner!r} has no equation")
            if not guarded:
                raise UnguardedVariable(f"variable {name!r} unguarded in equation for {owner!r}")
        case Prop() | NegProp():
            return
        case BigAnd(args) | BigOr(args):
            for a in args:
                _validate_body(a, owner, varset, guarded)
        case Nabla(args):
            for a in args:
                _validate_body(a, owner, varset, True)
        case Mu() | Nu():
            fv = free_vars(f)
            if fv:
                raise OpenQuantifier(
                    f"quantified subformula {format_formula(f)!r} in equation for {owner!r} "
                    f"has free variables {sorted(fv)}")
        case Box(arg) | Dia(arg):
            _validate_body(arg, owner, varset, True)
        case _:
            raise TypeError(f"not a formula: {f!r}")


class EquationalFormula:
    """An equation system with a distinguished initial variable."""

    __slots__ = ("system", "init")

    def __init__(self, system: EquationSystem, init: str):
        if init not in system.vars:
            raise UnboundVariable(f"initial variable {init!r} not among {list(system.vars)}")
        object.__setattr__(self, "system", system)
        object.__setattr__(self, "init", init)

    def __eq__(self, other) -> bool:
        return (isinstance(other, EquationalFormula)
                and self.init == other.init and self.system == other.system)

    def __hash__(self) -> int:
        return hash((self.init, self.system))

    def __repr__(self) -> str:
        return f"EquationalFormula(init={self.init}, {self.system!r})"


# ---------------------------------------------------------------------------
# Fischer-Ladner closure
# ---------------------------------------------------------------------------


def closure(sys: EquationSystem) -> FrozenSet[Formula]:
    """Smallest set containing every E(x), closed under taking members of
    and/or/nab argument sets (box/dia arguments likewise) and the single
    unfolding of closed mu/nu subformulas."""
    todo: List[Formula] = [sys.eq(x) for x in sys.vars]
    seen: set = set()
    while todo:
        f = todo.pop()
        if f in seen:
            continue
        seen.add(f)
        match f:
            case BigAnd(args) | BigOr(args) | Nabla(args):
                todo.extend(args)
            case Box(arg) | Dia(arg):
                todo.append(arg)
            case Mu(v, body) | Nu(v, body):
                todo.append(substitute(body, v, f))
            case _:
                pass
    return frozenset(seen)


def size(sys: EquationSystem) -> int:
    """|X, E|: the cardinality of the closure."""
    return len(closure(sys))


# ---------------------------------------------------------------------------
# Conjunctive shape (each equation is a conjunction of clauses
# "disjunction of closed formulas or one nabla over variables")
# ---------------------------------------------------------------------------


def _unwrap(f: Formula) -> Formula:
    while isinstance(f, (BigAnd, BigOr)) and len(f.args) == 1:
        f = next(iter(f.args))
    return f


def conjuncts(f: Formula) -> Tuple[Formula, ...]:
    f = _unwrap(f)
    if isinstance(f, BigAnd):
        return tuple(sorted((_unwrap(a) for a in f.args), key=sort_key))
    return (f,)


def disjuncts(f: Formula) -> Tuple[Formula, ...]:
    f = _unwrap(f)
    if isinstance(f, BigOr):
        return tuple(sorted((_unwrap(a) for a in f.args), key=sort_key))
    return (f,)


def _is_var_nabla(f: Formula, varset: FrozenSet[str]) -> bool:
    return isinstance(f, Nabla) and all(isinstance(a, Var) and a.name in varset for a in f.args)


def is_conjunctive(sys: EquationSystem) -> bool:
    """Each equation is a conjunction of clauses "disjunction of closed
    formulas plus exactly one nabla over variables" (a closed nabla
    counts as a closed formula only when it has non-variable members;
    the empty nabla is the Y = {} modal part)."""
    varset = frozenset(sys.vars)
    for x in sys.vars:
        for clause in conjuncts(sys.eq(x)):
            parts = disjuncts(clause)
            modal = [p for p in parts if _is_var_nabla(p, varset)]
            if len(modal) != 1:
                return False
            rest = [p for p in parts if not _is_var_nabla(p, varset)]
            if any(free_vars(p) for p in rest):
                return False
    return True


# ---------------------------------------------------------------------------
# .mes system files
# ---------------------------------------------------------------------------


def parse_system(text: str) -> EquationalFormula:
    """Parse the .mes format: header line ``system``, one ``init: x``
    line, and ``x = formula`` equation lines; ``#`` starts a comment."""
    raw_lines = text.splitlines()
    lines: List[Tuple[int, str]] = []
    for idx, raw in enumerate(raw_lines, start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((idx, body))
    if not lines:
        raise ParseError("empty system file", 1, 1)
    header_no, header = lines[0]
    if header != "system":
        raise ParseError(f"expected header 'system', found {header!r}", header_no, 1)
    init: Optional[str] = None
    eq_lines: List[Tuple[int, str, str]] = []
    for no, line in lines[1:]:
        if line.startswith("init:"):
            if init is not None:
                raise ParseError("duplicate init line", no, 1)
            init = line[len("init:"):].strip()
            if not _IDENT.fullmatch(init):
                raise ParseError(f"bad initial variable {init!r}", no, 1)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'var = formula', found {line!r}", no, 1)
        name, rhs = line.split("=", 1)
        name = name.strip()
        if not _IDENT.fullmatch(name) or name in KEYWORDS:
            raise ParseError(f"bad variable name {name!r}", no, 1)
        eq_lines.append((no, name, rhs.strip()))
    names = [name for _, name, _ in eq_lines]
    varset = frozenset(names)
    equations: List[Tuple[str, Formula]] = []
    for no, name, rhs in eq_lines:
        try:
            body = parse_formula(rhs, vars=varset, keep_sugar=True)
        except ParseError as exc:
            raise ParseError(f"in equation for {name!r}: {exc.args[0]}", no, exc.col) from None
        equations.append((name, body))
    system = EquationSystem(equations)
    if init is None:
        raise ParseError("missing init line", lines[-1][0], 1)
    return EquationalFormula(system, init)


def format_system(eqf: Union[EquationalFormula, EquationSystem]) -> str:
    if isinstance(eqf, EquationalFormula):
        system, init = eqf.system, eqf.init
    else:
        system, init = eqf, None
    out = ["system"]
    if init is not None:
        out.append(f"init: {init}")
    for x, body in system.equations:
        out.append(f"{x} = {format_formula(body)}")
    return "\n".join(out) + "\n"
