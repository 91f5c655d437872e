"""Cantor normal form ordinals below omega^omega.

A value is a finite sum ``w^e1.c1 + ... + w^ek.ck`` with strictly
decreasing natural exponents and positive integer coefficients.  This
range covers everything annotation bookkeeping needs: naturals, ``w.k``
offsets and ``w^2``-sized headroom.  Multiplication is deliberately
absent; only comparison, (non-commutative) addition, predecessor-part
extraction and limit/successor classification are meaningful here.
"""

from __future__ import annotations

import enum
from functools import total_ordering
from typing import Iterable, Tuple

__all__ = [
    "Ordinal",
    "OrdinalKind",
    "NoPredecessor",
    "OrdinalParseError",
    "ZERO",
    "ONE",
    "OMEGA",
]


class NoPredecessor(ValueError):
    """pred() was applied to zero, which has no predecessor part."""


class OrdinalParseError(ValueError):
    """The text is not a canonical ordinal literal."""


class OrdinalKind(enum.Enum):
    ZERO = "zero"
    SUCCESSOR = "successor"
    LIMIT = "limit"


@total_ordering
class Ordinal:
    """An ordinal below omega^omega in Cantor normal form.

    ``terms`` is a tuple of (exponent, coefficient) pairs, exponents
    strictly decreasing, coefficients >= 1.  The empty tuple is zero.
    """

    __slots__ = ("terms",)

    terms: Tuple[Tuple[int, int], ...]

    def __init__(self, terms: Iterable[Tuple[int, int]] = ()):
        terms = tuple((int(e), int(c)) for e, c in terms)
        last_exp = None
        for e, c in terms:
            if e < 0:
                raise ValueError(f"negative exponent {e}")
            if c < 1:
                raise ValueError(f"coefficient {c} must be positive")
            if last_exp is not None and e >= last_exp:
                raise ValueError("exponents must strictly decrease")
            last_exp = e
        object.__setattr__(self, "terms", terms)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Ordinal is immutable")

    # -- constructors ------------------------------------------------

    @classmethod
    def natural(cls, n: int) -> "Ordinal":
        if n < 0:
            raise ValueError("naturals only")
        return cls(((0, n),)) if n else cls()

    @classmethod
    def single(cls, exponent: int, coefficient: int = 1) -> "Ordinal":
        """The ordinal w^exponent . coefficient."""
        return cls(((exponent, coefficient),))

    @classmethod
    def omega_times(cls, k: int) -> "Ordinal":
        """w.k, the k-th limit ordinal below w^2 (zero for k = 0)."""
        if k < 0:
            raise ValueError("coefficient must be non-negative")
        return cls(((1, k),)) if k else cls()

    # -- comparison ---------------------------------------------------
    # Tuple comparison of the term sequences coincides with ordinal
    # order: the first differing term decides by exponent then
    # coefficient, and a proper prefix is the smaller ordinal.

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = Ordinal.natural(other)
        if not isinstance(other, Ordinal):
            return NotImplemented
        return self.terms == other.terms

    def __lt__(self, other) -> bool:
        if isinstance(other, int):
            other = Ordinal.natural(other)
        if not isinstance(other, Ordinal):
            return NotImplemented
        return self.terms < other.terms

    def __hash__(self) -> int:
        return hash(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    # -- arithmetic ---------------------------------------------------

    def __add__(self, other) -> "Ordinal":
        """Ordinal addition (left argument absorbed below the right head)."""
        if isinstance(other, int):
            other = Ordinal.natural(other)
        if not isinstance(other, Ordinal):
            return NotImplemented
        if not other.terms:
            return self
        head_exp, head_coeff = other.terms[0]
        kept = [t for t in self.terms if t[0] > head_exp]
        if self.terms and len(kept) < len(self.terms) and self.terms[len(kept)][0] == head_exp:
            merged = (head_exp, self.terms[len(kept)][1] + head_coeff)
            return Ordinal(tuple(kept) + (merged,) + other.terms[1:])
        return Ordinal(tuple(kept) + other.terms)

    def __radd__(self, other) -> "Ordinal":
        if isinstance(other, int):
            return Ordinal.natural(other) + self
        return NotImplemented

    def pred(self) -> "Ordinal":
        """Drop one unit summand: the least b with self = b + w^eta.

        In expanded form (coefficients written as repeated summands)
        this deletes the last summand: the last coefficient decrements,
        and the term disappears at zero.
        """
        if not self.terms:
            raise NoPredecessor("zero has no predecessor part")
        head = self.terms[:-1]
        e, c = self.terms[-1]
        if c > 1:
            return Ordinal(head + ((e, c - 1),))
        return Ordinal(head)

    @property
    def last_exponent(self) -> int:
        """The eta with self = pred(self) + w^eta."""
        if not self.terms:
            raise NoPredecessor("zero has no last term")
        return self.terms[-1][0]

    # -- classification -----------------------------------------------

    def kind(self) -> OrdinalKind:
        if not self.terms:
            return OrdinalKind.ZERO
        if self.terms[-1][0] == 0:
            return OrdinalKind.SUCCESSOR
        return OrdinalKind.LIMIT

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_successor(self) -> bool:
        return self.kind() is OrdinalKind.SUCCESSOR

    @property
    def is_limit(self) -> bool:
        return self.kind() is OrdinalKind.LIMIT

    @property
    def is_finite(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and self.terms[0][0] == 0)

    def to_int(self) -> int:
        """The value as a Python int; only finite ordinals qualify."""
        if not self.terms:
            return 0
        if not self.is_finite:
            raise ValueError(f"{self} is infinite")
        return self.terms[0][1]

    # -- text ----------------------------------------------------------

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.terms:
            if e == 0:
                parts.append(str(c))
            elif e == 1:
                parts.append("w" if c == 1 else f"w.{c}")
            else:
                parts.append(f"w^{e}" if c == 1 else f"w^{e}.{c}")
        return "+".join(parts)

    def __repr__(self) -> str:
        return f"Ordinal({self})"

    @classmethod
    def parse(cls, text: str) -> "Ordinal":
        """Parse a canonical literal: terms ``w^E.C``/``w.C``/``w``/naturals
        joined by ``+`` with strictly decreasing exponents; ``0`` alone."""
        s = text.strip()
        if not s:
            raise OrdinalParseError("empty ordinal literal")
        if s == "0":
            return cls()
        terms = []
        for part in s.split("+"):
            part = part.strip()
            if not part:
                raise OrdinalParseError(f"empty term in {text!r}")
            terms.append(_parse_term(part, text))
        try:
            return cls(terms)
        except ValueError as exc:
            raise OrdinalParseError(f"{text!r}: {exc}") from None


def _parse_term(part: str, whole: str) -> Tuple[int, int]:
    if part.isdigit():
        n = int(part)
        if n == 0:
            raise OrdinalParseError(f"zero term inside sum in {whole!r}")
        return (0, n)
    if not part.startswith("w"):
        raise OrdinalParseError(f"bad term {part!r} in {whole!r}")
    rest = part[1:]
    exponent = 1
    if rest.startswith("^"):
        rest = rest[1:]
        dot = rest.find(".")
        digits = rest if dot < 0 else rest[:dot]
        if not digits.isdigit():
            raise OrdinalParseError(f"bad exponent in term {part!r} of {whole!r}")
        exponent = int(digits)
        rest = "" if dot < 0 else rest[dot:]
    if not rest:
        return (exponent, 1)
    if rest.startswith(".") and rest[1:].isdigit():
        coeff = int(rest[1:])
        if coeff == 0:
            raise OrdinalParseError(f"zero coefficient in term {part!r} of {whole!r}")
        return (exponent, coeff)
    raise OrdinalParseError(f"bad term {part!r} in {whole!r}")


ZERO = Ordinal()
ONE = Ordinal.natural(1)
OMEGA = Ordinal.single(1)
