"""Exact rationals and outward-rounded interval enclosures.

Two layers of number live here:

* exact rationals (``fractions.Fraction``) for pmf weights, family
  parameters, and every quantity that stays inside the field of
  rationals;
* ``Enclosure``, a pair of MPFR endpoints rounded toward -inf / +inf
  that is guaranteed to contain the real value of an expression.

Every ``Enclosure`` operation rounds outward, so the containment
invariant survives arbitrary composition: if the inputs contain the
true operands, the output contains the true result.  Endpoints are
computed with MPFR's correctly rounded primitives (including exp and
log), so a single directed-rounded call per endpoint is enough.

Two structural facts are relied on elsewhere and are worth stating:

* MPFR precision grids are nested (every p-bit float is a 2p-bit
  float), so re-evaluating a fixed expression at doubled precision
  yields an enclosure contained in the original one ("monotone
  refinement").
* Operations never accept binary floats: inputs enter either as exact
  rationals or as existing enclosures.  This keeps certificates about
  the stated parameters, not about their nearest double.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from decimal import ROUND_CEILING, ROUND_FLOOR, localcontext
from decimal import Decimal
from fractions import Fraction
from typing import Iterator, Union

import gmpy2
from gmpy2 import mpfr, mpq

__all__ = [
    "ExactRational",
    "Rat",
    "UlcLabError",
    "DomainError",
    "RangeError",
    "ConstructionError",
    "parse_rational",
    "Enclosure",
    "rational_to_enclosure",
    "exp_enclosure",
    "ln_enclosure",
    "Sign",
    "certify_sign",
    "PrecisionPolicy",
    "decimal_str_lo",
    "decimal_str_hi",
]

# The exact-rational scalar type used throughout the package.
ExactRational = Fraction

# Things accepted wherever an exact rational is expected.
Rat = Union[int, Fraction]


class UlcLabError(Exception):
    """Base class for errors raised by this package."""


class DomainError(UlcLabError):
    """Operand outside the mathematical domain (log of <= 0, divide by an
    interval containing zero, ...)."""


class RangeError(UlcLabError):
    """Result escaped the representable MPFR exponent range."""


class ConstructionError(UlcLabError):
    """Invalid parameters for a distribution family or pmf."""


def parse_rational(text: str) -> Fraction:
    """Parse ``"3/2"``, ``"0.25"``, ``"-7"`` ... into an exact Fraction.

    Decimal strings convert exactly (0.25 -> 1/4); binary floats are
    never involved.
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        raise DomainError("floating-point input is not accepted; pass a rational string")
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"not a rational: {text!r}") from exc


def _as_mpq(value: Rat) -> mpq:
    if isinstance(value, int):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, type(mpq())):
        return value
    raise DomainError(
        f"expected an exact rational, got {type(value).__name__}; "
        "binary floats are not accepted on certification paths"
    )


@functools.lru_cache(maxsize=None)
def _dn(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundDown)


@functools.lru_cache(maxsize=None)
def _up(bits: int) -> gmpy2.context:
    return gmpy2.context(precision=bits, round=gmpy2.RoundUp)


_ZERO = mpfr(0)


def _check_finite(lo: mpfr, hi: mpfr) -> None:
    if not (gmpy2.is_finite(lo) and gmpy2.is_finite(hi)):
        raise RangeError("enclosure endpoint left the representable range")


@dataclass(frozen=True)
class Enclosure:
    """Directed-rounded interval [lo, hi] guaranteed to contain a real value.

    ``bits`` records the working precision its endpoints were rounded
    to.  Instances are immutable; arithmetic returns new values.
    """

    lo: mpfr
    hi: mpfr
    bits: int

    def __post_init__(self) -> None:
        _check_finite(self.lo, self.hi)
        if self.lo > self.hi:
            raise ConstructionError(f"inverted interval: [{self.lo}, {self.hi}]")
        if self.bits < 2:
            raise ConstructionError("precision must be at least 2 bits")

    # -- constructors ------------------------------------------------

    @staticmethod
    def from_rational(value: Rat, bits: int) -> "Enclosure":
        q = _as_mpq(value)
        return Enclosure(_dn(bits).add(q, _ZERO), _up(bits).add(q, _ZERO), bits)

    @staticmethod
    def from_endpoints(lo: Rat, hi: Rat, bits: int) -> "Enclosure":
        """Smallest representable enclosure of the rational interval [lo, hi]."""
        qlo, qhi = _as_mpq(lo), _as_mpq(hi)
        if qlo > qhi:
            raise ConstructionError("lo > hi")
        return Enclosure(_dn(bits).add(qlo, _ZERO), _up(bits).add(qhi, _ZERO), bits)

    # -- inspection --------------------------------------------------

    @property
    def lo_q(self) -> Fraction:
        """Exact rational value of the lower endpoint."""
        q = mpq(self.lo)
        return Fraction(q.numerator, q.denominator)

    @property
    def hi_q(self) -> Fraction:
        q = mpq(self.hi)
        return Fraction(q.numerator, q.denominator)

    def width(self) -> Fraction:
        return self.hi_q - self.lo_q

    def contains(self, value: Rat) -> bool:
        q = _as_mpq(value)
        return mpq(self.lo) <= q <= mpq(self.hi)

    def contains_interval(self, other: "Enclosure") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def overlaps(self, other: "Enclosure") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def strictly_positive(self) -> bool:
        return self.lo > 0

    def strictly_negative(self) -> bool:
        return self.hi < 0

    def __repr__(self) -> str:
        return f"Enclosure[{decimal_str_lo(self, 17)}, {decimal_str_hi(self, 17)}]@{self.bits}"

    # -- arithmetic --------------------------------------------------

    def _coerce(self, other: "Enclosure | Rat") -> "Enclosure":
        if isinstance(other, Enclosure):
            return other
        return Enclosure.from_rational(other, self.bits)

    def __neg__(self) -> "Enclosure":
        # Negation of binary floats is exact.
        return Enclosure(-self.hi, -self.lo, self.bits)

    def __add__(self, other: "Enclosure | Rat") -> "Enclosure":
        o = self._coerce(other)
        b = max(self.bits, o.bits)
        return Enclosure(_dn(b).add(self.lo, o.lo), _up(b).add(self.hi, o.hi), b)

    __radd__ = __add__

    def __sub__(self, other: "Enclosure | Rat") -> "Enclosure":
        o = self._coerce(other)
        b = max(self.bits, o.bits)
        return Enclosure(_dn(b).sub(self.lo, o.hi), _up(b).sub(self.hi, o.lo), b)

    def __rsub__(self, other: "Enclosure | Rat") -> "Enclosure":
        return self._coerce(other).__sub__(self)

    def __mul__(self, other: "Enclosure | Rat") -> "Enclosure":
        o = self._coerce(other)
        b = max(self.bits, o.bits)
        dn, up = _dn(b), _up(b)
        pairs = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        lo = min(dn.mul(x, y) for x, y in pairs)
        hi = max(up.mul(x, y) for x, y in pairs)
        return Enclosure(lo, hi, b)

    __rmul__ = __mul__

    def __truediv__(self, other: "Enclosure | Rat") -> "Enclosure":
        o = self._coerce(other)
        if o.lo <= 0 <= o.hi:
            raise DomainError("division by an interval containing zero")
        b = max(self.bits, o.bits)
        dn, up = _dn(b), _up(b)
        pairs = ((self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi))
        lo = min(dn.div(x, y) for x, y in pairs)
        hi = max(up.div(x, y) for x, y in pairs)
        return Enclosure(lo, hi, b)

    def __rtruediv__(self, other: "Enclosure | Rat") -> "Enclosure":
        return self._coerce(other).__truediv__(self)

    def pow_int(self, k: int) -> "Enclosure":
        """x**k for integer k, with the sharp case split at zero."""
        if not isinstance(k, int):
            raise DomainError("pow_int needs an integer exponent")
        if k == 0:
            return Enclosure.from_rational(1, self.bits)
        if k < 0:
            return 1 / self.pow_int(-k)
        dn, up = _dn(self.bits), _up(self.bits)
        if self.lo >= 0:
            return Enclosure(dn.pow(self.lo, k), up.pow(self.hi, k), self.bits)
        if self.hi <= 0:
            if k % 2 == 0:
                return Enclosure(dn.pow(self.hi, k), up.pow(self.lo, k), self.bits)
            return Enclosure(dn.pow(self.lo, k), up.pow(self.hi, k), self.bits)
        # straddles zero
        if k % 2 == 0:
            hi = max(up.pow(self.lo, k), up.pow(self.hi, k))
            return Enclosure(mpfr(0), hi, self.bits)
        return Enclosure(dn.pow(self.lo, k), up.pow(self.hi, k), self.bits)

    def __pow__(self, k: int) -> "Enclosure":
        return self.pow_int(k)

    def hull(self, other: "Enclosure") -> "Enclosure":
        b = max(self.bits, other.bits)
        return Enclosure(min(self.lo, other.lo), max(self.hi, other.hi), b)


def rational_to_enclosure(value: Rat, bits: int) -> Enclosure:
    """Tightest bits-precision enclosure of an exact rational."""
    if bits < 2:
        raise ConstructionError("precision must be at least 2 bits")
    return Enclosure.from_rational(value, bits)


def exp_enclosure(x: Enclosure) -> Enclosure:
    """Enclosure of e**t over all t in x (exp is increasing)."""
    lo = _dn(x.bits).exp(x.lo)
    hi = _up(x.bits).exp(x.hi)
    if not (gmpy2.is_finite(lo) and gmpy2.is_finite(hi)):
        raise RangeError("exp overflowed the representable exponent range")
    return Enclosure(lo, hi, x.bits)


def ln_enclosure(x: Enclosure) -> Enclosure:
    """Enclosure of ln t over all t in x; requires x.lo > 0."""
    if x.lo <= 0:
        raise DomainError("ln needs a strictly positive lower bound")
    return Enclosure(_dn(x.bits).log(x.lo), _up(x.bits).log(x.hi), x.bits)


def pow_rational(x: Enclosure, a: Rat) -> Enclosure:
    """x**a for rational a via exp(a*ln x); x must be positive unless a
    is an integer.  A zero lower endpoint is tolerated for positive a
    (the lower bound degrades to 0)."""
    a = Fraction(a) if isinstance(a, int) else a
    if a.denominator == 1:
        return x.pow_int(a.numerator)
    if x.hi <= 0:
        raise DomainError("rational power of a nonpositive interval")
    if x.lo <= 0:
        if a <= 0:
            raise DomainError("nonpositive power of an interval touching zero")
        upper = exp_enclosure(ln_enclosure(Enclosure(x.hi, x.hi, x.bits)) * a)
        return Enclosure(mpfr(0), upper.hi, x.bits)
    return exp_enclosure(ln_enclosure(x) * a)


class Sign(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    INCONCLUSIVE = "Inconclusive"


def certify_sign(x: Enclosure) -> Sign:
    """Sign of the enclosed value, asserted only when the interval proves it."""
    if x.lo > 0:
        return Sign.POSITIVE
    if x.hi < 0:
        return Sign.NEGATIVE
    return Sign.INCONCLUSIVE


@dataclass(frozen=True)
class PrecisionPolicy:
    """Working-precision ladder for certification loops.

    Evaluation starts at ``initial_bits`` and multiplies by
    ``growth_factor`` while a verdict stays inconclusive, stopping at
    ``max_bits``.  The defaults separate every shipped inequality at
    or below 256 bits; the cap keeps true equalities from burning
    cycles forever.
    """

    initial_bits: int = 128
    max_bits: int = 4096
    growth_factor: int = 2

    def __post_init__(self) -> None:
        if self.initial_bits < 2 or self.max_bits < 2:
            raise ConstructionError("precision must be at least 2 bits")
        if self.initial_bits > self.max_bits:
            raise ConstructionError("initial_bits must not exceed max_bits")
        if self.growth_factor < 2:
            raise ConstructionError("growth_factor must be at least 2")

    def ladder(self) -> Iterator[int]:
        bits = self.initial_bits
        while True:
            yield bits
            if bits >= self.max_bits:
                return
            bits = min(bits * self.growth_factor, self.max_bits)

    @staticmethod
    def fixed(bits: int) -> "PrecisionPolicy":
        """Policy that evaluates once at an exact precision (no escalation)."""
        return PrecisionPolicy(initial_bits=bits, max_bits=bits)


DEFAULT_POLICY = PrecisionPolicy()


# -- decimal rendering (for reports; rounding stays outward) ----------


def _fraction_of(x: "Enclosure | mpfr | Rat", side: str) -> Fraction:
    if isinstance(x, Enclosure):
        return x.lo_q if side == "lo" else x.hi_q
    if isinstance(x, type(mpfr())):
        q = mpq(x)
        return Fraction(q.numerator, q.denominator)
    return Fraction(x)


def _decimal_str(q: Fraction, digits: int, rounding: str) -> str:
    with localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = rounding
        d = Decimal(q.numerator) / Decimal(q.denominator)
    return str(d)


def decimal_str_lo(x: "Enclosure | mpfr | Rat", digits: int = 30) -> str:
    """Decimal string rounded toward -inf (safe to quote as a lower bound)."""
    return _decimal_str(_fraction_of(x, "lo"), digits, ROUND_FLOOR)


def decimal_str_hi(x: "Enclosure | mpfr | Rat", digits: int = 30) -> str:
    """Decimal string rounded toward +inf (safe to quote as an upper bound)."""
    return _decimal_str(_fraction_of(x, "hi"), digits, ROUND_CEILING)
