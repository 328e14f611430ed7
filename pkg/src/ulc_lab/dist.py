"""Finite-support pmfs on the integers and the built-in families.

A :class:`DiscretePMF` stores weights for a contiguous integer support
``support_start..support_start+len-1``.  Weights are either all exact
rationals (summing to exactly 1) or all :class:`Enclosure` values; in
the latter case the object may describe the head of an infinite-support
family, with a :class:`TailCertificate` bounding everything that was
truncated away.  Quantities derived from a truncated pmf (mean, max,
entropy sums) always account for the certified tail, so verdicts about
the underlying infinite family remain rigorous.

Families: Poisson, zero-truncated Poisson, binomial, the truncated
exponential-series family (weights proportional to lam**n / n! on a
finite window, the equality case of ultra log-concavity), and explicit
rational weight vectors.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from gmpy2 import mpfr

from .rigor import (
    DEFAULT_POLICY,
    ConstructionError,
    DomainError,
    Enclosure,
    PrecisionPolicy,
    Rat,
    decimal_str_hi,
    decimal_str_lo,
    exp_enclosure,
    pow_rational,
    rational_to_enclosure,
)

__all__ = [
    "Family",
    "FamilySpec",
    "TailCertificate",
    "DiscretePMF",
    "ModeSet",
    "build_pmf",
    "mean",
    "modes",
    "max_pmf",
    "convolve",
    "pmf_to_json",
    "pmf_from_json",
]

_MPFR_ZERO = mpfr(0)


class Family(enum.Enum):
    POISSON = "poisson"
    ZERO_TRUNCATED_POISSON = "ztp"
    BINOMIAL = "binomial"
    ULTRA_LOG_AFFINE = "ula"
    EXPLICIT = "explicit"


def _as_fraction(value: Rat, name: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, Fraction)):
        raise ConstructionError(f"{name} must be an exact rational, got {type(value).__name__}")
    return Fraction(value)


@dataclass(frozen=True)
class FamilySpec:
    """Parameter record for a distribution family.

    Use the classmethod constructors; they validate parameter ranges.
    """

    kind: Family
    lam: Optional[Fraction] = None
    m: Optional[int] = None
    p: Optional[Fraction] = None
    start: Optional[int] = None
    end: Optional[int] = None
    weights: Optional[tuple[Fraction, ...]] = None

    @classmethod
    def poisson(cls, lam: Rat) -> "FamilySpec":
        lam = _as_fraction(lam, "lam")
        if lam <= 0:
            raise ConstructionError("Poisson rate must be positive")
        return cls(Family.POISSON, lam=lam)

    @classmethod
    def zero_truncated_poisson(cls, lam: Rat) -> "FamilySpec":
        lam = _as_fraction(lam, "lam")
        if lam <= 0:
            raise ConstructionError("zero-truncated Poisson rate must be positive")
        return cls(Family.ZERO_TRUNCATED_POISSON, lam=lam)

    @classmethod
    def binomial(cls, m: int, p: Rat) -> "FamilySpec":
        p = _as_fraction(p, "p")
        if not isinstance(m, int) or m < 1:
            raise ConstructionError("binomial needs an integer trial count m >= 1")
        if not (0 < p < 1):
            raise ConstructionError("binomial success probability must satisfy 0 < p < 1")
        return cls(Family.BINOMIAL, m=m, p=p)

    @classmethod
    def ultra_log_affine(cls, lam: Rat, start: int, end: int) -> "FamilySpec":
        lam = _as_fraction(lam, "lam")
        if lam <= 0:
            raise ConstructionError("rate must be positive")
        if not (isinstance(start, int) and isinstance(end, int) and 0 <= start <= end):
            raise ConstructionError("support window must satisfy 0 <= start <= end")
        return cls(Family.ULTRA_LOG_AFFINE, lam=lam, start=start, end=end)

    @classmethod
    def explicit(cls, weights: Sequence[Rat], support_start: int = 0) -> "FamilySpec":
        ws = tuple(_as_fraction(w, "weight") for w in weights)
        if not ws:
            raise ConstructionError("explicit pmf needs at least one weight")
        if any(w < 0 for w in ws):
            raise ConstructionError("weights must be nonnegative")
        if not isinstance(support_start, int):
            raise ConstructionError("support_start must be an integer")
        return cls(Family.EXPLICIT, weights=ws, start=support_start)

    def describe(self) -> dict:
        """Parameter dict with exact rational strings (for reports)."""
        out: dict = {"family": self.kind.value}
        if self.lam is not None:
            out["lambda"] = str(self.lam)
        if self.m is not None:
            out["m"] = self.m
        if self.p is not None:
            out["p"] = str(self.p)
        if self.start is not None:
            out["K" if self.kind is Family.ULTRA_LOG_AFFINE else "support_start"] = self.start
        if self.end is not None:
            out["N"] = self.end
        if self.weights is not None:
            out["weights"] = [str(w) for w in self.weights]
        return out


@dataclass(frozen=True)
class TailCertificate:
    """Rigorous bound on the mass a truncation threw away.

    ``ratio`` bounds every successive weight ratio past ``first_index``
    (its upper endpoint is < 1), so the omitted weights are dominated
    by the geometric sequence first_omitted * ratio**j.  All tail sums
    used elsewhere derive from that domination.
    """

    first_index: int
    first_omitted: Enclosure
    ratio: Enclosure
    mass: Enclosure

    def mean_tail(self) -> Enclosure:
        """Upper bound on sum n*w(n) over the omitted points."""
        bits = self.first_omitted.bits
        one = rational_to_enclosure(1, bits)
        inv = one / (one - self.ratio)
        # sum (M+j) r^j = M/(1-r) + r/(1-r)^2
        bound = self.first_omitted * (inv * self.first_index + self.ratio * inv * inv)
        return Enclosure(_MPFR_ZERO, bound.hi, bits)

    def power_tail(self, alpha: Fraction) -> Enclosure:
        """Upper bound on sum w(n)**alpha over the omitted points (alpha > 0)."""
        if alpha <= 0:
            raise DomainError("power_tail needs alpha > 0")
        bits = self.first_omitted.bits
        f_a = pow_rational(self.first_omitted, alpha)
        r_a = pow_rational(self.ratio, alpha)
        if not (r_a.hi < 1):
            raise DomainError("tail ratio does not contract under this power")
        bound = f_a / (rational_to_enclosure(1, bits) - r_a)
        return Enclosure(_MPFR_ZERO, bound.hi, bits)


@dataclass(frozen=True)
class DiscretePMF:
    """Pmf on a contiguous integer support.

    ``exact`` means all weights are Fractions summing to exactly 1.
    Otherwise weights are enclosures of the true family weights and
    ``tail`` (if set) certifies the truncated remainder, in which case
    the stored head plus the tail bound accounts for total mass 1.
    """

    support_start: int
    weights: tuple
    exact: bool
    tail: Optional[TailCertificate] = None
    family: Optional[FamilySpec] = None
    bits: Optional[int] = None
    tail_eps: Optional[Fraction] = None

    def __post_init__(self) -> None:
        if not self.weights:
            raise ConstructionError("empty support")
        if self.exact:
            if any(not isinstance(w, Fraction) for w in self.weights):
                raise ConstructionError("exact pmf needs Fraction weights")
            if any(w < 0 for w in self.weights):
                raise ConstructionError("negative weight")
            if self.weights[0] == 0 or self.weights[-1] == 0:
                raise ConstructionError("support endpoints must carry positive mass")
            if any(w == 0 for w in self.weights):
                raise ConstructionError("interior zero breaks the contiguous support")
            if sum(self.weights) != 1:
                raise ConstructionError("exact weights must sum to exactly 1")
        else:
            if any(not isinstance(w, Enclosure) for w in self.weights):
                raise ConstructionError("inexact pmf needs Enclosure weights")
            if any(w.hi < 0 for w in self.weights):
                raise ConstructionError("provably negative weight")

    @property
    def support_end(self) -> int:
        return self.support_start + len(self.weights) - 1

    def support(self) -> range:
        return range(self.support_start, self.support_end + 1)

    def weight(self, n: int):
        if not (self.support_start <= n <= self.support_end):
            return Fraction(0) if self.exact else None
        return self.weights[n - self.support_start]

    # -- exact accessors (None when weights are enclosures) -----------

    def mean_exact(self) -> Optional[Fraction]:
        if not self.exact:
            return None
        return sum((Fraction(n) * w for n, w in zip(self.support(), self.weights)), Fraction(0))

    def max_weight_exact(self) -> Optional[Fraction]:
        if not self.exact:
            return None
        return max(self.weights)

    def mass_deficit(self) -> Optional[Enclosure]:
        """Enclosure of 1 - (stored mass); None for exact pmfs."""
        if self.exact:
            return None
        if self.tail is None:
            return None
        return self.tail.mass


@dataclass(frozen=True)
class ModeSet:
    """Integers that (possibly) attain the maximum probability.

    ``certified`` is True when the set provably equals the set of
    modes: always for exact weights, and for enclosure weights only
    when a single candidate separates from all others.
    """

    values: frozenset
    certified: bool

    def __contains__(self, n: int) -> bool:
        return n in self.values

    def __iter__(self):
        return iter(sorted(self.values))

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# construction


def _exp_series_weights(lam: Fraction, start: int, end: int) -> tuple[tuple[Fraction, ...], Fraction]:
    """Exact weights proportional to lam**n/n! on start..end and their sum."""
    q = lam ** start / math.factorial(start)
    terms = [q]
    for n in range(start + 1, end + 1):
        q = q * lam / n
        terms.append(q)
    total = sum(terms)
    return tuple(t / total for t in terms), total


def _binomial_weights(m: int, p: Fraction) -> tuple[Fraction, ...]:
    one_minus = 1 - p
    return tuple(math.comb(m, n) * p**n * one_minus ** (m - n) for n in range(m + 1))


def _explicit_pmf(spec: FamilySpec) -> DiscretePMF:
    ws = list(spec.weights)
    start = spec.start or 0
    while ws and ws[0] == 0:
        ws.pop(0)
        start += 1
    while ws and ws[-1] == 0:
        ws.pop()
    if not ws:
        raise ConstructionError("explicit pmf has no positive mass")
    if any(w == 0 for w in ws):
        raise ConstructionError("interior zero breaks the contiguous support")
    total = sum(ws)
    return DiscretePMF(
        support_start=start,
        weights=tuple(w / total for w in ws),
        exact=True,
        family=spec,
    )


def _poisson_like_pmf(
    mu: Union[Fraction, Enclosure],
    bits: int,
    tail_eps: Fraction,
    zero_truncated: bool,
    family: Optional[FamilySpec],
) -> DiscretePMF:
    """Truncated Poisson-shape pmf with a geometric tail certificate.

    The truncation point is the first index M past the mode where the
    geometric domination p(n+1)/p(n) <= mu/(M+1) < 1 certifies omitted
    mass below ``tail_eps`` (the classic partial-exponential-sum tail
    bound).
    """
    if isinstance(mu, Enclosure):
        mu_enc = mu
        mu_hi = mu.hi_q
        exact_param = None
        if mu_enc.lo <= 0:
            raise ConstructionError("rate enclosure must be strictly positive")
    else:
        mu_enc = rational_to_enclosure(mu, bits)
        mu_hi = Fraction(mu)
        exact_param = Fraction(mu)
        if mu_hi <= 0:
            raise ConstructionError("rate must be positive")
    if tail_eps <= 0:
        raise ConstructionError("tail_eps must be positive")

    one = rational_to_enclosure(1, bits)
    if zero_truncated:
        denom = exp_enclosure(mu_enc) - one
        if denom.lo <= 0:
            raise ConstructionError("rate too small to separate e**lam - 1 from zero")
        prefactor = one / denom
        start = 1
    else:
        prefactor = exp_enclosure(-mu_enc)
        start = 0

    weights: list[Enclosure] = []

    if exact_param is not None:
        q = exact_param**start / math.factorial(start)
    else:
        q_enc = mu_enc.pow_int(start) * Fraction(1, math.factorial(start))

    n = start
    max_terms = 500_000
    while True:
        if exact_param is not None:
            weights.append(prefactor * rational_to_enclosure(q, bits))
            q_next = q * exact_param / (n + 1)
        else:
            weights.append(prefactor * q_enc)
            q_next = q_enc * mu_enc / Fraction(n + 1)

        m_omit = n + 1
        # geometric bound needs the ratio mu/(m_omit+1) below 1
        if Fraction(m_omit + 1) > mu_hi:
            first_omitted = (
                prefactor * rational_to_enclosure(q_next, bits)
                if exact_param is not None
                else prefactor * q_next
            )
            ratio = mu_enc / Fraction(m_omit + 1)
            bound = first_omitted / (one - ratio)
            if bound.hi_q < tail_eps:
                tail = TailCertificate(
                    first_index=m_omit,
                    first_omitted=first_omitted,
                    ratio=ratio,
                    mass=Enclosure(_MPFR_ZERO, bound.hi, bits),
                )
                break
        if exact_param is not None:
            q = q_next
        else:
            q_enc = q_next
        n += 1
        if n - start > max_terms:
            raise ConstructionError("truncation point not reached; tail_eps too small?")

    return DiscretePMF(
        support_start=start,
        weights=tuple(weights),
        exact=False,
        tail=tail,
        family=family,
        bits=bits,
        tail_eps=tail_eps,
    )


def build_pmf(
    spec: FamilySpec,
    policy: PrecisionPolicy = DEFAULT_POLICY,
    tail_eps: Optional[Rat] = None,
) -> DiscretePMF:
    """Materialize a family as a pmf.

    Binomial, the finite exponential-series family, and explicit
    weights come out exact.  Poisson and its zero-truncated variant
    are truncated at the certified point where the geometric tail
    bound drops below ``tail_eps`` (default 2**-(initial_bits/2)) and
    carry the tail certificate.
    """
    bits = policy.initial_bits
    if tail_eps is None:
        eps = Fraction(1, 2 ** (bits // 2))
    else:
        eps = Fraction(tail_eps)
        if eps <= 0:
            raise ConstructionError("tail_eps must be positive")

    if spec.kind is Family.ULTRA_LOG_AFFINE:
        ws, _ = _exp_series_weights(spec.lam, spec.start, spec.end)
        return DiscretePMF(spec.start, ws, exact=True, family=spec)
    if spec.kind is Family.BINOMIAL:
        return DiscretePMF(0, _binomial_weights(spec.m, spec.p), exact=True, family=spec)
    if spec.kind is Family.EXPLICIT:
        return _explicit_pmf(spec)
    if spec.kind is Family.POISSON:
        return _poisson_like_pmf(spec.lam, bits, eps, zero_truncated=False, family=spec)
    if spec.kind is Family.ZERO_TRUNCATED_POISSON:
        return _poisson_like_pmf(spec.lam, bits, eps, zero_truncated=True, family=spec)
    raise ConstructionError(f"unknown family {spec.kind}")


def rebuild_at(X: DiscretePMF, bits: int) -> DiscretePMF:
    """Re-derive a family-backed pmf at higher precision.

    The tail threshold tightens to min(original, 2**-(bits/2)) so a
    finer build never represents the family more loosely.  Exact pmfs
    and pmfs without provenance are returned unchanged.
    """
    if X.exact or X.family is None:
        return X
    eps = Fraction(1, 2 ** (bits // 2))
    if X.tail_eps is not None:
        eps = min(eps, X.tail_eps)
    return build_pmf(X.family, PrecisionPolicy.fixed(bits), eps)


def poisson_pmf_from_mean(
    mu: Union[Fraction, Enclosure], bits: int, tail_eps: Optional[Rat] = None
) -> DiscretePMF:
    """Truncated Poisson for a mean known exactly or only as an enclosure."""
    eps = Fraction(1, 2 ** (bits // 2)) if tail_eps is None else Fraction(tail_eps)
    fam = FamilySpec.poisson(mu) if isinstance(mu, Fraction) else None
    return _poisson_like_pmf(mu, bits, eps, zero_truncated=False, family=fam)


# ---------------------------------------------------------------------------
# structural quantities


def _weights_as_enclosures(X: DiscretePMF, bits: int) -> list[Enclosure]:
    if X.exact:
        return [rational_to_enclosure(w, bits) for w in X.weights]
    return list(X.weights)


def mean(X: DiscretePMF, bits: Optional[int] = None) -> Enclosure:
    """Enclosure of the (family) mean; tail-certified pmfs include the
    omitted part of the first-moment sum."""
    if X.exact:
        b = bits or DEFAULT_POLICY.initial_bits
        return rational_to_enclosure(X.mean_exact(), b)
    b = bits or X.bits or DEFAULT_POLICY.initial_bits
    acc = rational_to_enclosure(0, b)
    for n, w in zip(X.support(), X.weights):
        acc = acc + w * Fraction(n)
    if X.tail is not None:
        acc = acc + X.tail.mean_tail()
    return acc


def max_pmf(X: DiscretePMF, bits: Optional[int] = None) -> Enclosure:
    """Enclosure of the maximum probability; exact-width for exact pmfs."""
    if X.exact:
        b = bits or DEFAULT_POLICY.initial_bits
        return rational_to_enclosure(X.max_weight_exact(), b)
    lo = max(w.lo for w in X.weights)
    hi = max(w.hi for w in X.weights)
    if X.tail is not None and X.tail.first_omitted.hi > hi:
        hi = X.tail.first_omitted.hi
    return Enclosure(lo, hi, X.bits or DEFAULT_POLICY.initial_bits)


def modes(X: DiscretePMF) -> ModeSet:
    """All support points attaining the maximum probability.

    For enclosure weights the result lists every candidate whose
    enclosure reaches the certified maximum; ``certified`` reports
    whether a unique argmax was separated.  A tail certificate is
    honoured: candidates are only certified when the omitted weights
    provably stay below the maximum.
    """
    if X.exact:
        best = X.max_weight_exact()
        vals = frozenset(n for n, w in zip(X.support(), X.weights) if w == best)
        return ModeSet(vals, certified=True)
    best_lo = max(w.lo for w in X.weights)
    cands = frozenset(n for n, w in zip(X.support(), X.weights) if w.hi >= best_lo)
    tail_clear = X.tail is None or X.tail.first_omitted.hi < best_lo
    return ModeSet(cands, certified=len(cands) == 1 and tail_clear)


def convolve(X: DiscretePMF, Y: DiscretePMF) -> DiscretePMF:
    """Exact pmf of the sum of independent X and Y."""
    if not (X.exact and Y.exact):
        raise ConstructionError("convolution requires exact-weighted pmfs")
    nx, ny = len(X.weights), len(Y.weights)
    out = [Fraction(0)] * (nx + ny - 1)
    for i, wx in enumerate(X.weights):
        for j, wy in enumerate(Y.weights):
            out[i + j] += wx * wy
    return DiscretePMF(X.support_start + Y.support_start, tuple(out), exact=True)


# ---------------------------------------------------------------------------
# serialization


_WEIGHT_DIGITS = 40


def _enc_pair(e: Enclosure) -> list[str]:
    return [decimal_str_lo(e, _WEIGHT_DIGITS), decimal_str_hi(e, _WEIGHT_DIGITS)]


def pmf_to_json(X: DiscretePMF) -> str:
    """JSON text: exact weights as rational strings, enclosure weights
    as outward-rounded [lo, hi] decimal-string pairs."""
    obj: dict = {"support_start": X.support_start, "exact": X.exact}
    if X.exact:
        obj["weights"] = [str(w) for w in X.weights]
    else:
        obj["weights"] = [_enc_pair(w) for w in X.weights]
        obj["bits"] = X.bits
    if X.tail is not None:
        obj["tail_certificate"] = {
            "first_index": X.tail.first_index,
            "first_omitted": _enc_pair(X.tail.first_omitted),
            "ratio": _enc_pair(X.tail.ratio),
            "mass": _enc_pair(X.tail.mass),
        }
    else:
        obj["tail_certificate"] = None
    return json.dumps(obj, indent=2, sort_keys=True)


def _enc_from_pair(pair: Sequence[str], bits: int) -> Enclosure:
    return Enclosure.from_endpoints(Fraction(pair[0]), Fraction(pair[1]), bits)


def pmf_from_json(text: str) -> DiscretePMF:
    """Inverse of :func:`pmf_to_json`.

    Exact pmfs round-trip losslessly.  Enclosure pmfs come back with
    endpoints re-rounded outward from the decimal strings, so they are
    (weakly) wider but still valid; provenance is not recoverable.
    """
    obj = json.loads(text)
    start = int(obj["support_start"])
    if obj["exact"]:
        ws = tuple(Fraction(w) for w in obj["weights"])
        return DiscretePMF(start, ws, exact=True)
    bits = int(obj.get("bits") or DEFAULT_POLICY.initial_bits)
    ws = tuple(_enc_from_pair(p, bits) for p in obj["weights"])
    tail = None
    if obj.get("tail_certificate"):
        tc = obj["tail_certificate"]
        tail = TailCertificate(
            first_index=int(tc["first_index"]),
            first_omitted=_enc_from_pair(tc["first_omitted"], bits),
            ratio=_enc_from_pair(tc["ratio"], bits),
            mass=_enc_from_pair(tc["mass"], bits),
        )
    return DiscretePMF(start, ws, exact=False, tail=tail, bits=bits)
