"""Continued fractions, convergents and Gauss-measure sampling of frequencies.

A frequency is an irrational ``alpha = [a_1, a_2, ...]`` in (0, 1) stored
through its digit stream.  Three sources are supported: an explicit finite
prefix, an eventually periodic pattern (kept symbolically, so arbitrarily
deep prefixes are free), and a Gauss-distributed sample whose digits are
certified lazily from a seeded random bit stream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import gmpy2
import numpy as np

__all__ = [
    "LEVY",
    "KHINCHIN",
    "PrecisionExhausted",
    "Frequency",
    "ConvergentTable",
    "GaussSampler",
    "LevyKhinchinEstimate",
    "cf_expand",
    "convergents",
    "gauss_sample_frequency",
    "levy_khinchin_estimate",
    "gauss_cylinder_logmass",
    "sturmian_word",
    "digits_for_sites",
    "q_of",
]

#: Almost sure growth rate of ``log q_n / n``.
LEVY = math.pi**2 / (12.0 * math.log(2.0))
#: Almost sure geometric mean of the digits.
KHINCHIN = 2.6854520010653064

_MAX_BITS = 1 << 22


class PrecisionExhausted(ArithmeticError):
    """Raised when no working precision up to the cap certifies the digits."""


# ---------------------------------------------------------------------------
# exact digit extraction


def _common_digits(lo: Fraction, hi: Fraction, limit: int) -> list[int]:
    """Digits shared by every point of ``[lo, hi]`` (both in (0, 1)).

    Euclid runs on both endpoints in lockstep.  A digit counts only if
    neither expansion has terminated at that step, so the whole closed
    interval sits inside the corresponding cylinder.
    """
    a_num, a_den = lo.numerator, lo.denominator
    b_num, b_den = hi.numerator, hi.denominator
    out: list[int] = []
    while len(out) < limit and a_num and b_num:
        da, ra = divmod(a_den, a_num)
        db, rb = divmod(b_den, b_num)
        if da != db or ra == 0 or rb == 0:
            break
        out.append(int(da))
        a_num, a_den = ra, a_num
        b_num, b_den = rb, b_num
    return out


def _exact_digits(x: Fraction, limit: int) -> list[int]:
    num, den = x.numerator, x.denominator
    out: list[int] = []
    while len(out) < limit and num:
        d, r = divmod(den, num)
        out.append(int(d))
        num, den = r, num
    return out


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(*v.as_integer_ratio())
    if isinstance(v, type(gmpy2.mpfr(0))):
        return Fraction(*v.as_integer_ratio())
    if hasattr(v, "_mpf_"):
        sign, man, exp, _ = v._mpf_
        man = -int(man) if sign else int(man)
        return Fraction(man) * Fraction(2) ** int(exp)
    return Fraction(v)


def _mpi_endpoints(v) -> tuple[Fraction, Fraction]:
    out = []
    for sign, man, exp, _ in v._mpi_:
        man = -int(man) if sign else int(man)
        out.append(Fraction(man) * Fraction(2) ** int(exp))
    return out[0], out[1]


def cf_expand(x, n: int, *, max_bits: int = _MAX_BITS) -> list[int]:
    """Return the first ``n`` continued-fraction digits of ``x`` in (0, 1).

    ``x`` may be an exact number (int ratio, ``Fraction``, float, mpfr or
    mpf; its exact binary value is expanded), an mpmath interval (fixed
    enclosure), or a callable ``bits -> (lo, hi)`` returning a rational
    enclosure at the requested precision.  Callables start at
    ``ceil(3.5 n) + 64`` bits and double until all ``n`` digits are
    certified.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return []
    if callable(x):
        bits = math.ceil(3.5 * n) + 64
        while bits <= max_bits:
            lo, hi = x(bits)
            lo, hi = _as_fraction(lo), _as_fraction(hi)
            if hi <= 0 or lo >= 1:
                raise ValueError("x must lie in (0, 1)")
            if lo > 0 and hi < 1:
                digits = _common_digits(lo, hi, n)
                if len(digits) >= n:
                    return digits
            bits *= 2
        raise PrecisionExhausted(f"could not certify {n} digits below {max_bits} bits")
    if hasattr(x, "_mpi_"):
        lo, hi = _mpi_endpoints(x)
        if hi <= 0 or lo >= 1:
            raise ValueError("x must lie in (0, 1)")
        digits = _common_digits(lo, hi, n) if lo > 0 and hi < 1 else []
        if len(digits) < n:
            raise PrecisionExhausted(f"enclosure certifies only {len(digits)} of {n} digits")
        return digits
    value = _as_fraction(x)
    if not 0 < value < 1:
        raise ValueError("x must lie in (0, 1)")
    digits = _exact_digits(value, n)
    if len(digits) < n:
        raise ValueError(f"{value} is rational with only {len(digits)} digits")
    return digits


# ---------------------------------------------------------------------------
# convergents


@dataclass(frozen=True)
class ConvergentTable:
    """Numerators and denominators ``p_k, q_k`` for ``k = -1..n``."""

    p_list: tuple[int, ...]
    q_list: tuple[int, ...]

    @property
    def depth(self) -> int:
        return len(self.q_list) - 2

    def p(self, k: int) -> int:
        return self.p_list[k + 1]

    def q(self, k: int) -> int:
        return self.q_list[k + 1]

    def ratio(self, k: int) -> Fraction:
        return Fraction(self.p(k), self.q(k))


def _convergents_of(digits: Sequence[int]) -> ConvergentTable:
    p = [1, 0]
    q = [0, 1]
    for a in digits:
        p.append(a * p[-1] + p[-2])
        q.append(a * q[-1] + q[-2])
    return ConvergentTable(tuple(p), tuple(q))


def q_of(digits: Sequence[int]) -> int:
    """Denominator ``q_n`` of the finite word ``digits``."""
    q0, q1 = 0, 1
    for a in digits:
        q0, q1 = q1, a * q1 + q0
    return q1


def convergents(f: "Frequency | Sequence[int]", n: int) -> ConvergentTable:
    """Convergent table of depth ``n`` for a frequency or digit list."""
    digits = f.prefix(n) if isinstance(f, Frequency) else tuple(f)
    if len(digits) < n:
        raise ValueError(f"need {n} digits, have {len(digits)}")
    return _convergents_of(digits[:n])


def gauss_cylinder_logmass(digits: Sequence[int]) -> float:
    """Natural log of the Gauss measure of the cylinder ``[a_1 ... a_n]``."""
    if not digits:
        return 0.0
    t = _convergents_of(digits)
    n = len(digits)
    x1 = Fraction(t.p(n), t.q(n))
    x2 = Fraction(t.p(n) + t.p(n - 1), t.q(n) + t.q(n - 1))
    rel = abs(x2 - x1) / (1 + min(x1, x2))
    if rel > Fraction(1, 1 << 40):
        return math.log(math.log1p(float(rel)) / math.log(2.0))
    # log1p(r) = r (1 - r/2 + ...) with r tiny
    lr = math.log(rel.numerator) - math.log(rel.denominator)
    return lr + math.log1p(-float(rel) / 2) - math.log(math.log(2.0))


# ---------------------------------------------------------------------------
# frequencies


def _u_enclosure_bits(seed: int, stream_id: int, index: int, chunks: int) -> int:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream_id, index])))
    raw = rng.bit_generator.random_raw(chunks)
    k = 0
    for word in raw:
        k = (k << 64) | int(word)
    return k


def _gauss_enclosure(seed: int, stream_id: int, index: int, bits: int) -> tuple[Fraction, Fraction]:
    """Outward-rounded enclosure of ``2**U - 1`` with ``U`` truncated to ``bits``."""
    chunks = max(1, math.ceil(bits / 64))
    nbits = 64 * chunks
    k = _u_enclosure_bits(seed, stream_id, index, chunks)
    prec = nbits + 64
    with gmpy2.context(precision=prec, round=gmpy2.RoundDown):
        lo = gmpy2.exp2(gmpy2.mpfr(k) / gmpy2.mpfr(2) ** nbits) - 1
    with gmpy2.context(precision=prec, round=gmpy2.RoundUp):
        hi = gmpy2.exp2(gmpy2.mpfr(k + 1) / gmpy2.mpfr(2) ** nbits) - 1
    return Fraction(*lo.as_integer_ratio()), Fraction(*hi.as_integer_ratio())


@dataclass(frozen=True)
class Frequency:
    """Digit stream ``a = a_1 a_2 ...`` of an irrational frequency.

    ``digits`` is the stored prefix.  ``periodic_tail`` repeats forever
    after it.  Sampled frequencies (``seed`` set) extend their prefix on
    demand from the same random stream, so prefixes never change.
    """

    digits: tuple[int, ...]
    periodic_tail: tuple[int, ...] | None = None
    seed: int | None = None
    stream_id: int = 0
    index: int = 0
    precision_bits: int = 0
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        if self.periodic_tail is not None:
            object.__setattr__(self, "periodic_tail", tuple(int(d) for d in self.periodic_tail))
            if not self.periodic_tail:
                raise ValueError("periodic tail must be non-empty")
            if self.seed is not None:
                raise ValueError("a sampled frequency cannot carry a periodic tail")
        for d in self.digits + (self.periodic_tail or ()):
            if d < 1:
                raise ValueError(f"digits must be positive integers, got {d}")

    # constructors -----------------------------------------------------

    @classmethod
    def explicit(cls, digits: Sequence[int]) -> "Frequency":
        return cls(tuple(digits))

    @classmethod
    def periodic(cls, tail: Sequence[int], prefix: Sequence[int] = ()) -> "Frequency":
        return cls(tuple(prefix), tuple(tail))

    @classmethod
    def parse(cls, text: str) -> "Frequency":
        """Parse ``"1,periodic"``, ``"2,1,periodic"``, ``"3,1,4"`` or ``"seed:7[:stream[:index]]"``.

        In the periodic form every listed digit belongs to the repeating
        block; ``"1,2;3,periodic"`` keeps ``1,2`` as a prefix before it.
        """
        text = text.strip()
        if text.startswith("seed:"):
            parts = [int(p) for p in text[5:].split(":")]
            seed, stream, index = (parts + [0, 0])[:3]
            return GaussSampler(seed, stream).frequency(index, 1)
        items = [s.strip() for s in text.split(",") if s.strip()]
        if items and items[-1] == "periodic":
            body = ",".join(items[:-1])
            if ";" in body:
                pre, tail = body.split(";")
                return cls.periodic([int(s) for s in tail.split(",") if s], [int(s) for s in pre.split(",") if s])
            return cls.periodic([int(s) for s in items[:-1]])
        return cls.explicit([int(s) for s in items])

    # digit access -------------------------------------------------------

    @property
    def source(self) -> str:
        if self.seed is not None:
            return "sampled"
        if self.periodic_tail is not None:
            return "periodic"
        return "explicit"

    @property
    def is_infinite(self) -> bool:
        return self.seed is not None or self.periodic_tail is not None

    def available(self) -> float:
        return math.inf if self.is_infinite else len(self.digits)

    def _sampled(self, n: int) -> tuple[int, ...]:
        have = self._cache.get("digits", self.digits)
        if len(have) >= n:
            return have
        target = max(n, 2 * len(have))
        digits = cf_expand(
            lambda bits: _gauss_enclosure(self.seed, self.stream_id, self.index, bits), target
        )
        if tuple(digits[: len(self.digits)]) != self.digits:
            raise AssertionError("sampled digit stream is not prefix-consistent")
        self._cache["digits"] = tuple(digits)
        return self._cache["digits"]

    def prefix(self, n: int) -> tuple[int, ...]:
        """First ``n`` digits."""
        if n <= len(self.digits):
            return self.digits[:n]
        if self.periodic_tail is not None:
            tail = self.periodic_tail
            extra = n - len(self.digits)
            reps = -(-extra // len(tail))
            return self.digits + (tail * reps)[:extra]
        if self.seed is not None:
            return self._sampled(n)[:n]
        raise IndexError(f"frequency has only {len(self.digits)} digits, {n} requested")

    def digit(self, i: int) -> int:
        """Digit ``a_i`` (1-indexed)."""
        if i < 1:
            raise IndexError("digits are 1-indexed")
        return self.prefix(i)[i - 1]

    def __iter__(self) -> Iterator[int]:
        i = 1
        while i <= self.available():
            yield self.digit(i)
            i += 1

    # derived frequencies --------------------------------------------------

    def shift(self, n: int) -> "Frequency":
        """Shifted stream ``a_{n+1} a_{n+2} ...``."""
        if n == 0:
            return self
        if self.periodic_tail is not None:
            if n <= len(self.digits):
                return Frequency(self.digits[n:], self.periodic_tail)
            k = (n - len(self.digits)) % len(self.periodic_tail)
            return Frequency((), self.periodic_tail[k:] + self.periodic_tail[:k])
        if self.seed is not None:
            return Frequency(self.prefix(n + 32)[n:])
        return Frequency(self.digits[n:])

    def check(self) -> "Frequency":
        """The stream ``1 a_1 a_2 ...`` obtained by prepending the digit 1."""
        if self.periodic_tail is not None:
            return Frequency((1,) + self.digits, self.periodic_tail)
        if self.seed is not None:
            return _Prepended(self)
        return Frequency((1,) + self.digits)

    def convergents(self, n: int) -> ConvergentTable:
        return convergents(self, n)

    def q(self, n: int) -> int:
        return q_of(self.prefix(n))

    def enclosure(self, n: int) -> tuple[Fraction, Fraction]:
        """Closed cylinder of depth ``n`` containing ``alpha``."""
        t = self.convergents(n)
        x1 = t.ratio(n)
        x2 = Fraction(t.p(n) + t.p(n - 1), t.q(n) + t.q(n - 1))
        return (x1, x2) if x1 < x2 else (x2, x1)

    def value(self, n: int = 60) -> float:
        lo, hi = self.enclosure(n)
        return float((lo + hi) / 2)

    # serialization ------------------------------------------------------

    def to_json(self, n: int | None = None) -> str:
        obj = {
            "digits": list(self.digits if n is None else self.prefix(n)),
            "periodic_tail": list(self.periodic_tail) if self.periodic_tail is not None else None,
            "seed": self.seed,
        }
        if self.seed is not None:
            obj["stream"] = [self.stream_id, self.index]
        return json.dumps(obj)

    @classmethod
    def from_json(cls, text: str) -> "Frequency":
        obj = json.loads(text)
        tail = obj.get("periodic_tail")
        if obj.get("seed") is not None:
            stream, index = obj.get("stream", [0, 0])
            f = cls(tuple(obj["digits"]), None, int(obj["seed"]), int(stream), int(index))
            return f
        return cls(tuple(obj["digits"]), tuple(tail) if tail is not None else None)

    def label(self, n: int = 8) -> str:
        if self.periodic_tail is not None:
            pre = ",".join(map(str, self.digits))
            tail = ",".join(map(str, self.periodic_tail))
            return f"{pre};{tail},periodic" if pre else f"{tail},periodic"
        if self.seed is not None:
            return f"seed:{self.seed}:{self.stream_id}:{self.index}"
        return ",".join(map(str, self.digits))


class _Prepended(Frequency):
    """``1 a`` for a sampled ``a``; digits delegate to the base stream."""

    def __init__(self, base: Frequency):
        super().__init__((1,) + base.digits[:0])
        object.__setattr__(self, "_base", base)

    @property
    def is_infinite(self) -> bool:
        return True

    @property
    def source(self) -> str:
        return "sampled"

    def prefix(self, n: int) -> tuple[int, ...]:
        if n <= 0:
            return ()
        return (1,) + self._base.prefix(n - 1)

    def shift(self, n: int) -> Frequency:
        if n == 0:
            return self
        return self._base.shift(n - 1)

    def label(self, n: int = 8) -> str:
        return "1;" + self._base.label(n)


# ---------------------------------------------------------------------------
# Gauss sampling


@dataclass(frozen=True)
class GaussSampler:
    """Seeded source of Gauss-distributed frequencies.

    Sample ``i`` draws ``U`` from ``SeedSequence([seed, stream_id, i])``,
    so samples are independent of evaluation order and thread layout.
    """

    seed: int
    stream_id: int = 0

    def frequency(self, index: int, depth: int) -> Frequency:
        """Sample ``index``: ``alpha = 2**U - 1`` certified to ``depth`` digits."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        digits = cf_expand(
            lambda bits: _gauss_enclosure(self.seed, self.stream_id, index, bits), depth
        )
        bits = math.ceil(3.5 * depth) + 64
        return Frequency(tuple(digits), None, self.seed, self.stream_id, index, bits)

    def frequencies(self, count: int, depth: int, start: int = 0) -> list[Frequency]:
        return [self.frequency(i, depth) for i in range(start, start + count)]


def gauss_sample_frequency(s: GaussSampler, depth: int, index: int = 0) -> Frequency:
    """Gauss-distributed frequency with ``depth`` certified digits."""
    return s.frequency(index, depth)


@dataclass(frozen=True)
class LevyKhinchinEstimate:
    gamma: float
    kappa: float
    gamma_se: float
    kappa_se: float
    samples: int
    depth: int


def levy_khinchin_estimate(s: GaussSampler, samples: int, depth: int) -> LevyKhinchinEstimate:
    """Monte-Carlo means of ``log q_n / n`` and ``(a_1 ... a_n)^(1/n)``."""
    if samples < 1 or depth < 1:
        raise ValueError("samples and depth must be positive")
    g = np.empty(samples)
    k = np.empty(samples)
    for i in range(samples):
        digits = s.frequency(i, depth).prefix(depth)
        g[i] = math.log(q_of(digits)) / depth
        k[i] = math.exp(math.fsum(math.log(a) for a in digits) / depth)
    se = (lambda v: float(v.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan)
    return LevyKhinchinEstimate(float(g.mean()), float(k.mean()), se(g), se(k), samples, depth)


# ---------------------------------------------------------------------------
# Sturmian sequence


def sturmian_word(digits: Sequence[int], length: int) -> list[int]:
    """``S_1 .. S_length`` with ``S_k = floor((k+1) alpha) - floor(k alpha)``.

    Evaluated exactly at an interior rational of the cylinder fixed by
    ``digits``; the prefix must satisfy ``q_n >= length``.
    """
    t = _convergents_of(digits)
    n = len(digits)
    if t.q(n) < length:
        raise ValueError(f"q_{n} = {t.q(n)} < {length}: need more digits")
    num = 2 * t.p(n) + t.p(n - 1)
    den = 2 * t.q(n) + t.q(n - 1)
    return [((k + 1) * num) // den - (k * num) // den for k in range(1, length + 1)]


def digits_for_sites(f: Frequency, k: int) -> tuple[int, ...]:
    """Shortest prefix of ``f`` with ``q_n >= k``."""
    q0, q1 = 0, 1
    n = 0
    while q1 < k:
        n += 1
        q0, q1 = q1, f.digit(n) * q1 + q0
    return f.prefix(max(n, 1))


NumberSource = Callable[[int], tuple[Fraction, Fraction]]
