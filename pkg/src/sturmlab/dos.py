"""Density of states: periodic approximants, exact band masses, fiber sampling.

The approximant of size ``q_n`` has exactly one eigenvalue in each order-``n``
band of type 2 or 3, so the DOS mass of a band word ``w`` of order ``n``,
truncated ``m`` levels down, is the exact rational

    #{type-2/3 descendants of w at order n+m} / q_{n+m}.

Fiber words over ``a`` are sampled as band words over ``1a`` (see
``iota_lift``) using these masses as transition weights.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.linalg import eigvalsh

from .cf import LEVY, Frequency, GaussSampler, q_of
from .coding import Letter, Word, successors
from .spectrum import BandTree, BracketingFailure, band_length, sturmian_value

__all__ = [
    "EIGEN_CAP",
    "SizeCapExceeded",
    "CountMismatch",
    "PeriodicApproximant",
    "periodic_approximant",
    "periodic_eigenvalues",
    "BandCounts",
    "band_eigen_counts",
    "DosMass",
    "dos_mass",
    "eta",
    "FiberSampler",
    "fiber_sample",
    "vartheta",
    "psi_lyapunov_estimate",
    "theta_estimate",
    "DosDimension",
    "dos_dimension",
]

EIGEN_CAP = 2000
DEFAULT_TRUNCATION = 8


class SizeCapExceeded(ValueError):
    pass


class CountMismatch(AssertionError):
    pass


def _freq(f) -> Frequency:
    return f if isinstance(f, Frequency) else Frequency.explicit(f)


# ---------------------------------------------------------------------------
# periodic approximants


@dataclass
class PeriodicApproximant:
    q: int
    potential: np.ndarray
    lam: float

    def matrix(self) -> np.ndarray:
        """Tridiagonal with unit hoppings and periodic corners."""
        q = self.q
        H = np.diag(self.potential.astype(float))
        i = np.arange(q - 1)
        H[i, i + 1] += 1.0
        H[i + 1, i] += 1.0
        H[0, q - 1] += 1.0
        H[q - 1, 0] += 1.0
        return H


def periodic_approximant(f, lam: float, n: int, cap: int = EIGEN_CAP) -> PeriodicApproximant:
    f = _freq(f)
    q = f.q(n)
    if q > cap:
        raise SizeCapExceeded(f"q_{n} = {q} exceeds the size cap {cap}")
    V = np.array([lam * sturmian_value(f, k) for k in range(1, q + 1)], dtype=float)
    return PeriodicApproximant(q, V, float(lam))


def periodic_eigenvalues(f, lam: float, n: int, cap: int = EIGEN_CAP) -> np.ndarray:
    """Sorted eigenvalues of the size-``q_n`` periodic approximant."""
    H = periodic_approximant(f, lam, n, cap).matrix()
    return np.sort(eigvalsh(H))


@dataclass
class BandCounts:
    n: int
    q: int
    counts: dict
    stray: int

    def masses(self) -> dict:
        return {w: Fraction(c, self.q) for w, c in self.counts.items()}

    @property
    def one_per_band(self) -> bool:
        return self.stray == 0 and all(c == 1 for c in self.counts.values())


def band_eigen_counts(
    tree: BandTree, eigenvalues: Sequence[float], n: int, *, check: bool = True, tol: float = 1e-9
) -> BandCounts:
    """Eigenvalues per order-``n`` type-2/3 band.

    With ``check`` a band holding other than one eigenvalue, or an
    eigenvalue outside every such band, raises ``CountMismatch``.
    """
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    bands = sorted((b for b in tree.level(n) if b.band_type in (2, 3)), key=lambda b: b.lo)
    lo = np.array([float(b.lo) for b in bands])
    hi = np.array([float(b.hi) for b in bands])
    # periodic eigenvalues sit on band edges: assign each to the nearest band
    j = np.clip(np.searchsorted(lo, ev, "right") - 1, 0, len(bands) - 1)
    dist = np.maximum(ev - hi[j], 0.0) + np.maximum(lo[j] - ev, 0.0)
    k = np.minimum(j + 1, len(bands) - 1)
    dk = np.maximum(lo[k] - ev, 0.0) + np.maximum(ev - hi[k], 0.0)
    closer = dk < dist
    j = np.where(closer, k, j)
    dist = np.where(closer, dk, dist)
    near = dist <= tol
    c = np.bincount(j[near], minlength=len(bands))
    counts = {str(b.code): int(x) for b, x in zip(bands, c)}
    hit = int(near.sum())
    res = BandCounts(n, len(ev), counts, len(ev) - hit)
    if check and not res.one_per_band:
        bad = {w: c for w, c in counts.items() if c != 1}
        raise CountMismatch(f"order {n}: {len(bad)} bands with count != 1, {res.stray} stray eigenvalues")
    return res


# ---------------------------------------------------------------------------
# exact masses


@dataclass(frozen=True)
class DosMass:
    word: Word
    numerator: int
    denominator: int
    m: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return self.numerator / self.denominator


def _tail_counts(digits: Sequence[int]) -> tuple[int, int, int]:
    """Type-2/3 end counts from a type-1/2/3 start over ``digits``."""
    v = (0, 1, 1)
    for d in reversed(digits):
        v1, v2, v3 = v
        v = (v2, (d + 1) * v1 + d * v3, d * v1 + (d - 1) * v3)
    return v


def dos_mass(f, w: Word, m: int = DEFAULT_TRUNCATION) -> DosMass:
    """Exact truncated DOS mass of the band coded by ``w``."""
    f = _freq(f)
    if w.boundary is None:
        raise ValueError("dos_mass expects a band word with a boundary symbol")
    n = w.order
    digits = f.prefix(n + m)
    if not w.is_admissible(digits[:n]):
        raise ValueError(f"{w} is not admissible for this frequency")
    num = _tail_counts(digits[n:])[w.end_type - 1]
    return DosMass(w, num, q_of(digits), m)


def eta(t: int, digits: Sequence[int], n: int) -> int:
    """Digit correction in the fiber mass law; ``digits[k]`` is ``a_{k+1}``."""
    if t == 1:
        return digits[n]
    if t == 2:
        return 1
    if t == 3:
        return 1 if digits[n] >= 2 else digits[n + 1]
    raise ValueError(f"bad type {t}")


# ---------------------------------------------------------------------------
# fiber sampling


@dataclass
class FiberSampler:
    """Sequential sampler of the fiber measure over ``frequency``.

    Paths are drawn in the band coding of ``1a`` with exact integer
    weights (type-2/3 descendant counts ``m`` levels ahead) and returned
    as fiber words over ``a``.
    """

    frequency: Frequency
    lam: float = 24.0
    m: int = DEFAULT_TRUNCATION
    seed: int = 0
    stream: int = 0
    rng: random.Random = field(init=False, repr=False)

    def __post_init__(self):
        if self.m < 6:
            raise ValueError("truncation must be >= 6")
        self.frequency = _freq(self.frequency)
        self.lifted = self.frequency.check()
        ss = np.random.SeedSequence([self.seed, self.stream])
        self.rng = random.Random(int(ss.generate_state(2, np.uint64)[0]))

    def step_weights(self, t: int | None, k: int, digits: Sequence[int]) -> list[tuple[Letter | int, int]]:
        """Exact weights of the children of a type-``t`` band of order ``k`` over ``1a``.

        ``t=None`` is the root; its children are the boundary symbols.
        """
        horizon = digits[k + 1 : k + self.m]
        v = _tail_counts(horizon)
        if t is None:
            v0 = _tail_counts(digits[: self.m])
            return [(1, v0[0]), (3, v0[2])]
        return [(e, v[e.band_type - 1]) for e in successors(t, digits[k])]

    def sample(self, depth: int) -> Word:
        """A fiber word of length ``depth``."""
        digits = self.lifted.prefix(depth + 1 + self.m)
        ch = self._pick(self.step_weights(None, 0, digits))
        w = Word((), ch)
        t = ch
        for k in range(depth + 1):
            e = self._pick(self.step_weights(t, k, digits))
            w = w.extend(e)
            t = e.band_type
        return Word(w.letters[1:])

    def lifted_word(self, fiber_word: Word) -> Word:
        from .coding import iota_lift

        return iota_lift(fiber_word)

    def _pick(self, weights):
        total = sum(c for _, c in weights)
        r = self.rng.randrange(total)
        for item, c in weights:
            if r < c:
                return item
            r -= c
        raise AssertionError("unreachable")


def fiber_sample(sampler: FiberSampler, depth: int) -> Word:
    return sampler.sample(depth)


def vartheta(e: Letter) -> int:
    """Digit weight of a letter: ``level - 1`` for type 2, else 1."""
    return e.level - 1 if e.band_type == 2 else 1


# ---------------------------------------------------------------------------
# Lyapunov exponent, theta and the DOS dimension


_PATH_CACHE: dict = {}


def _paths(n: int, samples: int, seed: int, m: int, fixed: Frequency | None, lam: float):
    """``(frequency, fiber word)`` pairs; Gauss frequencies unless ``fixed``."""
    key = (n, samples, seed, m, None if fixed is None else fixed.label(), lam)
    hit = _PATH_CACHE.get(key)
    if hit is not None:
        return hit
    gs = GaussSampler(seed, 3)
    out = []
    for i in range(samples):
        f = fixed if fixed is not None else gs.frequency(i, n + m + 2)
        fs = FiberSampler(f, lam, m, seed, 4 + i)
        out.append((f, fs.sample(n)))
    _PATH_CACHE[key] = out
    return out


def psi_value(f: Frequency, lam: float, x: Word, tree: BandTree | None = None) -> tuple[float, bool]:
    """``log |B_{iota(x)}|`` in the band tree of ``1a`` and a proxy flag."""
    from .coding import iota_lift

    w = iota_lift(x)
    if tree is None:
        tree = BandTree(f.check(), lam, w.order)
    try:
        _, lg, flag = band_length(tree, w)
    except BracketingFailure:
        _, lg, flag = band_length(tree, w.prefix(w.order - 1), proxy=True)
    return lg, flag


def psi_lyapunov_estimate(
    lam: float,
    n: int,
    samples: int,
    seed: int,
    mode: str | Frequency | Sequence[int] = "typical",
    m: int = DEFAULT_TRUNCATION,
) -> tuple[float, float, dict]:
    """Mean of ``-psi_n/n`` over sampled fiber paths, its stderr and diagnostics.

    ``mode`` is ``"typical"`` (Gauss-sampled frequencies) or a fixed frequency.
    """
    if lam < 24:
        raise ValueError("the Lyapunov estimate needs coupling >= 24")
    fixed = None if isinstance(mode, str) and mode == "typical" else _freq(mode)
    vals, flags, local = [], 0, []
    tree = None
    for f, x in _paths(n, samples, seed, m, fixed, lam):
        if fixed is not None and tree is None:
            tree = BandTree(f.check(), lam, n + 1)
        psi, flag = psi_value(f, lam, x, tree if fixed is not None else None)
        flags += flag
        vals.append(-psi / n)
        local.append(-math.log(f.q(n)) / psi)
    v = np.array(vals)
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else math.nan
    return float(v.mean()), se, {"proxy_flags": flags, "local_dimensions": local}


def theta_estimate(n: int, samples: int, seed: int, m: int = DEFAULT_TRUNCATION) -> tuple[float, float]:
    """Birkhoff average of the digit weight along sampled fiber paths."""
    gs = GaussSampler(seed, 5)
    vals = np.empty(samples)
    for i in range(samples):
        f = gs.frequency(i, n + m + 2)
        x = FiberSampler(f, 24.0, m, seed, 10**6 + i).sample(n)
        vals[i] = sum(vartheta(e) for e in x.letters) / n
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan
    return float(vals.mean()), se


@dataclass
class DosDimension:
    d: float
    bracket: tuple[float, float]
    L: float
    L_se: float
    varrho: float
    theta: float
    theta_se: float
    local: list

    def rows(self, lam, n, samples):
        yield lam, n, samples, self.L, self.L_se, self.d, self.bracket[0], self.bracket[1]


def dos_dimension(
    lam: float,
    n: int,
    samples: int,
    seed: int,
    *,
    m: int = DEFAULT_TRUNCATION,
    theta_n: int = 200,
    theta_samples: int = 4000,
    nsigma: float = 3.0,
) -> DosDimension:
    """``d = gamma/L`` and ``varrho = exp(gamma/theta)`` with ``gamma`` the Levy constant."""
    L, se, diag = psi_lyapunov_estimate(lam, n, samples, seed, "typical", m)
    th, th_se = theta_estimate(theta_n, theta_samples, seed, m)
    d = LEVY / L
    lo = LEVY / (L + nsigma * se)
    hi = LEVY / (L - nsigma * se) if L > nsigma * se else math.inf
    return DosDimension(d, (lo, hi), L, se, math.exp(LEVY / th), th, th_se, diag["local_dimensions"])
