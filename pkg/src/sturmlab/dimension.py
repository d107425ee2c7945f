"""Partition functions, pre-dimensions, relativized pressure and the cocycle exponent.

``Q(a, t, n) = log sum_w |B_w|^t`` over the order-``n`` bands.  For a single
frequency it is computed from the full band tree.  The relativized pressure
averages ``Q/n`` over Gauss-sampled frequencies; when the order-``n`` tree is
too large it is estimated by sequential importance sampling down the tree
(see ``_sis_sample``), with the same random paths reused for every ``t`` so
each estimated curve is exactly convex and decreasing in ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .cf import LEVY, KHINCHIN, Frequency, GaussSampler
from .coding import Word, successors
from .spectrum import BandTree, WINDOW_MIN_LAMBDA

__all__ = [
    "PressureCurve",
    "DimensionEstimate",
    "PreDimension",
    "RhoEstimate",
    "BudgetExceeded",
    "RootNotBracketed",
    "level_logs",
    "partition_log",
    "solve_sn",
    "pre_dimension",
    "relativized_pressure",
    "pressure_curve",
    "solve_D",
    "cocycle_matrix",
    "phi_estimate",
    "rho_estimate",
    "dimension_envelope",
]

SN_BRACKET = (-1.0, 1.5)
DEFAULT_BUDGET = 20000
DEFAULT_PATHS = 32
PROPOSAL_T = 0.6
PATH_BITS = 4096


class BudgetExceeded(RuntimeError):
    pass


class RootNotBracketed(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# deterministic partition functions


def level_logs(tree: BandTree, n: int) -> np.ndarray:
    """Log lengths of all order-``n`` bands."""
    return np.array([b.length_log for b in tree.level(n)])


def _tree(f, lam, n, tree):
    if tree is not None:
        if tree.depth < n:
            raise ValueError(f"tree depth {tree.depth} < {n}")
        return tree
    return BandTree(f, lam, n)


def partition_log(f: Frequency | Sequence[int], lam, t: float, n: int, tree: BandTree | None = None) -> float:
    """``log sum_{w in Omega_n} |B_w|^t`` in log space."""
    logs = level_logs(_tree(f, lam, n, tree), n)
    return float(logsumexp(t * logs))


def _root_in_t(logs: np.ndarray, lo: float, hi: float, tol: float = 1e-10) -> float:
    g = lambda t: float(logsumexp(t * logs))
    glo, ghi = g(lo), g(hi)
    # bands longer than 1 (order 0) make g increasing; any sign change will do
    if not glo * ghi < 0:
        raise RootNotBracketed(f"Q({lo}) = {glo}, Q({hi}) = {ghi}")
    return brentq(g, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps)


def solve_sn(f: Frequency | Sequence[int], lam, n: int, tree: BandTree | None = None) -> float:
    """Root ``s_n`` of ``sum |B_w|^s = 1`` over order-``n`` bands."""
    logs = level_logs(_tree(f, lam, n, tree), n)
    return _root_in_t(logs, *SN_BRACKET)


@dataclass
class PreDimension:
    lower: float
    upper: float
    window: tuple[int, int]
    s: dict


def pre_dimension(
    f: Frequency | Sequence[int],
    lam,
    window: tuple[int, int] | None = None,
    depth: int | None = None,
    tree: BandTree | None = None,
) -> PreDimension:
    """Min and max of ``s_n`` over a disclosed window of orders."""
    if window is None:
        if depth is None:
            raise ValueError("give a window or a depth")
        window = (max(4, depth - 4), depth)
    n0, n1 = window
    if n0 > n1:
        raise ValueError("empty window")
    tree = _tree(f, lam, n1, tree)
    s = {n: solve_sn(f, lam, n, tree) for n in range(n0, n1 + 1)}
    return PreDimension(min(s.values()), max(s.values()), (n0, n1), s)


# ---------------------------------------------------------------------------
# relativized pressure


@dataclass
class _Sample:
    log_count: float
    logw: np.ndarray
    ell: np.ndarray
    exact: bool
    digits: tuple[int, ...]

    def Q(self, t: float) -> float:
        return float(logsumexp(self.logw + t * self.ell) - logsumexp(self.logw) + self.log_count)


def _completions(digits: Sequence[int], n: int) -> list[tuple[int, int, int]]:
    """``C[k][t-1]`` = number of order-``n`` descendants of a type-``t`` band of order ``k``."""
    C = [(1, 1, 1)] * (n + 1)
    for k in range(n - 1, -1, -1):
        a = digits[k]
        c1, c2, c3 = C[k + 1]
        C[k] = (c2, (a + 1) * c1 + a * c3, a * c1 + (a - 1) * c3)
    return C


def _son_ratio(parent_type: int, e) -> float:
    """Predicted child/parent length ratio ``sin^2(l pi/p)/p`` (type-2 children: 1)."""
    t, l, a = e
    if t == 2:
        return 1.0
    if parent_type == 2:
        p = a + 2 if t == 1 else a + 1
    else:
        p = a + 1 if t == 1 else a
    return math.sin(l * math.pi / p) ** 2 / p


def _sis_sample(f: Frequency, lam, n: int, paths: int, rng: np.random.Generator, budget: int, t0: float) -> _Sample:
    """Importance-sampled leaves of the order-``n`` tree.

    A path picks child ``c`` with probability proportional to
    ``N_c * r_c**t0``, where ``N_c`` is the exact number of order-``n``
    descendants of ``c`` and ``r_c`` the predicted son/father length ratio.
    Only the chosen child is solved for.  ``logw`` is minus the log path
    probability, so ``sum exp(logw) / paths`` estimates ``#Omega_n``.
    """
    digits = f.prefix(n)
    C = _completions(digits, n)
    total = C[0][0] + C[0][2]
    log_count = math.log(total)
    tree = BandTree(f, lam, n)
    if total <= budget:
        ell = level_logs(tree, n)
        return _Sample(log_count, np.zeros(len(ell)), ell, True, digits)
    # very large digits force very high working precision; fewer paths there
    paths = paths if tree.bits <= PATH_BITS else max(2, paths * PATH_BITS // tree.bits)
    logw = np.empty(paths)
    ell = np.empty(paths)
    root = [(Word((), 3), 3, math.log(C[0][2])), (Word((), 1), 1, math.log(C[0][0]))]
    for i in range(paths):
        lw = 0.0
        w = np.array([lc for _, _, lc in root])
        lse = float(logsumexp(w))
        j = int(rng.choice(2, p=_normalize(np.exp(w - lse))))
        lw += lse - w[j]
        word, t = root[j][0], root[j][1]
        for k in range(n):
            kids = successors(t, digits[k])
            w = np.array([math.log(C[k + 1][e.band_type - 1]) + t0 * math.log(_son_ratio(t, e)) for e in kids])
            lse = float(logsumexp(w))
            j = int(rng.choice(len(kids), p=_normalize(np.exp(w - lse))))
            lw += lse - w[j]
            word = word.extend(kids[j])
            t = kids[j].band_type
        logw[i] = lw
        ell[i] = tree.band(word).length_log
    return _Sample(log_count, logw, ell, False, digits)


def _normalize(p: np.ndarray) -> np.ndarray:
    return p / p.sum()


_SIS_CACHE: dict = {}


def _samples(lam, n, samples, seed, paths, budget, t0) -> list[_Sample]:
    key = (float(lam), n, samples, seed, paths, budget, t0)
    hit = _SIS_CACHE.get(key)
    if hit is not None:
        return hit
    gs = GaussSampler(seed, 0)
    out = []
    for i in range(samples):
        f = gs.frequency(i, n)
        rng = np.random.default_rng(np.random.SeedSequence([seed, 1, i]))
        out.append(_sis_sample(f, lam, n, paths, rng, budget, t0))
    _SIS_CACHE[key] = out
    return out


def _check_lambda(lam):
    if float(lam) < WINDOW_MIN_LAMBDA:
        raise ValueError("pressure estimates need coupling >= 24")


def relativized_pressure(
    lam,
    t: float,
    n: int,
    samples: int,
    seed: int,
    *,
    paths: int = DEFAULT_PATHS,
    budget: int = DEFAULT_BUDGET,
    t0: float = PROPOSAL_T,
) -> tuple[float, float]:
    """Monte-Carlo mean of ``Q(a, lam, t, n)/n`` over Gauss frequencies, with its stderr."""
    _check_lambda(lam)
    vals = np.array([s.Q(t) / n for s in _samples(lam, n, samples, seed, paths, budget, t0)])
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    return float(vals.mean()), se


@dataclass
class PressureCurve:
    t_grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    n: int
    mode: str
    lam: float
    samples: int = 0
    seed: int | None = None

    def decreasing(self, slack: float = 0.0) -> bool:
        """Slope at most ``-log 2`` between grid points, up to ``slack`` stderrs."""
        t, v, s = self.t_grid, self.values, self.stderr
        ok = True
        for i in range(len(t) - 1):
            for j in range(i + 1, len(t)):
                bound = (t[i] - t[j]) * math.log(2) + slack * (s[i] + s[j])
                ok &= bool(v[j] - v[i] <= bound)
        return ok

    def convex(self, slack: float = 0.0) -> bool:
        t, v, s = self.t_grid, self.values, self.stderr
        for i in range(1, len(t) - 1):
            w = (t[i] - t[i - 1]) / (t[i + 1] - t[i - 1])
            chord = (1 - w) * v[i - 1] + w * v[i + 1]
            if v[i] > chord + slack * s[i]:
                return False
        return True

    def rows(self):
        for t, v, s in zip(self.t_grid, self.values, self.stderr):
            yield self.lam, float(t), self.n, self.samples, float(v), float(s)


def pressure_curve(
    lam,
    t_grid: Sequence[float],
    n: int,
    samples: int,
    seed: int,
    *,
    paths: int = DEFAULT_PATHS,
    budget: int = DEFAULT_BUDGET,
    t0: float = PROPOSAL_T,
) -> PressureCurve:
    _check_lambda(lam)
    data = _samples(lam, n, samples, seed, paths, budget, t0)
    vals, errs = [], []
    for t in t_grid:
        v = np.array([s.Q(t) / n for s in data])
        vals.append(v.mean())
        errs.append(v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else math.nan)
    return PressureCurve(np.asarray(t_grid, float), np.array(vals), np.array(errs), n, "relativized", float(lam), samples, seed)


@dataclass
class DimensionEstimate:
    value: float
    bracket: tuple[float, float]
    method: str
    diagnostics: dict = field(default_factory=dict)


def solve_D(
    lam,
    n: int,
    samples: int,
    seed: int,
    *,
    paths: int = DEFAULT_PATHS,
    budget: int = DEFAULT_BUDGET,
    t0: float = PROPOSAL_T,
    nsigma: float = 3.0,
) -> DimensionEstimate:
    """Zero of the estimated relativized pressure on (0, 1)."""
    _check_lambda(lam)
    data = _samples(lam, n, samples, seed, paths, budget, t0)

    def stats(t):
        v = np.array([s.Q(t) / n for s in data])
        return v.mean(), (v.std(ddof=1) / math.sqrt(len(v)) if len(v) > 1 else 0.0)

    p0, s0 = stats(0.0)
    p1, s1 = stats(1.0)
    if p1 >= -nsigma * s1 or p0 <= 0:
        raise RootNotBracketed(f"P(0) = {p0:.4g}, P(1) = {p1:.4g} +- {s1:.2g}")
    D = brentq(lambda t: stats(t)[0], 0.0, 1.0, xtol=1e-10)

    def shifted(k):
        g = lambda t: stats(t)[0] + k * stats(t)[1]
        if g(0.0) <= 0:
            return 0.0
        if g(1.0) >= 0:
            return 1.0
        return brentq(g, 0.0, 1.0, xtol=1e-8)

    lo, hi = shifted(-nsigma), shifted(nsigma)
    exact = sum(1 for s in data if s.exact)
    return DimensionEstimate(
        D,
        (lo, hi),
        "pressure zero",
        {"lambda": float(lam), "n": n, "samples": samples, "seed": seed, "paths": paths, "exact_trees": exact, "P0": p0, "P0_se": s0},
    )


# ---------------------------------------------------------------------------
# the Lyapunov cocycle


def cocycle_matrix(k: int, x: float) -> np.ndarray:
    """``R_k(x)``."""
    return np.array([[0.0, x ** (k - 1), 0.0], [(k + 1) * x, 0.0, k * x], [k * x, 0.0, (k - 1) * x]])


_DIGIT_CACHE: dict = {}


def _digit_matrix(n: int, samples: int, seed: int) -> np.ndarray:
    key = (n, samples, seed)
    hit = _DIGIT_CACHE.get(key)
    if hit is None:
        gs = GaussSampler(seed, 2)
        hit = np.array([[float(d) for d in gs.frequency(i, n).prefix(n)] for i in range(samples)])
        _DIGIT_CACHE[key] = hit
    return hit


def _log_norms(x: float, digits: np.ndarray, renorm: int = 32) -> np.ndarray:
    S, n = digits.shape
    P = np.broadcast_to(np.eye(3), (S, 3, 3)).copy()
    acc = np.zeros(S)
    R = np.zeros((S, 3, 3))
    with np.errstate(under="ignore", over="ignore"):
        for j in range(n):
            k = digits[:, j]
            R[:, 0, 1] = np.power(x, k - 1)
            R[:, 1, 0] = (k + 1) * x
            R[:, 1, 2] = k * x
            R[:, 2, 0] = k * x
            R[:, 2, 2] = (k - 1) * x
            P = P @ R
            if (j + 1) % renorm == 0 or j == n - 1 or np.abs(P).max() > 1e150:
                m = np.abs(P).max(axis=(1, 2))
                m[m == 0] = 1.0
                P /= m[:, None, None]
                acc += np.log(m)
    sv = np.linalg.norm(P, ord=2, axis=(1, 2))
    with np.errstate(divide="ignore"):
        return acc + np.log(sv)


def phi_estimate(x: float, n: int, samples: int, seed: int) -> tuple[float, float]:
    """Mean of ``log ||R_{a_1}(x) ... R_{a_n}(x)|| / n`` over Gauss digit strings."""
    if not 0 <= x <= 1:
        raise ValueError("x must lie in [0, 1]")
    if x == 0:
        return -math.inf, 0.0
    v = _log_norms(x, _digit_matrix(n, samples, seed)) / n
    if not np.all(np.isfinite(v)):
        return -math.inf, 0.0
    se = float(v.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan
    return float(v.mean()), se


@dataclass
class RhoEstimate:
    rho: float
    bracket: tuple[float, float]
    x: float
    x_bracket: tuple[float, float]


def rho_estimate(n: int, samples: int, seed: int, tol: float = 1e-6, nsigma: float = 3.0) -> RhoEstimate:
    """``1/x`` at the sign change of the estimated ``phi``."""

    def root(k):
        g = lambda x: (lambda m, s: m + k * s)(*phi_estimate(x, n, samples, seed))
        lo, hi = 1e-3, 1.0
        if g(hi) <= 0:
            return 1.0
        while g(lo) >= 0:
            lo /= 4
        return brentq(g, lo, hi, xtol=tol)

    x = root(0.0)
    xl, xh = root(nsigma), root(-nsigma)
    return RhoEstimate(1 / x, (1 / xh, 1 / xl), x, (xl, xh))


def dimension_envelope(lam: float, rho: float) -> tuple[float, float]:
    """Analytic bounds on the almost-sure dimension in terms of ``rho``."""
    lr = math.log(rho)
    lower = lr / (6 * math.log(4 * KHINCHIN**2) + math.log(2 * (lam + 5)))
    upper = lr / math.log((lam - 8) / 3)
    return lower, upper
