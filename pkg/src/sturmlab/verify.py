"""Verification suites: machine-readable pass/fail checks with measured constants."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

from .cf import KHINCHIN, LEVY, Frequency, GaussSampler, levy_khinchin_estimate, q_of
from .coding import admissible, alphabet, count_words
from .spectrum import BandTree, chebyshev_family, gap_ratio_check

SUITES = ("cf", "coding", "covering", "chebyshev", "gaps", "pressure", "dos")


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "check": self.name, "passed": bool(self.passed), "measured": self.measured}


@dataclass
class SuiteConfig:
    freq: Frequency | None = None
    lam: float = 24.0
    depth: int | None = None
    samples: int | None = None
    seed: int = 7
    truncation: int = 8


# ---------------------------------------------------------------------------
# oracles


def brute_force_counts(max_len: int = 5, max_digit: int = 4) -> dict:
    """``{(start, digits): (c1, c2, c3)}`` by depth-first search over the full alphabet.

    ``start`` is 1, 2, 3 (bare type), "boundary" or "fiber".  Every letter
    of each level is tried against ``admissible``; nothing is derived from
    the successor lists or the count matrices.
    """
    out: dict = {}

    def dfs(start, prev, digits):
        if digits:
            c = out.setdefault((start, digits), [0, 0, 0])
            c[prev.band_type - 1] += 1
        if len(digits) == max_len:
            return
        for d in range(1, max_digit + 1):
            for e in alphabet(d):
                if prev is None or admissible(prev, e):
                    dfs(start, e, digits + (d,))

    for t in (1, 2, 3):
        dfs(t, t, ())
    dfs("fiber", None, ())
    res = {k: tuple(v) for k, v in out.items()}
    grid = itertools.chain.from_iterable(itertools.product(range(1, max_digit + 1), repeat=k) for k in range(1, max_len + 1))
    for d in grid:
        u, v = res.get((1, d), (0, 0, 0)), res.get((3, d), (0, 0, 0))
        res[("boundary", d)] = tuple(x + y for x, y in zip(u, v))
    return res


def q_product_inequalities(max_len: int = 6, max_digit: int = 4) -> tuple[bool, int]:
    """``q_n(a) q_m(S^n a) <= q_{n+m}(a) <= 2 q_n(a) q_m(S^n a)`` on a digit grid."""
    checked = 0
    for k in range(2, max_len + 1):
        for d in itertools.product(range(1, max_digit + 1), repeat=k):
            for n in range(1, k):
                lhs = q_of(d[:n]) * q_of(d[n:])
                mid = q_of(d)
                if not (lhs <= mid <= 2 * lhs):
                    return False, checked
                checked += 1
    return True, checked


# ---------------------------------------------------------------------------
# suites


def suite_cf(cfg: SuiteConfig) -> list[Check]:
    ok, n = q_product_inequalities()
    out = [Check("cf", "q_n q_m <= q_{n+m} <= 2 q_n q_m", ok, {"cases": n})]
    grow = all(q_of((1,) * k) >= 2 ** ((k - 1) / 2) for k in range(1, 40))
    out.append(Check("cf", "q_n >= 2^((n-1)/2)", grow, {"max_n": 39}))
    g = levy_khinchin_estimate(GaussSampler(cfg.seed, 0), 10_000, 200)
    out.append(
        Check("cf", "Levy constant within 1%", abs(g.gamma - LEVY) <= 0.01 * LEVY, {"gamma_hat": g.gamma, "se": g.gamma_se})
    )
    k = levy_khinchin_estimate(GaussSampler(cfg.seed, 1), 200, 10_000)
    out.append(
        Check("cf", "Khinchin constant within 2%", abs(k.kappa - KHINCHIN) <= 0.02 * KHINCHIN, {"kappa_hat": k.kappa, "se": k.kappa_se})
    )
    return out


def suite_coding(cfg: SuiteConfig, max_len: int = 5) -> list[Check]:
    brute = brute_force_counts(max_len)
    bad = []
    for (start, d), c in brute.items():
        for t in (1, 2, 3):
            if count_words(start, d, t) != c[t - 1]:
                bad.append((start, d, t))
    return [Check("coding", "matrix counts equal brute force", not bad, {"cases": len(brute), "mismatches": len(bad)})]


def covering_report(tree: BandTree) -> dict:
    """Counts, nesting and disjointness of every order of ``tree``."""
    depth = tree.depth
    totals_ok = True
    nest_ok = True
    pattern_ok = True
    per = {}
    for n in range(depth + 1):
        lev = tree.level(n)
        want = count_words("boundary", tree.digits[:n]) if n else 2
        per[n] = (len(lev), want)
        totals_ok &= len(lev) == want
        for a, b in zip(lev, lev[1:]):
            nest_ok &= a.hi < b.lo
        for b in lev:
            nest_ok &= b.lo < b.hi
            if n < depth:
                kids = tree.children(b)
                pattern_ok &= [c.code.letters[-1] for c in kids] == tree._expected(b)
                nest_ok &= all(b.lo <= c.lo and c.hi <= b.hi for c in kids)
    return {"totals": totals_ok, "nesting": nest_ok, "pattern": pattern_ok, "per_order": per}


def suite_covering(cfg: SuiteConfig) -> list[Check]:
    f = cfg.freq or Frequency.periodic((1,))
    tree = BandTree(f, cfg.lam, cfg.depth or 8)
    rep = covering_report(tree)
    m = {"frequency": f.label(), "lambda": cfg.lam, "depth": tree.depth}
    return [
        Check("covering", "children per parent follow the successor rules", rep["pattern"], m),
        Check("covering", "order-n totals equal word counts", rep["totals"], {**m, "per_order": {k: v[0] for k, v in rep["per_order"].items()}}),
        Check("covering", "bands nested and disjoint", rep["nesting"], m),
    ]


def suite_chebyshev(cfg: SuiteConfig, p_max: int = 200) -> list[Check]:
    fails = {"I_in_J": [], "ordering": [], "r_le_40": [], "d_ge_1/(20p^3)": []}
    rmax, dratio = 0.0, math.inf
    for p in range(2, p_max + 1):
        fam = chebyshev_family(p)
        for k, v in fam.checks.items():
            if not v:
                fails[k].append(p)
        rmax = max(rmax, fam.r)
        dratio = min(dratio, fam.d * 20 * p**3)
    return [Check("chebyshev", k, not v, {"failing_p": v, "max_r": rmax, "min_d*20p^3": dratio}) for k, v in fails.items()]


def suite_gaps(cfg: SuiteConfig) -> list[Check]:
    f = cfg.freq or Frequency.periodic((1,))
    depth = cfg.depth or 8
    mins = []
    for D in (depth - 1, depth):
        st = gap_ratio_check(BandTree(f, cfg.lam, D), D - 2)
        mins.append(st.global_min)
    stable = mins[0] > 0 and abs(mins[1] / mins[0] - 1) <= 0.2
    return [Check("gaps", "gap ratio times a^3 positive and stable", stable, {"minima": mins, "depths": [depth - 1, depth]})]


def suite_pressure(cfg: SuiteConfig) -> list[Check]:
    from .dimension import pressure_curve

    n = cfg.depth or 14
    samples = cfg.samples or 200
    c = pressure_curve(cfg.lam, [0.0, 0.25, 0.5, 0.75, 1.0], n, samples, cfg.seed)
    z = (c.values[0] - LEVY) / c.stderr[0]
    m = {"P0": float(c.values[0]), "se": float(c.stderr[0]), "z": float(z)}
    return [
        Check("pressure", "P(0) within 3 sigma of the Levy constant", abs(z) <= 3, m),
        Check("pressure", "decreasing", c.decreasing(3), {"values": c.values.tolist()}),
        Check("pressure", "midpoint convex", c.convex(3), {"values": c.values.tolist()}),
    ]


def suite_dos(cfg: SuiteConfig) -> list[Check]:
    from .coding import enumerate_words
    from .dos import CountMismatch, band_eigen_counts, dos_mass, eta, periodic_eigenvalues

    f = cfg.freq or Frequency.periodic((1,))
    depth = cfg.depth or 7
    tree = BandTree(f, cfg.lam, depth)
    one = True
    tested = []
    for n in range(3, depth + 1):
        if f.q(n) > 1000:
            break
        try:
            band_eigen_counts(tree, periodic_eigenvalues(f, cfg.lam, n), n)
        except CountMismatch:
            one = False
        tested.append(n)
    m = cfg.truncation
    tele = True
    lo, hi = math.inf, 0.0
    for n in range(0, 7):
        ws = enumerate_words("boundary", f.prefix(n))
        tele &= sum(dos_mass(f, w, m).value for w in ws) == 1
        d = f.prefix(n + 2)
        for w in ws:
            r = float(dos_mass(f, w, m)) * eta(w.end_type, d, n) * q_of(d[:n])
            lo, hi = min(lo, r), max(hi, r)
    return [
        Check("dos", "one eigenvalue per type-2/3 band", one, {"orders": tested}),
        Check("dos", "masses telescope to 1", tele, {"truncation": m}),
        Check("dos", "mass * eta * q_n in [1/64, 64]", 1 / 64 <= lo and hi <= 64, {"min": lo, "max": hi}),
    ]


RUNNERS: dict[str, Callable[[SuiteConfig], list[Check]]] = {
    "cf": suite_cf,
    "coding": suite_coding,
    "covering": suite_covering,
    "chebyshev": suite_chebyshev,
    "gaps": suite_gaps,
    "pressure": suite_pressure,
    "dos": suite_dos,
}


def verify_suite(name: str, cfg: SuiteConfig | None = None) -> list[Check]:
    cfg = cfg or SuiteConfig()
    if name == "all":
        return [c for s in SUITES for c in RUNNERS[s](cfg)]
    if name not in RUNNERS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES + ('all',))}")
    return RUNNERS[name](cfg)
