import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from sturmlab.cf import Frequency, GaussSampler
from sturmlab.coding import Letter, Word, enumerate_words, iota_lift, successors
from sturmlab.dos import (
    CountMismatch,
    FiberSampler,
    SizeCapExceeded,
    band_eigen_counts,
    dos_mass,
    eta,
    periodic_approximant,
    periodic_eigenvalues,
    psi_lyapunov_estimate,
    psi_value,
    theta_estimate,
    vartheta,
)
from sturmlab.spectrum import BandTree


def test_three_site_approximant(golden):
    H = periodic_approximant(golden, 24, 3).matrix()
    assert np.array_equal(H, [[24, 1, 1], [1, 0, 1], [1, 1, 24]])
    want = sorted([23, (25 - math.sqrt(633)) / 2, (25 + math.sqrt(633)) / 2])
    assert np.allclose(periodic_eigenvalues(golden, 24, 3), want, atol=1e-12)


def test_size_cap(golden):
    with pytest.raises(SizeCapExceeded):
        periodic_eigenvalues(golden, 24, 20, cap=1000)


@pytest.mark.parametrize("tail,n", [((1,), 9), ((2,), 5), ((1, 2), 7)])
def test_one_eigenvalue_per_band(tail, n):
    f = Frequency.periodic(tail)
    res = band_eigen_counts(BandTree(f, 24, n), periodic_eigenvalues(f, 24, n), n)
    assert res.one_per_band
    assert len(res.counts) == f.q(n)


def test_count_mismatch_detected(golden):
    t = BandTree(golden, 24, 6)
    ev = periodic_eigenvalues(golden, 24, 6)
    with pytest.raises(CountMismatch):
        band_eigen_counts(t, np.append(ev, ev[3]), 6)
    res = band_eigen_counts(t, ev[1:], 6, check=False)
    assert not res.one_per_band


def test_counted_masses_equal_exact_masses(golden):
    # eigenvalue counting at order 12 against the exact mass of each order-4 word
    tree = BandTree(golden, 24, 12)
    bc = band_eigen_counts(tree, periodic_eigenvalues(golden, 24, 12), 12)
    agg = Counter()
    for code, c in bc.counts.items():
        agg[Word.parse(code).prefix(4)] += c
    for w in enumerate_words("boundary", golden.prefix(4)):
        assert Fraction(agg[w], bc.q) == dos_mass(golden, w, 8).value


@pytest.mark.parametrize("tail", [(1,), (2,), (1, 2), (3, 1, 4)])
def test_masses_sum_and_telescope(tail):
    f = Frequency.periodic(tail)
    for n in range(0, 5):
        ws = enumerate_words("boundary", f.prefix(n))
        assert sum(dos_mass(f, w, 6).value for w in ws) == 1
        for w in ws[:5]:
            kids = [w.extend(e) for e in successors(w.end_type, f.prefix(n + 1)[n])]
            assert sum(dos_mass(f, c, 5).value for c in kids) == dos_mass(f, w, 6).value


def test_mass_rejects_bad_words(golden):
    with pytest.raises(ValueError):
        dos_mass(golden, Word((Letter(2, 1, 1),)), 6)
    with pytest.raises(ValueError):
        dos_mass(golden, Word((Letter(1, 1, 1),), 1), 6)


def test_eta_values():
    d = (1, 3, 1, 5)
    assert eta(1, d, 1) == 3
    assert eta(2, d, 0) == 1
    assert eta(3, d, 1) == 1
    assert eta(3, d, 2) == 5
    with pytest.raises(ValueError):
        eta(4, d, 0)


def test_vartheta():
    assert vartheta(Letter(2, 1, 7)) == 6
    assert vartheta(Letter(2, 1, 1)) == 0
    assert vartheta(Letter(1, 3, 7)) == 1
    assert vartheta(Letter(3, 1, 2)) == 1


def test_fiber_sampler_frequencies():
    f = Frequency.periodic((2, 1))
    fs = FiberSampler(f, 24, 8, 3, 0)
    N = 20000
    cnt = Counter(iota_lift(fs.sample(3)).prefix(3) for _ in range(N))
    fc = f.check()
    assert set(cnt) == set(enumerate_words("boundary", fc.prefix(3)))
    for w, c in cnt.items():
        p = float(dos_mass(fc, w, 12))
        assert abs(c / N - p) <= 3.5 * math.sqrt(p * (1 - p) / N)


def test_fiber_sampler_needs_truncation():
    with pytest.raises(ValueError):
        FiberSampler(Frequency.periodic((1,)), 24, 5)


def test_fiber_words_admissible():
    f = GaussSampler(7, 3).frequency(0, 20)
    fs = FiberSampler(f, 24, 8, 7, 4)
    for _ in range(20):
        x = fs.sample(6)
        assert x.boundary is None and x.order == 6
        assert x.is_admissible(f.prefix(6))
        assert iota_lift(x).is_admissible(f.check().prefix(7))


def test_fiber_reproducible():
    f = Frequency.periodic((1, 2))
    a = [FiberSampler(f, 24, 8, 5, 1).sample(10) for _ in range(2)]
    assert a[0] == a[1]


def test_psi_bound():
    f = Frequency.periodic((2, 1, 1))
    fs = FiberSampler(f, 24, 8, 1, 0)
    tree = BandTree(f.check(), 24, 9)
    for _ in range(10):
        x = fs.sample(8)
        psi, flag = psi_value(f, 24, x, tree)
        assert not flag
        assert psi <= (1 - 8) * math.log(2)


def test_lyapunov_fixed_golden_small():
    L, se, diag = psi_lyapunov_estimate(24, 6, 20, 1, Frequency.periodic((1,)))
    assert diag["proxy_flags"] == 0
    assert 0 < L < 2 * math.log(2 * 29)
    assert len(diag["local_dimensions"]) == 20


def test_lyapunov_needs_strong_coupling():
    with pytest.raises(ValueError):
        psi_lyapunov_estimate(10, 4, 4, 1)


def test_theta_small():
    th, se = theta_estimate(40, 60, 2)
    assert math.isfinite(th) and se > 0
    assert 0.3 < th < 3
