import math
from fractions import Fraction

import numpy as np
import pytest

from sturmlab.cf import Frequency, GaussSampler
from sturmlab.coding import Word, count_words
from sturmlab.spectrum import (
    BandTree,
    band_length,
    cheb_S,
    chebyshev_family,
    epsilon_pl,
    gap_ratio_check,
    gaps_of_order,
    length_envelope,
    sigma_bands,
    sturmian_value,
    trace_eval,
)
from sturmlab.verify import covering_report


def bloch_edges(f, lam, n):
    """Band edges of the period-q_n operator from periodic and antiperiodic eigenvalues."""
    q = f.q(n)
    v = np.array([lam * sturmian_value(f, k) for k in range(1, q + 1)], float)
    ev = []
    for c in (1.0, -1.0):
        H = np.diag(v) + np.diag(np.ones(q - 1), 1) + np.diag(np.ones(q - 1), -1)
        if q == 1:
            H[0, 0] += 2 * c
        else:
            H[0, q - 1] += c
            H[q - 1, 0] += c
        ev.extend(np.linalg.eigvalsh(H))
    return np.sort(ev).reshape(-1, 2)


def test_cheb_values():
    assert [cheb_S(p, 2) for p in range(8)] == list(range(8))
    assert cheb_S(-1, 0.3) == -1
    x = 0.7
    for p in range(1, 20):
        t = math.acos(x / 2)
        assert cheb_S(p, x) == pytest.approx(math.sin(p * t) / math.sin(t), abs=1e-9)


def test_initial_handles():
    s = trace_eval((1,), Fraction(24), Fraction(3), 0, bits=None)
    assert s.h(1) == 3 - 24
    assert s.t_curr == 3
    assert s.t_prev == 2


def test_fricke_vogt_exact():
    for E in (Fraction(-1, 3), Fraction(5, 2), Fraction(47, 2)):
        for n in range(0, 6):
            s = trace_eval((1, 2, 1, 3, 1, 2), Fraction(24), E, n, bits=None)
            assert s.fricke_vogt() == 0
            assert s.determinants() == (1, 1)


def test_epsilon():
    assert epsilon_pl(5, 1) == pytest.approx(1.1 / 19.6)
    assert epsilon_pl(3, 1) == 0.1
    assert epsilon_pl(50, 25) == 0.1


@pytest.mark.parametrize(
    "f,n",
    [(Frequency.periodic((1,)), 6), (Frequency.periodic((2,)), 4), (Frequency.periodic((1, 2)), 5)],
)
def test_type23_bands_are_periodic_spectrum(f, n):
    t = BandTree(f, 24, n)
    bands = sorted((b for b in t.level(n) if b.band_type in (2, 3)), key=lambda b: b.lo)
    got = np.array([[float(b.lo), float(b.hi)] for b in bands])
    want = bloch_edges(f, 24, n)
    assert got.shape == want.shape
    assert np.max(np.abs(got - want)) < 1e-9


def test_sigma_scan_agrees_with_tree(golden):
    t = BandTree(golden, 24, 5)
    direct = sigma_bands(t, 5)
    bands = sorted((b for b in t.level(5) if b.band_type in (2, 3)), key=lambda b: b.lo)
    assert len(direct) == len(bands)
    for row, b in zip(direct, bands):
        lo, hi = row[0], row[1]
        assert float(lo) == pytest.approx(float(b.lo), abs=1e-12)
        assert float(hi) == pytest.approx(float(b.hi), abs=1e-12)


def test_covering_depth8(trees):
    for name, t in trees.items():
        rep = covering_report(t)
        assert rep["pattern"] and rep["totals"] and rep["nesting"], name


def test_window_and_scan_agree():
    f = Frequency.periodic((2, 1))
    w = BandTree(f, 24, 5, method="window").level(5)
    s = BandTree(f, 24, 5, method="scan").level(5)
    assert [b.code for b in w] == [b.code for b in s]
    for a, b in zip(w, s):
        assert abs(a.length_log - b.length_log) < 1e-8


def test_scan_below_window_threshold():
    t = BandTree(Frequency.periodic((1,)), 8, 6, method="auto")
    assert t.method == "scan"
    assert len(t.level(6)) == count_words("boundary", (1,) * 6)


def test_single_path_matches_full_level():
    f = GaussSampler(7, 0).frequency(2, 6)  # digits 47, 2, 3, ...
    full = BandTree(f, 24, 3).expand()
    lazy = BandTree(f, 24, 3)
    for b in full.level(3)[::37]:
        c = lazy.band(b.code)
        assert abs(c.length_log - b.length_log) < 1e-9


def test_length_envelope_holds(trees):
    for t in trees.values():
        for n in range(1, 9):
            for b in t.level(n):
                lo, hi = length_envelope(24, b.code)
                assert lo <= b.length_log <= hi
                if n >= 2:
                    assert b.length_log <= (2 - n) * math.log(2)


def test_order_one_exception():
    # with a_1 = 1 the order-1 type-2 band is the whole order-0 type-1 band
    t = BandTree(Frequency.periodic((1,)), 24, 1)
    b = t.band(Word.parse("B1-2.1@1"))
    assert (float(b.lo), float(b.hi)) == (22.0, 26.0)


def test_proxy_length_is_close():
    t = BandTree(Frequency.periodic((2,)), 24, 5)
    w = t.level(5)[7].code
    _, lg, flag = band_length(t, w)
    _, lp, pflag = band_length(t, w, proxy=True)
    assert not flag and pflag
    assert abs(lg - lp) < 1.0


def test_to_dict_round_trips_edges():
    t = BandTree(Frequency.periodic((1,)), 24, 8)
    b = t.level(8)[3]
    d = b.to_dict()
    assert Word.parse(d["code"]) == b.code
    assert Fraction(d["hi"]) - Fraction(d["lo"]) > 0
    assert math.log(float(Fraction(d["hi"]) - Fraction(d["lo"]))) == pytest.approx(b.length_log, abs=1e-9)


def test_bad_coupling():
    with pytest.raises(ValueError):
        BandTree(Frequency.periodic((1,)), 4, 3)


def test_gaps_positive(trees):
    t = trees["mixed"]
    for n in range(0, 5):
        for g in gaps_of_order(t, n):
            assert g.lo < g.hi
            assert g.parent.lo < g.lo and g.hi < g.parent.hi


def test_gap_minimum_frozen(trees):
    st = gap_ratio_check(trees["golden"], 7)
    assert st.global_min > 0
    assert st.global_min == pytest.approx(0.2109, rel=0.01)


@pytest.mark.parametrize("p", [2, 3, 5, 17, 100])
def test_chebyshev_family(p):
    fam = chebyshev_family(p)
    assert fam.ok, fam.checks
    assert len(fam.intervals_J) == 2 * p - 1
