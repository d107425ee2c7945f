import math

import mpmath
import numpy as np
import pytest

from sturmlab.cf import KHINCHIN, Frequency
from sturmlab.coding import count_vector
from sturmlab.dimension import (
    RootNotBracketed,
    _completions,
    _log_norms,
    _sis_sample,
    cocycle_matrix,
    dimension_envelope,
    partition_log,
    phi_estimate,
    pre_dimension,
    relativized_pressure,
    rho_estimate,
    solve_sn,
)
from sturmlab.spectrum import BandTree


def test_order_zero(golden):
    # two order-0 bands of length 4
    assert solve_sn(golden, 24, 0) == pytest.approx(-0.5, abs=1e-12)
    for t in (0.0, 0.4, 1.0):
        assert partition_log(golden, 24, t, 0) == pytest.approx(math.log(2 * 4**t), abs=1e-12)


def test_sn_golden_frozen(golden):
    # window and scan trees give the same root; values frozen from both
    scan = BandTree(golden, 24, 11, method="scan")
    for n, want in [(10, 0.287533415283346), (11, 0.28275311715996826)]:
        assert solve_sn(golden, 24, n) == pytest.approx(want, abs=1e-12)
        assert solve_sn(golden, 24, n, scan) == pytest.approx(want, abs=1e-10)


def test_pre_dimension_window(golden):
    pd = pre_dimension(golden, 24, depth=9)
    assert pd.window == (5, 9)
    assert pd.lower <= min(pd.s.values()) <= pd.upper
    assert 0 < pd.lower <= pd.upper < 1
    with pytest.raises(ValueError):
        pre_dimension(golden, 24)


def test_completions_are_counts():
    d = (3, 1, 5, 2, 1, 1)
    C = _completions(d, 6)
    for k in range(7):
        for t in (1, 2, 3):
            assert C[k][t - 1] == sum(count_vector(t, d[k:]))


@pytest.mark.parametrize("f", [Frequency.periodic((2, 1)), Frequency.explicit((3, 1, 2, 2, 1, 1, 2, 1))])
def test_sis_matches_exact_partition(f):
    s = _sis_sample(f, 24, 8, 800, np.random.default_rng(3), 0, 0.6)
    assert not s.exact
    for t in (0.0, 0.3, 0.6, 1.0):
        assert s.Q(t) == pytest.approx(partition_log(f, 24, t, 8), abs=0.1)
    assert s.Q(0.0) == pytest.approx(math.log(sum(count_vector("boundary", f.prefix(8)))), abs=1e-9)


def test_exact_branch_under_budget(golden):
    s = _sis_sample(golden, 24, 6, 4, np.random.default_rng(0), 10**6, 0.6)
    assert s.exact
    assert s.Q(0.5) == pytest.approx(partition_log(golden, 24, 0.5, 6), abs=1e-12)


def test_pressure_needs_strong_coupling():
    with pytest.raises(ValueError):
        relativized_pressure(10, 0.5, 4, 5, 1)


def test_pressure_reproducible():
    from sturmlab import dimension

    a = relativized_pressure(24, 0.5, 3, 6, 3, budget=0, paths=8)
    dimension._SIS_CACHE.clear()
    b = relativized_pressure(24, 0.5, 3, 6, 3, budget=0, paths=8)
    assert a == b


def test_sn_not_bracketed():
    with pytest.raises(RootNotBracketed):
        from sturmlab.dimension import _root_in_t

        _root_in_t(np.array([-1.0, -2.0]), 0.5, 1.0)


def test_cocycle_matrix():
    R = cocycle_matrix(3, 0.5)
    assert np.allclose(R, [[0, 0.25, 0], [2, 0, 1.5], [1.5, 0, 1]])


def test_log_norms_against_mpmath():
    d = np.array([[1, 3, 2, 7, 1, 1, 2, 4, 1, 2] * 4, [2] * 40], float)
    got = _log_norms(0.3, d, renorm=3)
    for row, g in zip(d, got):
        with mpmath.workprec(200):
            P = mpmath.eye(3)
            for k in row:
                k = int(k)
                x = mpmath.mpf("0.3")
                P = P * mpmath.matrix([[0, x ** (k - 1), 0], [(k + 1) * x, 0, k * x], [k * x, 0, (k - 1) * x]])
            want = float(mpmath.log(max(mpmath.svd_r(P, compute_uv=False))))
        assert g == pytest.approx(want, abs=1e-9)


def test_phi_sign_change():
    assert phi_estimate(0.0, 50, 10, 1)[0] == -math.inf
    assert phi_estimate(1.0, 200, 200, 1)[0] > 0
    assert phi_estimate(0.05, 200, 200, 1)[0] < 0


def test_rho_within_khinchin_bounds():
    r = rho_estimate(400, 400, 7)
    assert KHINCHIN / 2 <= r.bracket[0] <= r.rho <= r.bracket[1] <= 2 * KHINCHIN**2


def test_envelope_formula():
    lo, hi = dimension_envelope(24, 4.8)
    assert lo == pytest.approx(math.log(4.8) / (6 * math.log(4 * KHINCHIN**2) + math.log(58)))
    assert hi == pytest.approx(math.log(4.8) / math.log(16 / 3))
    assert 0 < lo < hi < 1
