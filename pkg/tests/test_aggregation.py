import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special, stats

from mmtc import aggregation as agg
from mmtc.params import default_params, desk_params

GRID_N = (1, 2, 5, 30, 70, 120)
GRID_M = (0.5, 1.0, 10.0, 70.0)


def poisson_sum(fn, m, kmax=600):
    k = np.arange(kmax + 1)
    return math.fsum(fn(k) * stats.poisson.pmf(k, m))


@pytest.mark.parametrize("n", GRID_N)
@pytest.mark.parametrize("m", GRID_M)
def test_occupy_and_nondrop_match_poisson_sums(n, m):
    p = default_params().with_(n_channels=n, m_bar=m)
    occ = poisson_sum(lambda k: np.minimum(k, n) / n, m)
    nd = poisson_sum(lambda k: n / np.maximum(k, n), m)
    assert abs(agg.p_occupy(p) - occ) < 1e-8
    assert abs(agg.p_nondrop(p) - nd) < 1e-8


@given(st.integers(1, 150), st.floats(0.01, 200))
def test_occupy_nondrop_bounds(n, m):
    p = default_params().with_(n_channels=n, m_bar=m)
    po, pnd = agg.p_occupy(p), agg.p_nondrop(p)
    assert 0.0 <= po <= 1.0 and 0.0 < pnd <= 1.0
    # more channels: less occupied, fewer drops
    q = p.with_(n_channels=n + 1)
    assert agg.p_occupy(q) <= po + 1e-12
    assert agg.p_nondrop(q) >= pnd - 1e-12


def test_poisson_tail_range_residual():
    ks, pmf, res = agg.poisson_tail_range(10, 10.0, 40)
    assert ks[0] == 11
    assert math.fsum(pmf) + res == pytest.approx(special.pdtrc(10, 10.0), abs=1e-15)


# --- RRS --------------------------------------------------------------------


@given(st.floats(0.05, 20), st.floats(2.5, 6))
def test_rrs_rayleigh_closed_form(gamma1, alpha):
    p = default_params().with_(m1=1, gamma1=gamma1, alpha=alpha)
    c = agg.interference_coeff(p)
    assert agg.p_suc1_rrs(p) == pytest.approx(math.exp(-c * gamma1 ** (2 / alpha)), rel=1e-12)


def levy(c):
    # Laplace transform exp(-c √s) is the Lévy law with scale c²/2
    return stats.levy(scale=c * c / 2)


@pytest.mark.parametrize("m1", [2, 4])
@pytest.mark.parametrize("gamma1", [0.3, 1.0, 4.0])
def test_rrs_nakagami_against_levy_integral(m1, gamma1):
    p = default_params().with_(m1=m1, gamma1=gamma1)
    law = levy(agg.interference_coeff(p))
    # P(h >= γ I) with h ~ Gamma(m1, 1/m1), integrated over the interference density
    f = lambda x: special.gammaincc(m1, m1 * gamma1 * x) * law.pdf(x)
    ref = sum(integrate.quad(f, a, b, limit=400, epsabs=1e-13)[0]
              for a, b in [(0, 1e-3), (1e-3, 1), (1, np.inf)])
    assert agg.p_suc1_rrs(p) == pytest.approx(ref, abs=1e-8)


def test_rrs_decreases_with_threshold_and_density():
    p = default_params()
    assert agg.p_suc1_rrs(p.with_(gamma1=2.0)) < agg.p_suc1_rrs(p)
    assert agg.p_suc1_rrs(p.with_(lambda_a=1e-4)) < agg.p_suc1_rrs(p)


def test_mgf_i1_rejects_negative():
    with pytest.raises(ValueError):
        agg.mgf_i1(default_params(), -1.0)


# --- order statistics -------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 7, 40])
def test_order_stat_rayleigh_harmonic(k):
    # i-th largest of k unit exponentials has mean H_k - H_{i-1}
    h = np.concatenate(([0.0], np.cumsum(1.0 / np.arange(1, k + 1))))
    for i in range(1, k + 1):
        assert agg.order_stat_mean(1, k, i) == pytest.approx(h[k] - h[i - 1], rel=1e-9)


def test_order_stat_gamma_monte_carlo():
    rng = np.random.default_rng(5)
    draws = np.sort(rng.gamma(4, 0.25, size=(200_000, 6)), axis=1)[:, ::-1]
    for i in range(1, 7):
        mc = draws[:, i - 1]
        assert agg.order_stat_mean(4, 6, i) == pytest.approx(mc.mean(), abs=4 * mc.std() / math.sqrt(len(mc)))


def test_order_stat_means_sum_to_k():
    assert math.fsum(agg.order_stat_mean(3, 9, i) for i in range(1, 10)) == pytest.approx(9.0, rel=1e-9)


def test_order_stat_rejects_bad_rank():
    with pytest.raises(ValueError):
        agg.order_stat_mean(2, 3, 4)


# --- CRS --------------------------------------------------------------------


@pytest.mark.parametrize("c", [0.2, 1.5])
@pytest.mark.parametrize("x", [0.01, 0.5, 20.0])
def test_interference_cdf_is_levy(c, x):
    assert agg._interference_cdf(c, 4.0, x) == pytest.approx(levy(c).cdf(x), abs=1e-7)


def test_crs_conditional_exact_against_monte_carlo():
    p = desk_params().with_(n_channels=3)
    k = 7
    c = agg.interference_coeff(p)
    rng = np.random.default_rng(11)
    runs = 200_000
    gains = np.sort(rng.gamma(p.m1, 1 / p.m1, size=(runs, k)), axis=1)[:, -3:]
    interf = levy(c).rvs(size=(runs, 3), random_state=rng)
    mc = (gains >= p.gamma1 * interf).mean()
    se = math.sqrt(mc * (1 - mc) / runs)
    assert agg.p_suc1_crs_conditional(p, k, jensen=False) == pytest.approx(mc, abs=4 * se + 1e-4)
    assert abs(agg.p_suc1_crs_conditional(p, k) - mc) < 0.02


def test_crs_conditional_requires_overload():
    with pytest.raises(ValueError):
        agg.p_suc1_crs_conditional(default_params().with_(n_channels=30), 30)


def test_crs_beats_rrs_when_overloaded():
    p = default_params().with_(n_channels=10)
    assert agg.p_suc1_crs(p) > agg.p_suc1_rrs(p) + 0.01


def test_crs_conditional_increases_with_load():
    p = default_params().with_(n_channels=10)
    vals = [agg.p_suc1_crs_conditional(p, k) for k in (11, 20, 60)]
    assert vals[0] < vals[1] < vals[2]


def test_crs_matches_rrs_with_ample_channels():
    p = default_params().with_(n_channels=130)
    assert abs(agg.p_suc1_crs(p) - agg.p_suc1_rrs(p)) <= 1e-3
