"""Aggregation phase: channel occupation, MTD non-drop and per-channel SIR success.

``K``, the number of MTDs that want to transmit in a cluster, is
Poisson(``m_bar``). Each aggregator has ``N = n_channels`` orthogonal channels.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .params import NetworkParams
from .specfun import (
    QuadratureSpec,
    QuadratureError,
    gil_pelaez_cdf,
    log_gamma,
    log_gamma_upper,
    log_hyp2f2,
    nakagami_coverage,
    exp_derivatives,
    power_exponent_derivatives,
)

__all__ = [
    "OrderStatContext",
    "poisson_pmf",
    "poisson_tail_range",
    "p_occupy",
    "p_nondrop",
    "interference_coeff",
    "mgf_i1",
    "p_suc1_rrs",
    "order_stat_mean",
    "order_stat_context",
    "p_suc1_crs_conditional",
    "p_suc1_crs",
]

DEFAULT_TRUNCATION = 120
# Poisson masses below this are skipped in the K > N sums
NEGLIGIBLE_MASS = 1e-18


def poisson_pmf(k, mean: float):
    """Poisson PMF evaluated in log space (vectorized over ``k``)."""
    k = np.asarray(k, dtype=float)
    if mean == 0:
        return np.where(k == 0, 1.0, 0.0)
    return np.exp(k * math.log(mean) - mean - special.gammaln(k + 1))


def poisson_tail_range(n: int, mean: float, truncation_terms: int = DEFAULT_TRUNCATION):
    """``k`` values in ``N+1 .. N+truncation_terms`` with non-negligible mass.

    Returns ``(ks, pmf, residual)``; ``residual`` is the Poisson mass beyond
    the last summed term.
    """
    ks = np.arange(n + 1, n + truncation_terms + 1)
    pmf = poisson_pmf(ks, mean)
    keep = pmf >= NEGLIGIBLE_MASS
    residual = float(special.pdtrc(n + truncation_terms, mean))
    return ks[keep], pmf[keep], residual


# ---------------------------------------------------------------------------
# channel occupation / non-drop


def _reg_upper(n: int, m: float) -> float:
    """``Γ[1+n, m] / Γ[1+n]`` = P(K <= n)."""
    return float(special.gammaincc(n + 1, m))


def p_occupy(params: NetworkParams) -> float:
    """Average probability that a given channel of an aggregator is occupied.

    ``E[min(K, N)] / N`` in closed form:
    ``1 - Γ[1+N,m]/Γ[1+N] + (m Γ[1+N,m] - e^-m m^(N+1)) / (N² Γ[N])``.
    """
    n, m = params.n_channels, params.m_bar
    head = 1.0 - _reg_upper(n, m)
    lg_n2_gn = 2 * math.log(n) + log_gamma(n)
    a = math.exp(math.log(m) + log_gamma_upper(1 + n, m) - lg_n2_gn)
    b = math.exp(-m + (n + 1) * math.log(m) - lg_n2_gn)
    return min(1.0, max(0.0, head + a - b))


def p_nondrop(params: NetworkParams) -> float:
    """Average probability that an MTD is given a channel, ``E[N / max(K, N)]``.

    Closed form with the generalized hypergeometric function
    ``2F2[{1, 1+N}, {2+N, 2+N}, m]``, combined in log space.
    """
    n, m = params.n_channels, params.m_bar
    if m == 0:
        return 1.0
    log_tail = (
        -m + (1 + n) * math.log(m) + math.log(n)
        + log_hyp2f2(1.0, 1.0 + n, 2.0 + n, 2.0 + n, m)
        - math.log(n + 1) - log_gamma(n + 2)
    )
    return min(1.0, _reg_upper(n, m) + math.exp(log_tail))


# ---------------------------------------------------------------------------
# RRS channel success


def interference_coeff(params: NetworkParams, occupancy: float | None = None) -> float:
    """``C`` in ``M_I1(s) = exp(-C s^(2/α))``."""
    po = p_occupy(params) if occupancy is None else occupancy
    d = 2.0 / params.alpha
    return (po * params.lambda_a * math.pi * params.r_s**2 / 2.0
            * math.gamma(1.0 + d) * math.gamma(1.0 - d))


def mgf_i1(params: NetworkParams, s: float, occupancy: float | None = None) -> float:
    """Laplace transform of the inter-cluster interference at a typical aggregator."""
    if s < 0:
        raise ValueError("mgf_i1 requires s >= 0")
    return math.exp(-interference_coeff(params, occupancy) * s ** (2.0 / params.alpha))


def p_suc1_rrs(params: NetworkParams, occupancy: float | None = None) -> float:
    """Per-channel aggregation-phase success probability under RRS.

    ``occupancy`` overrides the Poisson-averaged channel occupation, which is
    useful when comparing against simulations with a fixed cluster size.
    """
    c = interference_coeff(params, occupancy)
    s = params.m1 * params.gamma1
    derivs = exp_derivatives(power_exponent_derivatives(c, 2.0 / params.alpha, s, params.m1 - 1))
    return min(1.0, max(0.0, nakagami_coverage(derivs, s)))


# ---------------------------------------------------------------------------
# order statistics of the desired-link gain


@dataclass(frozen=True)
class OrderStatContext:
    m1: int
    k: int
    i: int
    mean_h_ik: float


def _parent_sf(m1, h):
    return special.gammaincc(m1, m1 * h)


@lru_cache(maxsize=65536)
def order_stat_mean(m1: int, k: int, i: int) -> float:
    """Mean of the ``i``-th largest of ``k`` unit-mean Gamma(``m1``) gains.

    Integrates the survival function of the order statistic,
    ``P(h_(i) > h) = P(Binomial(k, S(h)) >= i)``, over ``h``.
    """
    if not (1 <= i <= k):
        raise ValueError(f"order_stat_mean requires 1 <= i <= k, got i={i}, k={k}")
    hmax = special.gammainccinv(m1, min(0.5, 1e-18 / k)) / m1
    mid = special.gammainccinv(m1, i / (k + 1.0)) / m1

    def sf(h):
        return special.betainc(i, k - i + 1, _parent_sf(m1, h))

    val, err = integrate.quad(sf, 0.0, hmax, points=[mid], epsabs=1e-14, epsrel=1e-13, limit=200)
    if not err < 1e-9 * max(val, 1.0):
        raise QuadratureError(f"order statistic mean did not converge (m1={m1}, k={k}, i={i})")
    return float(val)


def order_stat_context(m1: int, k: int, i: int) -> OrderStatContext:
    return OrderStatContext(m1, k, i, order_stat_mean(m1, k, i))


# ---------------------------------------------------------------------------
# CRS channel success


def _interference_cf(c: float, alpha: float):
    """Characteristic function ``w -> M_I1(-i w)`` on the principal branch."""
    p = 2.0 / alpha
    rot = cmath.exp(-0.5j * math.pi * p)  # arg(-i w) = -π/2

    def phi(w):
        return cmath.exp(-c * w**p * rot)

    return phi


@lru_cache(maxsize=262144)
def _interference_cdf(c: float, alpha: float, x: float) -> float:
    return gil_pelaez_cdf(_interference_cf(c, alpha), x)


@lru_cache(maxsize=65536)
def _crs_conditional_jensen(c, alpha, gamma1, m1, n, k):
    total = math.fsum(
        _interference_cdf(c, alpha, order_stat_mean(m1, k, i) / gamma1) for i in range(1, n + 1)
    )
    return total / n


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


@lru_cache(maxsize=64)
def _cdf_nodes(c, alpha, gamma1, m1, hmax, panels=40):
    edges = np.linspace(0.0, hmax, panels + 1)
    half = np.diff(edges) / 2
    mids = (edges[:-1] + edges[1:]) / 2
    nodes = (mids[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    cdf = np.array([_interference_cdf(c, alpha, h / gamma1) for h in nodes])
    return nodes, weights, cdf


def _crs_conditional_exact(c, alpha, gamma1, m1, n, k, hmax):
    # Σ_{i<=N} P(h_(i) >= γ1 I) = ∫ F_I(h/γ1) · k f(h) P(Bin(k-1, S(h)) <= N-1) dh
    nodes, weights, cdf = _cdf_nodes(c, alpha, gamma1, m1, hmax)
    dens = np.exp(m1 * math.log(m1) + (m1 - 1) * np.log(np.maximum(nodes, 1e-300))
                  - m1 * nodes - special.gammaln(m1))
    top = special.bdtr(n - 1, k - 1, _parent_sf(m1, nodes))
    return float(np.dot(weights, cdf * k * dens * top)) / n


def p_suc1_crs_conditional(params: NetworkParams, k: int, *, jensen: bool = True,
                           occupancy: float | None = None) -> float:
    """Per-channel aggregation success under CRS given ``k > N`` MTDs.

    Averages, over the ``N`` selected ranks, the Gil-Pelaez CDF of the
    interference at ``E[h_(i),k] / γ1`` (the mean gain replaces the random
    gain inside the characteristic function). ``jensen=False`` instead
    integrates the interference CDF against the exact order-statistic
    densities.
    """
    n = params.n_channels
    if k <= n:
        raise ValueError(f"p_suc1_crs_conditional requires k > N (k={k}, N={n})")
    c = interference_coeff(params, occupancy)
    if jensen:
        return _crs_conditional_jensen(c, params.alpha, params.gamma1, params.m1, n, int(k))
    hmax = float(special.gammainccinv(params.m1, 1e-16 / (n + DEFAULT_TRUNCATION)) / params.m1)
    hmax = float(np.ceil(hmax))
    return _crs_conditional_exact(c, params.alpha, params.gamma1, params.m1, n, int(k), hmax)


def crs_conditional_table(params: NetworkParams, truncation_terms: int = DEFAULT_TRUNCATION,
                          jensen: bool = True):
    """``(ks, Pr(K=k), p_c(k), residual)`` over the truncated ``K > N`` range."""
    ks, pmf, residual = poisson_tail_range(params.n_channels, params.m_bar, truncation_terms)
    pc = np.array([p_suc1_crs_conditional(params, int(k), jensen=jensen) for k in ks])
    return ks, pmf, pc, residual


def p_suc1_crs(params: NetworkParams, truncation_terms: int = DEFAULT_TRUNCATION,
               jensen: bool = True) -> float:
    """Per-channel aggregation-phase success probability under CRS."""
    n, m = params.n_channels, params.m_bar
    p_r = p_suc1_rrs(params)
    # P(1 <= K <= N) / P(K >= 1)
    p_k0 = math.exp(-m)
    w_small = (_reg_upper(n, m) - p_k0) / -math.expm1(-m)
    ks, pmf, pc, _ = crs_conditional_table(params, truncation_terms, jensen)
    tail = math.fsum(pc * pmf) / -math.expm1(-m)
    return min(1.0, max(0.0, p_r * w_small + tail))
