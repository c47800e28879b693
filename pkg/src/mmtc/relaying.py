"""Relaying phase: active-channel PMFs, per-BS load and load-dependent success.

An aggregator is *active* when at least one of its channels decoded
(``K1 >= 1``). Active aggregators are treated as a thinned HPPP of density
``lambda_a_active``; the number attached to a BS, ``N_a``, follows the
gamma-approximated Poisson-Voronoi load law with shape 3.5.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .aggregation import DEFAULT_TRUNCATION, poisson_pmf, poisson_tail_range
from .params import NetworkParams, Pmf
from .specfun import exp_derivatives, hyp2f1, log_expint_en, nakagami_coverage

__all__ = [
    "RelayContext",
    "pmf_k1_rrs",
    "pmf_k1_crs",
    "pmf_na",
    "void_probability",
    "mgf_i2",
    "relay_exponent_derivatives",
    "relay_coverage",
    "relay_context",
    "p_suc2_conditional",
    "p_suc2_avg",
    "p_suc2_rayleigh",
    "p_suc2_rayleigh_mean_approx",
]

VORONOI_SHAPE = 3.5
NA_TAIL_MASS = 1e-12


# ---------------------------------------------------------------------------
# number of active channels


def _k1_small_k_terms(n: int, m: float, p: float) -> np.ndarray:
    """``Σ_{k1<=k<=N} Binom(k1; k, p) Poisson(k; m)`` for every ``k1`` in 0..N."""
    k1 = np.arange(n + 1)
    if m == 0:
        return np.where(k1 == 0, 1.0, 0.0)
    if p >= 1.0:
        # every occupied channel decodes: only k = k1 contributes
        return poisson_pmf(k1, m)
    q = 1.0 - p
    out = np.zeros(n + 1)
    for j in range(n + 1):
        if p == 0.0 and j > 0:
            continue
        log_p = j * math.log(p) if j else 0.0
        log_t = (
            -m * p + (1 + n) * math.log(m) + log_p + (1 + n - j) * math.log(q)
            + log_expint_en(j - n, m * q)
            - math.lgamma(1 + j) - math.lgamma(1 + n - j)
        )
        out[j] = math.exp(log_t)
    return out


def pmf_k1_rrs(params: NetworkParams, p_suc1: float) -> Pmf:
    """PMF of active channels per aggregator under RRS.

    Channels are treated as decoding independently with probability
    ``p_suc1``, so ``K1 | K ~ Binomial(min(K, N), p_suc1)``.
    """
    if not 0.0 <= p_suc1 <= 1.0:
        raise ValueError(f"p_suc1 must lie in [0, 1], got {p_suc1}")
    n, m = params.n_channels, params.m_bar
    k1 = np.arange(n + 1)
    # P(K > N) = Γ[1+N, 0, m] / Γ[1+N]
    p_big = float(special.gammainc(n + 1, m))
    probs = _k1_small_k_terms(n, m, p_suc1) + special.binom(n, k1) * _pow(p_suc1, k1) * _pow(1 - p_suc1, n - k1) * p_big
    return Pmf(k1, probs)


def pmf_k1_crs(params: NetworkParams, p_suc1_rrs: float, cond_success: Callable[[int], float],
               truncation_terms: int = DEFAULT_TRUNCATION) -> Pmf:
    """PMF of active channels per aggregator under CRS.

    For ``K <= N`` it matches RRS; for ``K > N`` the ``N`` selected channels
    decode with the load-dependent probability ``cond_success(K)``.
    """
    n, m = params.n_channels, params.m_bar
    k1 = np.arange(n + 1)
    probs = _k1_small_k_terms(n, m, p_suc1_rrs)
    ks, pmf, residual = poisson_tail_range(n, m, truncation_terms)
    for k, w in zip(ks, pmf):
        pc = cond_success(int(k))
        probs = probs + w * special.binom(n, k1) * _pow(pc, k1) * _pow(1 - pc, n - k1)
    return Pmf(k1, probs, truncation_residual=residual)


def _pow(base, exps):
    exps = np.asarray(exps, dtype=float)
    if base == 0.0:
        return np.where(exps == 0, 1.0, 0.0)
    return base**exps


# ---------------------------------------------------------------------------
# per-BS load


def pmf_na(params: NetworkParams, lambda_a_active: float, tail_mass: float = NA_TAIL_MASS) -> Pmf:
    """PMF of the number of active aggregators served by one BS."""
    if lambda_a_active < 0:
        raise ValueError("lambda_a_active must be >= 0")
    mu = lambda_a_active / params.lambda_b
    if mu == 0:
        return Pmf([0], [1.0])
    c = VORONOI_SHAPE
    head = c * math.log(c) - math.lgamma(c) - c * math.log(c + mu)
    ratio = math.log(mu) - math.log(c + mu)
    probs = []
    cum = 0.0
    n = 0
    while True:
        lp = head + math.lgamma(n + c) - math.lgamma(n + 1) + n * ratio
        p = math.exp(lp)
        probs.append(p)
        cum += p
        if 1.0 - cum <= tail_mass and n > mu:
            break
        n += 1
    probs = np.array(probs)
    residual = max(0.0, 1.0 - math.fsum(probs))
    return Pmf(np.arange(len(probs)), probs, truncation_residual=residual)


def void_probability(params: NetworkParams, lambda_a_active: float) -> float:
    """Probability that a BS has no active aggregator."""
    if lambda_a_active < 0:
        raise ValueError("lambda_a_active must be >= 0")
    return (1.0 + lambda_a_active / (VORONOI_SHAPE * params.lambda_b)) ** -VORONOI_SHAPE


# ---------------------------------------------------------------------------
# relaying interference


def _relay_integral(alpha: float, s: float) -> float:
    """``s · 2F1(1, 1-2/α; 2-2/α; -s) / (α-2)`` = ``∫_1^∞ s u / (u^α + s) du``."""
    d = 2.0 / alpha
    return s * hyp2f1(1.0, 1.0 - d, 2.0 - d, -s) / (alpha - 2.0)


def mgf_i2(p_void: float, s: float, alpha: float = 4.0) -> float:
    """Laplace transform of the inter-cell interference at a typical BS."""
    if s < 0:
        raise ValueError("mgf_i2 requires s >= 0")
    if s == 0 or p_void >= 1.0:
        return 1.0
    return math.exp(-2.0 * (1.0 - p_void) * _relay_integral(alpha, s))


def relay_exponent_derivatives(p_void: float, alpha: float, s: float, order: int,
                               method: str = "hyp") -> list[float]:
    """Derivatives ``g, g', ..., g^(order)`` of ``g = log M_I2`` at ``s``.

    With ``J(s) = ∫_1^∞ s u/(u^α+s) du`` and ``g = -2(1-p_void) J``,
    ``J^(k) = (-1)^(k+1) k! ∫_1^∞ u^(α+1) (u^α+s)^-(k+1) du``.
    ``method="hyp"`` evaluates that integral as
    ``2F1(k+1, k-2/α; k+1-2/α; -s) / (kα-2)``; ``method="quad"`` integrates
    it numerically.
    """
    scale = -2.0 * (1.0 - p_void)
    d = 2.0 / alpha
    out = [scale * _relay_integral(alpha, s)]
    for k in range(1, order + 1):
        if method == "hyp":
            inner = hyp2f1(k + 1.0, k - d, k + 1.0 - d, -s) / (k * alpha - 2.0)
        elif method == "quad":
            inner, _ = integrate.quad(lambda u: u ** (alpha + 1) / (u**alpha + s) ** (k + 1),
                                      1.0, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)
        else:
            raise ValueError(f"unknown method {method!r}")
        out.append(scale * (-1) ** (k + 1) * math.factorial(k) * inner)
    return out


def relay_coverage(p_void: float, alpha: float, m2: int, s: float) -> float:
    """``Σ_{t<m2} (-s)^t/t! d^t/ds^t M_I2(s)``: relaying success at ``s = m2 γ2``."""
    if s == 0:
        return 1.0
    if not math.isfinite(s):
        return 0.0
    g = relay_exponent_derivatives(p_void, alpha, s, 0)[0]
    if g < -745.0:
        return 0.0
    derivs = exp_derivatives(relay_exponent_derivatives(p_void, alpha, s, m2 - 1))
    return min(1.0, max(0.0, nakagami_coverage(derivs, s)))


# ---------------------------------------------------------------------------
# context and averaged success


@dataclass(frozen=True)
class RelayContext:
    lambda_a_active: float
    p_void: float
    pmf_k1: Pmf
    pmf_na: Pmf
    _coverage: dict = field(default_factory=dict, compare=False, repr=False)

    def gamma2_of(self, params: NetworkParams, k1: int, na: int) -> float:
        """Load-dependent relaying threshold ``2^(D k1 na / TW) - 1``."""
        x = params.payload_d * k1 * na / params.resource_tw * math.log(2.0)
        return math.expm1(x) if x < 709.0 else math.inf


def relay_context(params: NetworkParams, pmf_k1: Pmf) -> RelayContext:
    lam = (1.0 - pmf_k1[0]) * params.lambda_a
    return RelayContext(
        lambda_a_active=lam,
        p_void=void_probability(params, lam),
        pmf_k1=pmf_k1,
        pmf_na=pmf_na(params, lam),
    )


def _load_average(params: NetworkParams, ctx: RelayContext, k1: int, fn) -> float:
    na = ctx.pmf_na.support
    mask = na >= 1
    busy = 1.0 - ctx.pmf_na[0]
    if busy <= 0:
        return 1.0
    vals = np.array([fn(ctx.gamma2_of(params, k1, int(n))) for n in na[mask]])
    return float(np.dot(vals, ctx.pmf_na.probs[mask]) / busy)


def p_suc2_conditional(params: NetworkParams, ctx: RelayContext, k1: int) -> float:
    """Relaying success given ``k1`` active channels, averaged over ``N_a >= 1``."""
    if not 1 <= k1 <= params.n_channels:
        raise ValueError(f"k1 must lie in [1, N], got {k1}")

    def cover(g2):
        s = params.m2 * g2
        key = (params.alpha, params.m2, s)
        hit = ctx._coverage.get(key)
        if hit is None:
            hit = ctx._coverage[key] = relay_coverage(ctx.p_void, params.alpha, params.m2, s)
        return hit

    return _load_average(params, ctx, k1, cover)


def p_suc2_avg(params: NetworkParams, ctx: RelayContext) -> float:
    """Relaying success of a typical active aggregator."""
    pk = ctx.pmf_k1
    active = 1.0 - pk[0]
    if active <= 0:
        return 0.0
    total = math.fsum(p_suc2_conditional(params, ctx, k1) * pk[k1] for k1 in range(1, params.n_channels + 1))
    return total / active


def p_suc2_rayleigh(params: NetworkParams, ctx: RelayContext, k1: int) -> float:
    """Rayleigh-fading relaying success: the load average of ``M_I2(γ2)``."""
    return _load_average(params, ctx, k1, lambda g2: mgf_i2(ctx.p_void, g2, params.alpha))


def p_suc2_rayleigh_mean_approx(params: NetworkParams, ctx: RelayContext, p_occ: float,
                                p_suc1: float) -> float:
    """Rayleigh shortcut: ``M_I2`` at the threshold of a mean-loaded aggregator.

    Uses ``E[K1] ≈ N p_O p_suc1`` and ``E[N_a] = λ'_a / λ_B``.
    """
    ek1 = params.n_channels * p_occ * p_suc1
    ena = ctx.lambda_a_active / params.lambda_b
    return mgf_i2(ctx.p_void, ctx.gamma2_of(params, ek1, ena), params.alpha)
