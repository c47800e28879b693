"""Special functions and transform inversion used by the analytical model.

Everything here is a pure function of its arguments. Gamma-type functions are
thin wrappers around :mod:`scipy.special`; the hypergeometric series, the
negative-order exponential integral, the Gil-Pelaez inversion and the
exponential-derivative recurrence are implemented directly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "SeriesError",
    "gamma_fn",
    "log_gamma",
    "gamma_upper",
    "log_gamma_upper",
    "gamma_generalized",
    "hyp2f2",
    "log_hyp2f2",
    "hyp2f1",
    "expint_en",
    "log_expint_en",
    "gil_pelaez_cdf",
    "exp_derivatives",
    "power_exponent_derivatives",
    "mgf_exp_derivatives",
    "nakagami_coverage",
]

MAX_SERIES_TERMS = 10_000


class QuadratureError(ArithmeticError):
    """Adaptive quadrature hit its subdivision limit without converging."""


class SeriesError(ArithmeticError):
    """A power series did not converge within the allowed number of terms."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for the semi-infinite integrals.

    ``tail_cutoff=None`` integrates to infinity with a Fourier-weighted
    rule; a finite value truncates the integral there instead.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000
    tail_cutoff: float | None = None

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.tail_cutoff is not None and not self.tail_cutoff > 0:
            raise ValueError("tail_cutoff must be positive")


# ---------------------------------------------------------------------------
# gamma family


def gamma_fn(a: float) -> float:
    if not a > 0:
        raise ValueError(f"gamma_fn requires a > 0, got {a}")
    if float(a).is_integer() and a <= 171:
        return float(math.factorial(int(a) - 1))
    return float(special.gamma(a))


def log_gamma(a: float) -> float:
    if not a > 0:
        raise ValueError(f"log_gamma requires a > 0, got {a}")
    return float(special.gammaln(a))


def gamma_upper(a: float, x: float) -> float:
    """Upper incomplete gamma function, unregularized."""
    _check_gamma_args(a, x)
    if x == 0:
        return gamma_fn(a)
    if math.isinf(x):
        return 0.0
    return float(special.gammaincc(a, x) * special.gamma(a))


def log_gamma_upper(a: float, x: float) -> float:
    """``log Γ(a, x)``; finite for arguments where ``Γ(a, x)`` over/underflows."""
    _check_gamma_args(a, x)
    if math.isinf(x):
        return -math.inf
    q = special.gammaincc(a, x)
    if q > 1e-280:
        return float(math.log(q) + special.gammaln(a))
    # regularized value underflows, so x >> a: continued fraction in log space
    return float(_log_gamma_upper_cf(a, x))


def gamma_generalized(a: float, x0: float, x1: float) -> float:
    """Generalized incomplete gamma ``∫_{x0}^{x1} t^(a-1) e^-t dt``."""
    if not a > 0:
        raise ValueError(f"gamma_generalized requires a > 0, got {a}")
    if not (0 <= x0 <= x1):
        raise ValueError(f"gamma_generalized requires 0 <= x0 <= x1, got {x0}, {x1}")
    # subtract whichever regularized tail is smaller to avoid cancellation
    if x0 >= a:
        reg = special.gammaincc(a, x0) - (0.0 if math.isinf(x1) else special.gammaincc(a, x1))
    else:
        reg = (1.0 if math.isinf(x1) else special.gammainc(a, x1)) - special.gammainc(a, x0)
    return float(reg * special.gamma(a))


def _check_gamma_args(a, x):
    if not a > 0:
        raise ValueError(f"incomplete gamma requires a > 0, got {a}")
    if not x >= 0:
        raise ValueError(f"incomplete gamma requires x >= 0, got {x}")


def _log_gamma_upper_cf(a, x):
    # Lentz continued fraction for Γ(a,x) e^x x^-a (valid for x > a + 1)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, MAX_SERIES_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return -x + a * math.log(x) + math.log(h)
    raise SeriesError("continued fraction for Γ(a, x) did not converge")


# ---------------------------------------------------------------------------
# hypergeometric series


def _series_terms(a: Sequence[float], b: Sequence[float], z: float, tol: float):
    """Log-magnitudes and signs of the terms of ``pFq(a; b; z)``."""
    logs = [0.0]
    signs = [1.0]
    log_t, sign_t = 0.0, 1.0
    running_max = 0.0
    if z == 0:
        return logs, signs
    log_z, sign_z = math.log(abs(z)), math.copysign(1.0, z)
    for k in range(MAX_SERIES_TERMS):
        if any(ai + k == 0 for ai in a):  # terminating series
            return logs, signs
        # term ratio z Π(a_i + k) / ((k + 1) Π(b_i + k)), accumulated in logs
        log_ratio = log_z - math.log(k + 1.0)
        sign = sign_z
        for ai in a:
            log_ratio += math.log(abs(ai + k))
            sign *= math.copysign(1.0, ai + k)
        for bi in b:
            log_ratio -= math.log(abs(bi + k))
            sign *= math.copysign(1.0, bi + k)
        log_t += log_ratio
        sign_t *= sign
        logs.append(log_t)
        signs.append(sign_t)
        running_max = max(running_max, log_t)
        ratio_small = log_ratio < 0
        # converged once terms are shrinking and negligible against the peak
        if ratio_small and log_t < running_max + math.log(tol):
            return logs, signs
    raise SeriesError(f"hypergeometric series did not converge in {MAX_SERIES_TERMS} terms")


def _scaled_sum(logs, signs):
    """Return ``(s, L)`` with the series sum equal to ``s * exp(L)``."""
    top = max(logs)
    s = math.fsum(sg * math.exp(lg - top) for lg, sg in zip(logs, signs))
    return s, top


def _check_denominators(b):
    for bi in b:
        if bi <= 0 and float(bi).is_integer():
            raise ValueError(f"lower parameter {bi} is a non-positive integer")


def hyp2f2(a1: float, a2: float, b1: float, b2: float, z: float, tol: float = 1e-17) -> float:
    """Generalized hypergeometric ``2F2(a1, a2; b1, b2; z)`` by direct series."""
    _check_denominators((b1, b2))
    if z == 0:
        return 1.0
    s, top = _scaled_sum(*_series_terms((a1, a2), (b1, b2), z, tol))
    return s * math.exp(top)


def log_hyp2f2(a1: float, a2: float, b1: float, b2: float, z: float, tol: float = 1e-17) -> float:
    """Natural log of ``2F2``; the sum must be positive."""
    _check_denominators((b1, b2))
    if z == 0:
        return 0.0
    s, top = _scaled_sum(*_series_terms((a1, a2), (b1, b2), z, tol))
    if s <= 0:
        raise ValueError("log_hyp2f2: series sum is not positive")
    return top + math.log(s)


def _hyp2f1_series(a, b, c, z, tol=1e-17):
    s, top = _scaled_sum(*_series_terms((a, b), (c,), z, tol))
    return s * math.exp(top)


def _hyp2f1_pfaff(a, b, c, z, tol=1e-17):
    # 2F1(a,b;c;z) = (1-z)^-b 2F1(c-a, b; c; z/(z-1))
    return (1.0 - z) ** (-b) * _hyp2f1_series(c - a, b, c, z / (z - 1.0), tol)


def _hyp2f1_inverse(a, b, c, z, tol=1e-17):
    # connection formula to argument 1/z, z < -1, b - a not an integer
    w = 1.0 / z
    mz = -z
    t1 = (special.gamma(c) * special.gamma(b - a) * special.rgamma(b) * special.rgamma(c - a)
          * mz ** (-a) * _hyp2f1_series(a, a - c + 1.0, a - b + 1.0, w, tol))
    t2 = (special.gamma(c) * special.gamma(a - b) * special.rgamma(a) * special.rgamma(c - b)
          * mz ** (-b) * _hyp2f1_series(b, b - c + 1.0, b - a + 1.0, w, tol))
    return float(t1 + t2)


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric ``2F1(a, b; c; z)`` for real ``z < 1``.

    Uses the defining series for ``|z| <= 1/2``, the Pfaff transformation on
    ``[-3, -1/2)`` and the ``1/z`` connection formula below ``-3``. That
    formula degenerates when ``b - a`` is an integer; the limiting case is
    left to :func:`scipy.special.hyp2f1`.
    """
    _check_denominators((c,))
    if not z < 1:
        raise ValueError(f"hyp2f1 is only implemented for z < 1, got {z}")
    if z == 0:
        return 1.0
    if z >= -0.5:
        return _hyp2f1_series(a, b, c, z)
    if z >= -3.0:
        return _hyp2f1_pfaff(a, b, c, z)
    if float(b - a).is_integer():
        return float(special.hyp2f1(a, b, c, z))
    return _hyp2f1_inverse(a, b, c, z)


# ---------------------------------------------------------------------------
# exponential integral


def _log_expint_cf(n: int, z: float) -> float:
    # modified Lentz evaluation of E_n(z) = e^-z / (z + n - n/(z + n + 2 - ...)), z > 1
    tiny = 1e-300
    b = z + n
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, MAX_SERIES_TERMS):
        an = -i * (n - 1.0 + i)
        b += 2.0
        d = an * d + b
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = b + an / c
        c = c if abs(c) > tiny else tiny
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return math.log(h) - z
    raise SeriesError("exponential-integral continued fraction did not converge")


def expint_en(n: int, z: float) -> float:
    """Generalized exponential integral ``E_n(z) = ∫_1^∞ e^(-zt) t^-n dt``."""
    n = _as_int(n)
    if not z > 0:
        raise ValueError(f"expint_en requires z > 0, got {z}")
    if n <= 0 or z > 1.0:
        return math.exp(log_expint_en(n, z))
    return float(special.expn(n, z))


def log_expint_en(n: int, z: float) -> float:
    """``log E_n(z)``; finite sum for ``n <= 0``, continued fraction for ``z > 1``."""
    n = _as_int(n)
    if not z > 0:
        raise ValueError(f"log_expint_en requires z > 0, got {z}")
    if n > 0:
        if z > 1.0:
            return _log_expint_cf(n, z)
        return math.log(special.expn(n, z))
    m = -n
    # E_{-m}(z) = e^-z Σ_j m!/(m-j)! z^-(j+1)
    lf_m = math.lgamma(m + 1)
    lz = math.log(z)
    terms = np.array([lf_m - math.lgamma(m - j + 1) - (j + 1) * lz for j in range(m + 1)])
    return float(-z + special.logsumexp(terms))


def _as_int(n):
    if int(n) != n:
        raise ValueError(f"order must be an integer, got {n}")
    return int(n)


# ---------------------------------------------------------------------------
# Gil-Pelaez inversion


def gil_pelaez_cdf(char_fn: Callable[[float], complex], point: float,
                   quad: QuadratureSpec = QuadratureSpec()) -> float:
    """CDF ``P(X <= point)`` from the characteristic function of ``X``.

    Evaluates ``1/2 - (1/π) ∫_0^∞ Im{φ(w) e^(-i w x)} / w dw``. The first
    oscillation period is integrated directly; beyond it the integrand is
    split as ``Im φ · cos(wx) - Re φ · sin(wx)`` and handed to QUADPACK's
    Fourier-weighted rules, which cope with slow algebraic decay of ``φ``.
    """
    x = float(point)
    if not math.isfinite(x):
        raise ValueError("gil_pelaez_cdf requires a finite point")
    opts = dict(epsabs=quad.abs_tol, epsrel=quad.rel_tol)
    lim = quad.max_subdivisions
    errors = []

    def run(f, lo, hi, **kw):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", integrate.IntegrationWarning)
            val, err = integrate.quad(f, lo, hi, **opts, **kw)
        if caught:
            errors.append(err)
        return val

    def full(w):
        return (char_fn(w) * complex(math.cos(w * x), -math.sin(w * x))).imag / w

    if x == 0.0:
        hi = math.inf if quad.tail_cutoff is None else quad.tail_cutoff
        total = run(lambda w: char_fn(w).imag / w, 0.0, hi, limit=lim)
    else:
        freq = abs(x)
        sign = math.copysign(1.0, x)
        head_end = math.pi / freq
        if quad.tail_cutoff is not None and quad.tail_cutoff <= head_end:
            total = run(full, 0.0, quad.tail_cutoff, limit=lim)
        else:
            total = run(full, 0.0, head_end, limit=lim)
            hi = math.inf if quad.tail_cutoff is None else quad.tail_cutoff
            kw = dict(wvar=freq)
            if math.isinf(hi):
                kw["limlst"] = max(50, min(lim, 500))
            else:
                kw["limit"] = lim
            cos_part = run(lambda w: char_fn(w).imag / w, head_end, hi, weight="cos", **kw)
            sin_part = run(lambda w: char_fn(w).real / w, head_end, hi, weight="sin", **kw)
            total += cos_part - sign * sin_part

    bad = [e for e in errors if not e <= max(1e3 * quad.abs_tol, 1e-6)]
    if bad:
        raise QuadratureError(f"Gil-Pelaez integral did not converge (error estimate {max(bad):.3g})")
    return min(1.0, max(0.0, 0.5 - total / math.pi))


# ---------------------------------------------------------------------------
# derivatives of exp(g(s))


def exp_derivatives(g_derivs: Sequence[float]) -> list[float]:
    """Derivatives ``f, f', ..., f^(T)`` of ``f = exp(g)``.

    ``g_derivs`` holds ``g(s), g'(s), ..., g^(T)(s)``. Uses
    ``f^(t) = Σ_{j<t} C(t-1, j) f^(j) g^(t-j)``.
    """
    f = [math.exp(g_derivs[0])]
    for t in range(1, len(g_derivs)):
        f.append(math.fsum(math.comb(t - 1, j) * f[j] * g_derivs[t - j] for j in range(t)))
    return f


def power_exponent_derivatives(coeff: float, power: float, s: float, order: int) -> list[float]:
    """Derivatives of ``g(s) = -coeff · s^power`` up to ``order``."""
    out = []
    falling = 1.0
    for k in range(order + 1):
        out.append(-coeff * falling * s ** (power - k))
        falling *= power - k
    return out


def mgf_exp_derivatives(coeff: float, power: float, s: float, order: int) -> float:
    """``d^t/ds^t exp(-coeff · s^power)`` evaluated at ``s > 0``."""
    if order < 0:
        raise ValueError(f"derivative order must be >= 0, got {order}")
    if not s > 0:
        raise ValueError(f"s must be positive, got {s}")
    return exp_derivatives(power_exponent_derivatives(coeff, power, s, order))[order]


def nakagami_coverage(f_derivs: Sequence[float], s: float) -> float:
    """``Σ_t (-s)^t/t! f^(t)(s)``: ``P(h >= θ I)`` for gamma-shape ``len(f_derivs)``.

    ``f`` is the Laplace transform of the interference and ``s = m θ``.
    """
    return math.fsum((-s) ** t / math.factorial(t) * ft for t, ft in enumerate(f_derivs))
