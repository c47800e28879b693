"""Parameter set and shared result types."""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np

__all__ = [
    "NetworkParams",
    "SchedulingScheme",
    "Pmf",
    "MetricsReport",
    "default_params",
    "desk_params",
    "validate",
    "db_to_linear",
    "linear_to_db",
]


class SchedulingScheme(enum.Enum):
    RRS = "rrs"  # random resource scheduling
    CRS = "crs"  # channel-aware resource scheduling

    @classmethod
    def parse(cls, value) -> "SchedulingScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown scheduling scheme {value!r} (expected 'rrs' or 'crs')") from None


@dataclass(frozen=True)
class NetworkParams:
    """Network geometry and fading, plus the relaying resource.

    Densities are per square metre and distances in metres. ``gamma1`` is a
    linear SIR threshold. Only the ratio ``resource_tw / payload_d`` enters
    the relaying threshold, so absolute bit values are uncalibrated.
    """

    lambda_b: float
    lambda_a: float
    r_s: float
    m_bar: float
    n_channels: int
    alpha: float
    m1: int
    m2: int
    gamma1: float
    payload_d: float = 1.0
    resource_tw: float = 150.0
    rho: float = field(default=1.0, repr=False)

    @property
    def lambda_m(self) -> float:
        """MTD density, ``m_bar * lambda_a``."""
        return self.m_bar * self.lambda_a

    def with_(self, **changes) -> "NetworkParams":
        if "n_channels" in changes:
            changes["n_channels"] = int(changes["n_channels"])
        return replace(self, **changes)


# names exposed for serialization; rho is fixed at 1
PARAM_FIELDS = tuple(f.name for f in fields(NetworkParams) if f.name != "rho")
INT_FIELDS = ("n_channels", "m1", "m2")


def default_params(n_channels: int = 70, resource_tw: float = 150.0) -> NetworkParams:
    """Baseline system parameters (500 m mean cell radius, m̄ = 70, α = 4)."""
    return NetworkParams(
        lambda_b=1.0 / (math.pi * 500.0**2),
        lambda_a=10.0**-4.5,
        r_s=50.0,
        m_bar=70.0,
        n_channels=n_channels,
        alpha=4.0,
        m1=4,
        m2=2,
        gamma1=1.0,
        payload_d=1.0,
        resource_tw=resource_tw,
    )


def desk_params(n_channels: int = 10, resource_tw: float = 150.0) -> NetworkParams:
    """Reduced-load preset that keeps Monte-Carlo cross-checks cheap."""
    return default_params(n_channels, resource_tw).with_(lambda_a=1e-5, m_bar=10.0)


def validate(params: NetworkParams) -> list[str]:
    """Return one message per violated invariant; empty when valid."""
    out = []
    for name in ("lambda_b", "lambda_a", "r_s", "m_bar", "gamma1", "payload_d", "resource_tw"):
        v = getattr(params, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            out.append(f"{name}: must be finite and > 0 (got {v!r})")
    a = params.alpha
    if not (isinstance(a, (int, float)) and 2 < a <= 6):
        out.append(f"alpha: must satisfy 2 < alpha <= 6 (got {a!r})")
    for name in INT_FIELDS:
        v = getattr(params, name)
        if not (isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= 1):
            out.append(f"{name}: must be an integer >= 1 (got {v!r})")
    if not out and params.lambda_a / params.lambda_b < 5:
        warnings.warn(
            f"lambda_a/lambda_b = {params.lambda_a / params.lambda_b:.3g} < 5; the model "
            "assumes aggregators far outnumber base stations",
            stacklevel=2,
        )
    return out


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True, eq=False)
class Pmf:
    """Finite (possibly truncated) PMF on integer support."""

    support: np.ndarray
    probs: np.ndarray
    truncation_residual: float = 0.0

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        probs = np.asarray(self.probs, dtype=float)
        if support.shape != probs.shape:
            raise ValueError("support and probs must have the same length")
        if np.any(probs < -1e-15):
            raise ValueError("probabilities must be non-negative")
        probs = np.clip(probs, 0.0, None)
        if self.truncation_residual < 0:
            raise ValueError("truncation_residual must be >= 0")
        total = probs.sum() + self.truncation_residual
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"PMF mass {total!r} is not 1 within 1e-6")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Pmf):
            return NotImplemented
        return (np.array_equal(self.support, other.support) and np.array_equal(self.probs, other.probs)
                and self.truncation_residual == other.truncation_residual)

    __hash__ = None

    def __getitem__(self, k: int) -> float:
        idx = np.searchsorted(self.support, k)
        if idx < len(self.support) and self.support[idx] == k:
            return float(self.probs[idx])
        return 0.0

    def mean(self) -> float:
        return float(np.dot(self.support, self.probs))

    def total(self) -> float:
        return float(self.probs.sum() + self.truncation_residual)

    def total_variation(self, other: "Pmf") -> float:
        keys = np.union1d(self.support, other.support)
        a = np.array([self[k] for k in keys])
        b = np.array([other[k] for k in keys])
        return 0.5 * float(np.abs(a - b).sum())


@dataclass(frozen=True)
class MetricsReport:
    """Headline metrics plus the per-phase factors they are assembled from."""

    p_occupy: float
    p_nondrop: float
    p_suc1: float
    p_suc2: float
    pmf_k1: Pmf
    p_mtd_success: float
    avg_successful_mtds: float
    p_channel_util: float
    successful_mtds_per_km2: float

    def scalars(self) -> dict[str, float]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name if f.name != "pmf_k1" else "pmf_k1_mean"] = v.mean() if isinstance(v, Pmf) else v
        return out
