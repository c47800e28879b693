"""Headline metrics for both scheduling schemes, and parameter sweeps."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import aggregation as agg
from . import relaying as rel
from .params import MetricsReport, NetworkParams, SchedulingScheme

log = logging.getLogger(__name__)

__all__ = ["evaluate", "evaluate_rrs", "evaluate_crs", "sweep", "SweepPoint", "SWEEP_AXES"]

KM2 = 1e6
SWEEP_AXES = ("resource_tw", "n_channels", "lambda_a", "alpha", "m_bar")


def _successful_mtds(params, ctx):
    return math.fsum(
        k1 * ctx.pmf_k1[k1] * rel.p_suc2_conditional(params, ctx, k1)
        for k1 in range(1, params.n_channels + 1)
    )


def evaluate_rrs(params: NetworkParams) -> MetricsReport:
    p_o = agg.p_occupy(params)
    p_nd = agg.p_nondrop(params)
    p1 = agg.p_suc1_rrs(params)
    pk = rel.pmf_k1_rrs(params, p1)
    ctx = rel.relay_context(params, pk)
    p2 = rel.p_suc2_avg(params, ctx)
    k_suc = _successful_mtds(params, ctx)
    return MetricsReport(
        p_occupy=p_o,
        p_nondrop=p_nd,
        p_suc1=p1,
        p_suc2=p2,
        pmf_k1=pk,
        p_mtd_success=p_nd * p1 * p2,
        avg_successful_mtds=k_suc,
        p_channel_util=p_o * p1 * p2,
        successful_mtds_per_km2=params.lambda_a * k_suc * KM2,
    )


def evaluate_crs(params: NetworkParams, truncation_terms: int = agg.DEFAULT_TRUNCATION,
                 jensen: bool = True) -> MetricsReport:
    """CRS metrics; non-drop and aggregation success are coupled through ``K``."""
    n, m = params.n_channels, params.m_bar
    p_o = agg.p_occupy(params)
    p_nd = agg.p_nondrop(params)
    p1_r = agg.p_suc1_rrs(params)
    p1_c = agg.p_suc1_crs(params, truncation_terms, jensen)
    ks, pmf, pc, _ = agg.crs_conditional_table(params, truncation_terms, jensen)
    cond = dict(zip(ks.tolist(), pc.tolist()))
    pk = rel.pmf_k1_crs(params, p1_r, lambda k: cond[k], truncation_terms)
    ctx = rel.relay_context(params, pk)
    p2 = rel.p_suc2_avg(params, ctx)
    k_suc = _successful_mtds(params, ctx)

    small = float(special.gammaincc(n + 1, m))  # P(K <= N)
    suc_head = small * p1_r + math.fsum(n / ks * pc * pmf)
    # E[K; K <= N] / N
    occ_small = m / n * float(special.gammaincc(n, m))
    util_head = occ_small * p1_r + math.fsum(pc * pmf)
    return MetricsReport(
        p_occupy=p_o,
        p_nondrop=p_nd,
        p_suc1=p1_c,
        p_suc2=p2,
        pmf_k1=pk,
        p_mtd_success=min(1.0, suc_head * p2),
        avg_successful_mtds=k_suc,
        p_channel_util=min(1.0, util_head * p2),
        successful_mtds_per_km2=params.lambda_a * k_suc * KM2,
    )


def evaluate(params: NetworkParams, scheme=SchedulingScheme.RRS, **kw) -> MetricsReport:
    scheme = SchedulingScheme.parse(scheme)
    return evaluate_rrs(params) if scheme is SchedulingScheme.RRS else evaluate_crs(params, **kw)


@dataclass(frozen=True)
class SweepPoint:
    x: float
    params: NetworkParams
    report: MetricsReport | None
    error: str | None = None


def sweep(params: NetworkParams, axis: str, grid, scheme=SchedulingScheme.RRS,
          workers: int = 1) -> list[SweepPoint]:
    """Evaluate one report per grid value of ``axis``; failures are recorded, not raised."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
    grid = list(grid)
    if not grid:
        raise ValueError("sweep grid is empty")
    scheme = SchedulingScheme.parse(scheme)

    def one(x):
        p = params.with_(**{axis: x})
        try:
            return SweepPoint(x, p, evaluate(p, scheme))
        except (ArithmeticError, ValueError) as exc:
            log.warning("sweep point %s=%s failed: %s", axis, x, exc)
            return SweepPoint(x, p, None, f"{type(exc).__name__}: {exc}")

    if workers <= 1:
        return [one(x) for x in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, grid))
