"""Monte-Carlo engine for the two-phase network.

Each realization draws a fresh topology and fresh fading from its own
generator, seeded by ``(master_seed, realization_index)``, so results do not
depend on how realizations are spread over workers. Tallies are kept per
realization and reduced in index order.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .params import NetworkParams, Pmf, SchedulingScheme

log = logging.getLogger(__name__)

__all__ = [
    "SimConfig",
    "MetricEstimate",
    "SimEstimate",
    "DegenerateTopologyError",
    "run_realization",
    "run_tallies",
    "estimate",
    "estimate_multi",
    "conditional_phase1_estimate",
    "worker_count",
    "write_estimate_csv",
    "write_tallies_csv",
]

MAX_RESAMPLES = 100
# cap on (receivers x interferers) entries handled per chunk
CHUNK_ENTRIES = 2_000_000
METRICS = (
    "p_occupy",
    "p_nondrop",
    "p_suc1",
    "p_suc2",
    "p_suc2_aggregator",
    "p_nondrop_mtd",
    "p_mtd_success",
    "avg_successful_mtds",
    "p_channel_util",
    "successful_mtds_per_km2",
    "p_void",
)
BASE_COLUMNS = ("resamples", "n_agg", "n_mtd", "n_occ", "sum_nondrop", "n_nonempty", "sum_frac1",
                "n_sir1", "n_active", "n_bs", "n_void", "n_busy_bs")
TW_COLUMNS = ("n_relay", "n_success", "sum_bs_frac")


class DegenerateTopologyError(RuntimeError):
    """Raised when a realization keeps producing no base station."""


@dataclass(frozen=True)
class SimConfig:
    n_runs: int = 50_000
    master_seed: int = 0
    r_bs_sim: float = 3000.0
    r_agg_sim: float = 6000.0
    measurement_radius: float = 2000.0
    scheme: SchedulingScheme = SchedulingScheme.RRS

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchedulingScheme.parse(self.scheme))
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if not 0 < self.measurement_radius <= self.r_bs_sim <= self.r_agg_sim:
            raise ValueError("need 0 < measurement_radius <= r_bs_sim <= r_agg_sim")

    @classmethod
    def table1(cls, **kw) -> "SimConfig":
        return cls(**kw)

    @classmethod
    def desk(cls, **kw) -> "SimConfig":
        base = dict(n_runs=10_000, r_bs_sim=2000.0, r_agg_sim=4000.0, measurement_radius=1000.0)
        base.update(kw)
        return cls(**base)

    def with_(self, **kw) -> "SimConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class MetricEstimate:
    mean: float
    stderr: float
    n: int


@dataclass(frozen=True, eq=False)
class SimEstimate:
    metrics: dict
    k1_counts: np.ndarray
    resamples: int
    tallies: np.ndarray | None = field(default=None, repr=False, compare=False)
    columns: tuple = field(default=(), repr=False, compare=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimEstimate):
            return NotImplemented
        return (self.metrics == other.metrics and self.resamples == other.resamples
                and np.array_equal(self.k1_counts, other.k1_counts))

    __hash__ = None

    def __getitem__(self, name) -> MetricEstimate:
        return self.metrics[name]

    @property
    def pmf_k1(self) -> Pmf:
        total = self.k1_counts.sum()
        return Pmf(np.arange(len(self.k1_counts)), self.k1_counts / total)


def worker_count() -> int:
    env = os.environ.get("MMTC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"MMTC_THREADS must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ValueError(f"MMTC_THREADS must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def _columns(n: int, n_tw: int) -> tuple:
    cols = list(BASE_COLUMNS)
    for t in range(n_tw):
        cols += [f"{c}_{t}" for c in TW_COLUMNS]
    cols += [f"k1_{k}" for k in range(n + 1)]
    return tuple(cols)


# ---------------------------------------------------------------------------
# one realization


def _schedule(real, params, scheme, rng):
    """Pick up to N MTDs per cluster and give them distinct random channels.

    Returns ``(selected MTD indices, channel of each, desired gain of each)``.
    """
    n = params.n_channels
    total = len(real.mtd_parent)
    gains = rng.gamma(params.m1, 1.0 / params.m1, total)
    priority = rng.random(total)
    perms = np.argsort(rng.random((len(real.agg_points), n)), axis=1)
    key = priority if scheme is SchedulingScheme.RRS else gains
    order = np.lexsort((-key, real.mtd_parent))
    starts = np.concatenate(([0], np.cumsum(real.cluster_sizes)[:-1]))
    parent_sorted = real.mtd_parent[order]
    rank = np.arange(total) - starts[parent_sorted]
    keep = rank < n
    sel = order[keep]
    chan = perms[parent_sorted[keep], rank[keep]]
    return sel, chan, gains[sel]


def _phase1(real, params, sel, chan, receivers, rng):
    """Aggregation-phase interference on every channel of each receiver aggregator."""
    n, alpha = params.n_channels, params.alpha
    src = real.mtd_points[sel]
    sx, sy = np.ascontiguousarray(src[:, 0]), np.ascontiguousarray(src[:, 1])
    src_parent = real.mtd_parent[sel]  # non-decreasing: ``sel`` is grouped by cluster
    tx_power = real.mtd_offset[sel] ** alpha  # full channel inversion
    out = np.zeros((len(receivers), n))
    if len(sel) == 0 or len(receivers) == 0:
        return out
    first = np.searchsorted(src_parent, receivers, side="left")
    last = np.searchsorted(src_parent, receivers, side="right")
    step = max(1, CHUNK_ENTRIES // len(sel))
    for a in range(0, len(receivers), step):
        rec = receivers[a:a + step]
        pts = real.agg_points[rec]
        d2 = pts[:, 0, None] - sx
        d2 *= d2
        dy = pts[:, 1, None] - sy
        dy *= dy
        d2 += dy
        if alpha == 4.0:
            d2 *= d2
        else:
            d2 **= alpha / 2
        contrib = rng.standard_exponential(size=d2.shape)
        contrib *= tx_power
        contrib /= d2
        # drop each receiver's own cluster
        f, l = first[a:a + step], last[a:a + step]
        rows = np.repeat(np.arange(len(rec)), l - f)
        cols = np.arange(len(rows)) - np.repeat(np.cumsum(l - f) - (l - f), l - f) + np.repeat(f, l - f)
        contrib[rows, cols] = 0.0
        flat = (np.arange(len(rec))[:, None] * n + chan[None, :]).ravel()
        out[a:a + step] = np.bincount(flat, weights=contrib.ravel(), minlength=len(rec) * n).reshape(-1, n)
    return out


def _draw_realization(params, config, rng, fixed_k):
    for attempt in range(MAX_RESAMPLES):
        real = geometry.sample_realization(params, config.r_bs_sim, config.r_agg_sim, rng, fixed_k)
        if len(real.bs_points):
            return real, attempt
    raise DegenerateTopologyError(f"no base station after {MAX_RESAMPLES} topology draws")


def run_realization(params: NetworkParams, config: SimConfig, realization_index: int,
                    tw_values=None, fixed_k: int | None = None) -> np.ndarray:
    """Tallies of one realization as a float vector (layout from ``_columns``)."""
    tws = [params.resource_tw] if tw_values is None else list(tw_values)
    n, alpha = params.n_channels, params.alpha
    rng = np.random.default_rng([config.master_seed, realization_index])
    real, resamples = _draw_realization(params, config, rng, fixed_k)
    if resamples:
        log.info("realization %d: resampled topology %d time(s)", realization_index, resamples)

    sel, chan, gain = _schedule(real, params, config.scheme, rng)
    r2 = (real.agg_points**2).sum(axis=1)
    measured = r2 <= config.measurement_radius**2
    receivers = np.flatnonzero(real.relay_mask if fixed_k is None else measured)
    interference = _phase1(real, params, sel, chan, receivers, rng)

    # phase-1 outcome of every scheduled MTD whose aggregator is a receiver
    row = np.full(len(real.agg_points), -1)
    row[receivers] = np.arange(len(receivers))
    sel_parent = real.mtd_parent[sel]
    mine = row[sel_parent] >= 0
    ok = np.zeros(len(sel), dtype=bool)
    ok[mine] = gain[mine] >= params.gamma1 * interference[row[sel_parent[mine]], chan[mine]]
    k1 = np.bincount(sel_parent[ok], minlength=len(real.agg_points))

    sizes = real.cluster_sizes
    occ = np.minimum(sizes, n)
    m = measured
    nonempty = m & (sizes > 0)
    active_m = m & (k1 > 0)
    vec = dict(
        resamples=resamples,
        n_agg=m.sum(),
        n_mtd=sizes[m].sum(),
        n_occ=occ[m].sum(),
        sum_nondrop=math.fsum(n / np.maximum(sizes[m], n)),
        n_nonempty=nonempty.sum(),
        sum_frac1=math.fsum(k1[nonempty] / occ[nonempty]),
        n_sir1=k1[m].sum(),
        n_active=active_m.sum(),
        n_bs=0,
        n_void=0,
        n_busy_bs=0,
    )
    tail = []
    if fixed_k is None:
        relay_stats = _phase2(real, params, config, k1, active_m, tws, rng)
        vec["n_bs"], vec["n_void"], vec["n_busy_bs"] = relay_stats[0]
        for row_tw in relay_stats[1]:
            tail += list(row_tw)
    else:
        tail = [0] * (len(TW_COLUMNS) * len(tws))
    hist = np.bincount(k1[m], minlength=n + 1)
    return np.array([float(vec[c]) for c in BASE_COLUMNS] + [float(x) for x in tail]
                    + hist.astype(float).tolist())


def _phase2(real, params, config, k1, active_measured, tws, rng):
    """Relaying outcomes.

    Observed blocks are those of measured active aggregators plus every active
    aggregator of a busy BS inside the measurement window, so that both the
    per-aggregator and the per-BS views can be tallied.
    """
    alpha = params.alpha
    bs = real.bs_points
    nb = len(bs)
    active = real.relay_mask & (k1 > 0)
    act_idx = np.flatnonzero(active)
    cell = real.agg_to_bs[act_idx]
    na = np.bincount(cell, minlength=nb)
    in_window = (bs**2).sum(axis=1) <= config.measurement_radius**2
    busy_window = in_window & (na > 0)
    bs_stats = (int(in_window.sum()), int((in_window & (na == 0)).sum()), int(busy_window.sum()))

    watched = active_measured.copy()
    watched[act_idx[busy_window[cell]]] = True
    obs = np.flatnonzero(watched)
    order = np.argsort(cell, kind="stable")
    members = act_idx[order]
    starts = np.concatenate(([0], np.cumsum(na)[:-1]))
    busy = np.flatnonzero(na > 0)
    # each observed block sees one uniformly chosen active aggregator per other busy cell
    pick = starts[busy][None, :] + np.floor(rng.random((len(obs), len(busy))) * na[busy][None, :]).astype(np.int64)
    intf = members[pick]
    own_bs = real.agg_to_bs[obs]
    rep_pts = real.agg_points[intf]
    rep_dist2 = ((rep_pts - bs[real.agg_to_bs[intf]]) ** 2).sum(axis=2)
    d2 = ((rep_pts - bs[own_bs][:, None, :]) ** 2).sum(axis=2)
    fade = rng.standard_exponential(size=d2.shape)
    contrib = fade * (rep_dist2 / d2) ** (alpha / 2)
    contrib[busy[None, :] == own_bs[:, None]] = 0.0
    i2 = contrib.sum(axis=1)
    h2 = rng.gamma(params.m2, 1.0 / params.m2, len(obs))

    k1_obs = k1[obs]
    is_measured = active_measured[obs]
    in_busy_window = busy_window[own_bs]
    load = params.payload_d * k1_obs * na[own_bs] * math.log(2.0)
    per_tw = []
    for tw in tws:
        with np.errstate(over="ignore"):
            g2 = np.expm1(load / tw)
        passed = h2 >= g2 * i2
        mp = passed & is_measured
        # per-BS fraction of its active aggregators that relay successfully
        frac = np.bincount(own_bs[in_busy_window], weights=passed[in_busy_window], minlength=nb)
        frac = frac[busy_window] / na[busy_window]
        per_tw.append((int(mp.sum()), int(k1_obs[mp].sum()), math.fsum(frac)))
    return bs_stats, per_tw


# ---------------------------------------------------------------------------
# many realizations


def _run_range(args):
    params, config, lo, hi, tws, fixed_k = args
    return np.stack([run_realization(params, config, i, tws, fixed_k) for i in range(lo, hi)])


def run_tallies(params: NetworkParams, config: SimConfig, tw_values=None, fixed_k=None,
                workers: int | None = None) -> np.ndarray:
    """Per-realization tallies, one row per realization in index order."""
    tws = [params.resource_tw] if tw_values is None else list(tw_values)
    workers = worker_count() if workers is None else workers
    n_runs = config.n_runs
    if workers <= 1 or n_runs < 2 * workers:
        return _run_range((params, config, 0, n_runs, tws, fixed_k))
    chunk = max(1, math.ceil(n_runs / (workers * 4)))
    jobs = [(params, config, lo, min(n_runs, lo + chunk), tws, fixed_k) for lo in range(0, n_runs, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_range, jobs))
    return np.concatenate(parts)


def _ratio(num, den):
    n = len(num)
    total = den.sum()
    if total == 0:
        return MetricEstimate(math.nan, math.nan, n)
    r = num.sum() / total
    if n < 2:
        return MetricEstimate(float(r), math.nan, n)
    z = num - r * den
    se = float(np.std(z, ddof=1) / math.sqrt(n) / den.mean())
    return MetricEstimate(float(r), se, n)


def _mean(x):
    n = len(x)
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return MetricEstimate(float(x.mean()), se, n)


def _summarize(params, config, tallies, t_index, n_tw) -> SimEstimate:
    cols = _columns(params.n_channels, n_tw)
    col = {c: tallies[:, i] for i, c in enumerate(cols)}
    n = params.n_channels
    relay, success = col[f"n_relay_{t_index}"], col[f"n_success_{t_index}"]
    bs_frac = col[f"sum_bs_frac_{t_index}"]
    area_km2 = math.pi * config.measurement_radius**2 / 1e6
    metrics = {
        "p_occupy": _ratio(col["n_occ"], n * col["n_agg"]),
        "p_nondrop": _ratio(col["sum_nondrop"], col["n_agg"]),
        "p_suc1": _ratio(col["sum_frac1"], col["n_nonempty"]),
        "p_suc2": _ratio(bs_frac, col["n_busy_bs"]),
        "p_suc2_aggregator": _ratio(relay, col["n_active"]),
        "p_nondrop_mtd": _ratio(col["n_occ"], col["n_mtd"]),
        "p_mtd_success": _ratio(success, col["n_mtd"]),
        "avg_successful_mtds": _ratio(success, col["n_agg"]),
        "p_channel_util": _ratio(success, n * col["n_agg"]),
        "successful_mtds_per_km2": _mean(success / area_km2),
        "p_void": _ratio(col["n_void"], col["n_bs"]),
    }
    k1_counts = tallies[:, len(cols) - (n + 1):].sum(axis=0)
    return SimEstimate(metrics, k1_counts, int(col["resamples"].sum()), tallies, cols)


def estimate_multi(params: NetworkParams, config: SimConfig, tw_values,
                   workers: int | None = None) -> dict:
    """Estimates for several ``TW`` values that share every realization."""
    tws = list(tw_values)
    tallies = run_tallies(params, config, tws, workers=workers)
    if config.n_runs < 2:
        warnings.warn("standard errors are undefined for n_runs = 1 (reported as NaN)", stacklevel=2)
    return {tw: _summarize(params.with_(resource_tw=tw), config, tallies, i, len(tws))
            for i, tw in enumerate(tws)}


def estimate(params: NetworkParams, config: SimConfig, workers: int | None = None) -> SimEstimate:
    if config.n_runs < 2:
        warnings.warn("standard errors are undefined for n_runs = 1 (reported as NaN)", stacklevel=2)
    tallies = run_tallies(params, config, workers=workers)
    return _summarize(params, config, tallies, 0, 1)


def conditional_phase1_estimate(params: NetworkParams, config: SimConfig, fixed_k: int,
                                workers: int | None = None) -> MetricEstimate:
    """Per-channel aggregation success with every cluster holding exactly ``fixed_k`` MTDs."""
    if fixed_k < 1:
        raise ValueError("fixed_k must be >= 1")
    tallies = run_tallies(params, config, fixed_k=fixed_k, workers=workers)
    cols = _columns(params.n_channels, 1)
    return _ratio(tallies[:, cols.index("sum_frac1")], tallies[:, cols.index("n_nonempty")])


# ---------------------------------------------------------------------------
# output


def write_estimate_csv(est: SimEstimate, path, header: list[str] = ()) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "mean", "stderr", "n"])
        for name in METRICS:
            e = est.metrics[name]
            w.writerow([name, repr(e.mean), repr(e.stderr), e.n])


def write_tallies_csv(est: SimEstimate, path, header: list[str] = ()) -> None:
    """Raw per-realization tallies, one row per realization."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["realization", *est.columns])
        for i, row in enumerate(est.tallies):
            w.writerow([i, *(repr(float(v)) for v in row)])
