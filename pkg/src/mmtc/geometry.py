"""Spatial sampling: HPPPs on disks, Matérn cluster MTDs and nearest-BS association.

Point sets are ``(n, 2)`` float arrays in metres; ``Point2`` is the scalar form
used at API boundaries.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Point2",
    "NetworkRealization",
    "sample_disk",
    "sample_hppp",
    "sample_cluster",
    "sample_clusters",
    "associate_nearest",
    "sample_realization",
    "serving_distance_cdf",
    "write_realization_csv",
]


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


def sample_disk(n: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform on a disk centred at the origin (radius via √U)."""
    r = radius * np.sqrt(rng.random(n))
    theta = rng.random(n) * (2 * np.pi)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_hppp(density: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP of ``density`` (per m²) restricted to a disk."""
    if density < 0:
        raise ValueError("density must be >= 0")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    n = rng.poisson(density * math.pi * radius**2)
    return sample_disk(n, radius, rng)


def sample_cluster(center, m_bar: float, r_s: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson(``m_bar``) daughters uniform on the disk of radius ``r_s`` around ``center``."""
    if m_bar < 0:
        raise ValueError("m_bar must be >= 0")
    c = center.as_array() if isinstance(center, Point2) else np.asarray(center, dtype=float)
    return sample_disk(rng.poisson(m_bar), r_s, rng) + c


def sample_clusters(centers: np.ndarray, m_bar: float, r_s: float, rng: np.random.Generator,
                    fixed_k: int | None = None):
    """Daughters of every parent in ``centers``.

    Returns ``(points, parent, offset_dist, counts)`` with daughters grouped by
    parent in order. ``fixed_k`` replaces the Poisson count.
    """
    n = len(centers)
    counts = np.full(n, fixed_k, dtype=np.int64) if fixed_k is not None else rng.poisson(m_bar, n)
    parent = np.repeat(np.arange(n), counts)
    total = int(counts.sum())
    dist = r_s * np.sqrt(rng.random(total))
    theta = rng.random(total) * (2 * np.pi)
    pts = centers[parent] + np.column_stack((dist * np.cos(theta), dist * np.sin(theta)))
    return pts, parent, dist, counts


def associate_nearest(agg_points: np.ndarray, bs_points: np.ndarray) -> np.ndarray:
    """Index of the nearest BS for each aggregator; ties go to the lowest index."""
    if len(bs_points) == 0:
        raise ValueError("cannot associate: no base stations")
    if len(agg_points) == 0:
        return np.zeros(0, dtype=np.int64)
    d2 = ((agg_points[:, None, :] - bs_points[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def serving_distance_cdf(r, lambda_b: float):
    """CDF of the distance to the nearest point of a PPP, ``1 - exp(-π λ r²)``."""
    return -np.expm1(-math.pi * lambda_b * np.asarray(r, dtype=float) ** 2)


@dataclass(frozen=True)
class NetworkRealization:
    bs_points: np.ndarray
    agg_points: np.ndarray
    mtd_points: np.ndarray
    mtd_parent: np.ndarray
    mtd_offset: np.ndarray
    cluster_sizes: np.ndarray
    agg_to_bs: np.ndarray
    relay_mask: np.ndarray  # aggregators inside the BS disk, which take part in relaying

    @property
    def mtd_clusters(self) -> list[np.ndarray]:
        bounds = np.concatenate(([0], np.cumsum(self.cluster_sizes)))
        return [self.mtd_points[a:b] for a, b in zip(bounds[:-1], bounds[1:])]


def sample_realization(params, r_bs: float, r_agg: float, rng: np.random.Generator,
                       fixed_k: int | None = None) -> NetworkRealization:
    """One topology draw; aggregators inside the BS disk are associated to their nearest BS."""
    bs = sample_hppp(params.lambda_b, r_bs, rng)
    agg = sample_hppp(params.lambda_a, r_agg, rng)
    pts, parent, dist, counts = sample_clusters(agg, params.m_bar, params.r_s, rng, fixed_k)
    relay = (agg**2).sum(axis=1) <= r_bs**2
    to_bs = np.full(len(agg), -1, dtype=np.int64)
    if len(bs):
        to_bs[relay] = associate_nearest(agg[relay], bs)
    return NetworkRealization(bs, agg, pts, parent, dist, counts, to_bs, relay)


def write_realization_csv(real: NetworkRealization, path) -> None:
    """Dump a realization as ``entity_type, id, x_m, y_m, parent_id`` rows."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["entity_type", "id", "x_m", "y_m", "parent_id"])
        for i, (x, y) in enumerate(real.bs_points):
            w.writerow(["bs", i, repr(float(x)), repr(float(y)), ""])
        for i, (x, y) in enumerate(real.agg_points):
            parent = int(real.agg_to_bs[i])
            w.writerow(["aggregator", i, repr(float(x)), repr(float(y)), parent if parent >= 0 else ""])
        for i, ((x, y), p) in enumerate(zip(real.mtd_points, real.mtd_parent)):
            w.writerow(["mtd", i, repr(float(x)), repr(float(y)), int(p)])
