"""Seeded k-means (Lloyd) shared by misclassified grouping and dense-area discovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from querysteer.dataset import Dataset

MAX_ITERATIONS = 100


class ClusterError(Exception):
    pass


@dataclass
class Cluster:
    """Centroid plus members; radius in normalized coordinate units (0-100 scale)."""

    centroid: np.ndarray
    member_idx: np.ndarray  # positions into the fitted point set
    radius: float


@dataclass
class ClusterLevels:
    """Clusterings ordered coarse to fine (strictly increasing k)."""

    ks: tuple
    levels: list  # list[list[Cluster]]

    def __post_init__(self):
        ks = tuple(self.ks)
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ClusterError(f"cluster counts must strictly increase, got {ks}")
        self.ks = ks


def _plusplus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    d2 = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[i:] = points[int(rng.integers(n))]
            break
        probs = d2 / total
        choice = int(rng.choice(n, p=probs))
        centroids[i] = points[choice]
        d2 = np.minimum(d2, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def _assign(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels and squared distances, chunked for memory.

    The label search runs in float32 (coordinates live in [0, 100], well within
    float32 precision for an argmin); per-point distances are recomputed in
    float64 against the chosen centroid.
    """
    n, k = points.shape[0], centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    pts32 = points.astype(np.float32, copy=False)
    cen32 = centroids.astype(np.float32)
    c_sq = np.sum(cen32 * cen32, axis=1)
    chunk = max(1, int(40_000_000 // max(k, 1)))
    for s in range(0, n, chunk):
        block = pts32[s : s + chunk]
        d2 = block @ cen32.T
        d2 *= -2.0
        d2 += c_sq[None, :]
        labels[s : s + chunk] = np.argmin(d2, axis=1)
    diff = points - centroids[labels]
    best = np.sum(diff * diff, axis=1)
    return labels, best


def _assign_exact(points: np.ndarray, centroids: np.ndarray):
    """Full float64 assignment; restores the exact nearest-centroid invariant."""
    n, k = points.shape[0], centroids.shape[0]
    labels = np.empty(n, dtype=np.int64)
    c_sq = np.sum(centroids * centroids, axis=1)
    chunk = max(1, int(20_000_000 // max(k, 1)))
    for s in range(0, n, chunk):
        block = points[s : s + chunk]
        d2 = c_sq[None, :] - 2.0 * block @ centroids.T
        labels[s : s + chunk] = np.argmin(d2, axis=1)
    diff = points - centroids[labels]
    return labels, np.sum(diff * diff, axis=1)


def kmeans(points, k: int, seed: int) -> list[Cluster]:
    """Deterministic Lloyd iterations from k-means++ seeding.

    Empty clusters are re-seeded from the current farthest point; total
    within-cluster squared distance is asserted non-increasing per iteration.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ClusterError("points must be a non-empty 2-D array")
    n = points.shape[0]
    if not (1 <= k <= n):
        raise ClusterError(f"k must satisfy 1 <= k <= {n}, got {k}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centroids = _plusplus_seed(points, k, rng)
    labels, d2 = _assign(points, centroids)
    prev_cost = float(d2.sum())
    d = points.shape[1]
    for _ in range(MAX_ITERATIONS):
        sizes = np.bincount(labels, minlength=k)
        sums = np.empty((k, d))
        for j in range(d):
            sums[:, j] = np.bincount(labels, weights=points[:, j], minlength=k)
        occupied = sizes > 0
        centroids[occupied] = sums[occupied] / sizes[occupied, None]
        for c in np.flatnonzero(~occupied):
            far = int(np.argmax(d2))
            centroids[c] = points[far]
            d2[far] = 0.0
        new_labels, d2 = _assign(points, centroids)
        cost = float(d2.sum())
        assert cost <= prev_cost + 1e-6 * max(prev_cost, 1.0), "Lloyd cost increased"
        prev_cost = cost
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    labels, d2 = _assign_exact(points, centroids)

    clusters = []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        centroid = points[members].mean(axis=0) if members.size else centroids[c]
        radius = (
            float(np.max(np.linalg.norm(points[members] - centroid, axis=1)))
            if members.size
            else 0.0
        )
        clusters.append(Cluster(centroid=centroid, member_idx=members, radius=radius))
    return clusters


def build_cluster_levels(
    ds: Dataset, ks, seed: int, sample_cap: int = 50_000
) -> ClusterLevels:
    """Independent k-means per level over a capped uniform subsample."""
    ks = tuple(ks)
    points = fit_points(ds, seed, sample_cap)
    levels = [
        kmeans(points, k, seed=_level_seed(seed, i)) for i, k in enumerate(ks)
    ]
    return ClusterLevels(ks=ks, levels=levels)


def fit_points(ds: Dataset, seed: int, sample_cap: int = 50_000) -> np.ndarray:
    if ds.n <= sample_cap:
        return ds.tuples
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC1)))
    idx = rng.choice(ds.n, size=sample_cap, replace=False)
    return ds.tuples[idx]


def _level_seed(seed: int, level: int) -> int:
    return int(np.random.SeedSequence((seed, 0x5EED, level)).generate_state(1)[0])


def default_cluster_ks(betas, d: int) -> tuple:
    """Mirror the grid cell counts: k at level ℓ equals β_ℓ^d."""
    return tuple(b ** d for b in betas)
