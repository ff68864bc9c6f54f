"""Ground-truth oracle: hidden target queries, labeling, synthetic spaces.

The same region-membership predicate backs both the labeling oracle and
F-measure evaluation, so benchmark truth cannot drift from what the simulated
user said.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from querysteer.dataset import (
    DOMAIN_MAX,
    DOMAIN_MIN,
    AttributeSpec,
    Dataset,
    Region,
    dataset_from_normalized,
)
from querysteer.tree import IRRELEVANT, RELEVANT, SIMILAR

SIZE_BANDS = {"small": (1.0, 3.0), "medium": (4.0, 6.0), "large": (7.0, 9.0)}

PLACEMENT_ANY = "any"
PLACEMENT_DENSE = "dense"
PLACEMENT_MIXQ = "mixq"

_BLOB_COUNT = 3
_BLOB_SIGMA = 2.5
_BLOB_MASS = 0.95
_BLOB_BOX_SIGMAS = 3.5


class SimUserError(Exception):
    pass


@dataclass(frozen=True)
class SimUserConfig:
    similarity_threshold: float = 0.10  # fraction of the normalized domain
    similarity_enabled: bool = True

    def __post_init__(self):
        if self.similarity_threshold < 0:
            raise SimUserError("similarity threshold must be >= 0")


@dataclass
class TargetQuery:
    """The hidden union of relevant areas (closed intervals, normalized)."""

    regions: list
    size_class: str
    count: int

    def contains_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        mask = np.zeros(points.shape[0], dtype=bool)
        for r in self.regions:
            mask |= r.contains_points(points)
        return mask

    def contains(self, point) -> bool:
        return bool(self.contains_points(np.asarray(point)[None, :])[0])

    def to_dict(self) -> dict:
        return {
            "size_class": self.size_class,
            "count": self.count,
            "regions": [r.to_dict() for r in self.regions],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TargetQuery":
        return cls(
            regions=[Region.from_dict(r) for r in doc["regions"]],
            size_class=doc["size_class"],
            count=doc["count"],
        )


def _density_ratio(ds: Dataset, region: Region) -> tuple[float, int]:
    inside = int(region.contains_points(ds.tuples).sum())
    vol_frac = region.volume() / (DOMAIN_MAX ** ds.d)
    if vol_frac <= 0:
        return 0.0, inside
    return (inside / ds.n) / vol_frac, inside


def _placement_ok(ds, region, placement) -> bool:
    if placement == PLACEMENT_ANY or ds is None:
        return True
    ratio, inside = _density_ratio(ds, region)
    if inside < 20:
        return False
    if placement == PLACEMENT_DENSE:
        return ratio >= 1.0
    if placement == PLACEMENT_MIXQ:
        return 0.05 <= ratio <= 0.9
    raise SimUserError(f"unknown placement {placement!r}")


def generate_target(
    d: int,
    count: int,
    size_class: str,
    seed: int,
    ds: Dataset | None = None,
    placement: str = PLACEMENT_ANY,
    max_tries: int = 5000,
) -> TargetQuery:
    """Pairwise-disjoint relevant areas with widths drawn in the class band."""
    if size_class not in SIZE_BANDS:
        raise SimUserError(f"unknown size class {size_class!r}")
    if count < 1:
        raise SimUserError("count must be >= 1")
    lo_w, hi_w = SIZE_BANDS[size_class]
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7A6)))
    for _ in range(max_tries):
        regions = []
        ok = True
        for _ in range(count):
            widths = rng.uniform(lo_w, hi_w, d)
            lows = rng.uniform(0.0, DOMAIN_MAX - widths)
            region = Region(lows, lows + widths)
            if any(region.overlaps(r) for r in regions) or not _placement_ok(
                ds, region, placement
            ):
                ok = False
                break
            regions.append(region)
        if ok:
            return TargetQuery(regions=regions, size_class=size_class, count=count)
    raise SimUserError(
        f"could not place {count} disjoint {size_class} areas after {max_tries} tries"
    )


def label(target: TargetQuery, point) -> str:
    return RELEVANT if target.contains(point) else IRRELEVANT


def _gaps_to_region(region: Region, point: np.ndarray) -> np.ndarray:
    return np.maximum(
        np.maximum(region.lows - point, point - region.highs), 0.0
    )


def label_with_similarity(target: TargetQuery, point, cfg: SimUserConfig):
    """Label plus the qualifying dimensions for near-misses.

    A point is "similar" when, for some relevant area, it is out of range in
    exactly one dimension by less than the threshold while in range on all the
    others; every dimension that qualifies against any area is reported.
    """
    point = np.asarray(point, dtype=np.float64)
    if target.contains(point):
        return RELEVANT, None
    if not cfg.similarity_enabled:
        return IRRELEVANT, None
    limit = cfg.similarity_threshold * DOMAIN_MAX
    dims = set()
    for region in target.regions:
        gaps = _gaps_to_region(region, point)
        out = np.flatnonzero(gaps > 0)
        if out.size == 1 and gaps[out[0]] < limit:
            dims.add(int(out[0]))
    if dims:
        return SIMILAR, tuple(sorted(dims))
    return IRRELEVANT, None


def _blob_params(seed: int, d: int):
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB10B)))
    centers = rng.uniform(15.0, 85.0, (_BLOB_COUNT, d))
    return centers, _BLOB_SIGMA


def skew_blob_boxes(d: int, seed: int) -> list:
    """Declared blob boxes of the skewed generator (centers ± 3.5σ)."""
    centers, sigma = _blob_params(seed, d)
    half = _BLOB_BOX_SIGMAS * sigma
    return [Region.box(c, half) for c in centers]


def _skewed_matrix(rng, n: int, d: int, centers, sigma) -> np.ndarray:
    n_blob = int(round(_BLOB_MASS * n))
    per = [n_blob // _BLOB_COUNT] * _BLOB_COUNT
    per[0] += n_blob - sum(per)
    parts = [
        rng.normal(centers[i], sigma, (per[i], d)) for i in range(_BLOB_COUNT)
    ]
    parts.append(rng.uniform(DOMAIN_MIN, DOMAIN_MAX, (n - n_blob, d)))
    out = np.vstack(parts)
    return np.clip(out, DOMAIN_MIN, DOMAIN_MAX)


def synth_dataset(kind: str, n: int, d: int, seed: int) -> Dataset:
    """Uniform, skewed (tight blobs + uniform residue), or hybrid space."""
    if n < 1:
        raise SimUserError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xDA7A)))
    if kind == "uniform":
        matrix = rng.uniform(DOMAIN_MIN, DOMAIN_MAX, (n, d))
    elif kind == "skewed":
        centers, sigma = _blob_params(seed, d)
        matrix = _skewed_matrix(rng, n, d, centers, sigma)
    elif kind == "hybrid":
        if d < 2:
            raise SimUserError("hybrid space needs d >= 2")
        centers, sigma = _blob_params(seed, d)
        matrix = np.empty((n, d))
        matrix[:, 0] = rng.uniform(DOMAIN_MIN, DOMAIN_MAX, n)
        skew = _skewed_matrix(rng, n, d - 1, centers[:, 1:], sigma)
        matrix[:, 1:] = skew
    else:
        raise SimUserError(f"unknown dataset kind {kind!r}")
    schema = [AttributeSpec(f"attr{j}", DOMAIN_MIN, DOMAIN_MAX) for j in range(d)]
    return dataset_from_normalized(matrix, schema=schema)
