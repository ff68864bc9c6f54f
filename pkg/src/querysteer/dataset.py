"""Normalized in-memory exploration space: schema, tuple store, regions, sampling.

Every attribute domain is mapped once, at load time, onto [0, 100]; all other
modules reason in that single coordinate system and only denormalize at the
edges (query text, samples shown to a user).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

DOMAIN_MIN = 0.0
DOMAIN_MAX = 100.0


class DatasetError(Exception):
    """Unusable input file, schema, or sampling request."""


@dataclass(frozen=True)
class AttributeSpec:
    """One exploration attribute and its raw value bounds."""

    name: str
    raw_min: float
    raw_max: float

    def __post_init__(self):
        if not self.name:
            raise DatasetError("attribute name must be non-empty")
        if not (self.raw_min < self.raw_max):
            raise DatasetError(
                f"attribute {self.name!r}: raw_min must be < raw_max, "
                f"got [{self.raw_min}, {self.raw_max}]"
            )

    def normalize(self, values):
        values = np.asarray(values, dtype=np.float64)
        return DOMAIN_MAX * (values - self.raw_min) / (self.raw_max - self.raw_min)

    def denormalize(self, values):
        values = np.asarray(values, dtype=np.float64)
        return self.raw_min + values * (self.raw_max - self.raw_min) / DOMAIN_MAX


def validate_schema(schema) -> tuple:
    schema = tuple(schema)
    if not schema:
        raise DatasetError("schema must have at least one attribute")
    names = [a.name for a in schema]
    if len(set(names)) != len(names):
        raise DatasetError(f"duplicate attribute names in schema: {names}")
    return schema


class Dataset:
    """Immutable store of tuples with every coordinate normalized to [0, 100].

    Rows are float64, one per tuple; ``ids`` are stable opaque identifiers that
    survive space reduction (a reduced dataset keeps its parent's id space so
    full-space oracles stay meaningful).
    """

    def __init__(self, schema, tuples, ids):
        self.schema = validate_schema(schema)
        tuples = np.ascontiguousarray(np.asarray(tuples, dtype=np.float64))
        if tuples.ndim != 2 or tuples.shape[1] != len(self.schema):
            raise DatasetError(
                f"tuple matrix shape {tuples.shape} does not match schema "
                f"of {len(self.schema)} attributes"
            )
        if tuples.shape[0] < 1:
            raise DatasetError("dataset must hold at least one tuple")
        if tuples.min() < DOMAIN_MIN - 1e-9 or tuples.max() > DOMAIN_MAX + 1e-9:
            raise DatasetError("normalized values must lie in [0, 100]")
        self.tuples = np.clip(tuples, DOMAIN_MIN, DOMAIN_MAX)
        self.tuples.setflags(write=False)
        self.ids = np.asarray(ids, dtype=np.int64)
        if self.ids.shape != (tuples.shape[0],):
            raise DatasetError("ids must be one per tuple")
        if len(np.unique(self.ids)) != len(self.ids):
            raise DatasetError("tuple ids must be unique")
        self.ids.setflags(write=False)
        self._id_to_row = None

    @property
    def n(self) -> int:
        return self.tuples.shape[0]

    @property
    def d(self) -> int:
        return self.tuples.shape[1]

    @property
    def attribute_names(self):
        return [a.name for a in self.schema]

    def row_of(self, tuple_id: int) -> np.ndarray:
        if self._id_to_row is None:
            self._id_to_row = {int(t): i for i, t in enumerate(self.ids)}
        try:
            return self.tuples[self._id_to_row[int(tuple_id)]]
        except KeyError:
            raise DatasetError(f"unknown tuple id {tuple_id}") from None

    def denormalize_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = np.empty_like(points)
        for j, attr in enumerate(self.schema):
            out[:, j] = attr.denormalize(points[:, j])
        return out


def dataset_from_normalized(matrix, schema=None, ids=None) -> Dataset:
    """Wrap an already-normalized matrix; default schema is the identity map."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise DatasetError("expected a 2-D matrix")
    if schema is None:
        schema = [
            AttributeSpec(f"attr{j}", DOMAIN_MIN, DOMAIN_MAX)
            for j in range(matrix.shape[1])
        ]
    if ids is None:
        ids = np.arange(matrix.shape[0], dtype=np.int64)
    return Dataset(schema, matrix, ids)


class Region:
    """Axis-aligned hyper-rectangle in normalized space.

    Bounds may be individually strict (excluded); decision-tree paths produce
    intervals of the shape (lo, hi]. Comparisons are vectorized over point
    matrices because region scans back every sampling request.
    """

    __slots__ = ("lows", "highs", "lo_strict", "hi_strict")

    def __init__(self, lows, highs, lo_strict=None, hi_strict=None):
        lows = np.asarray(lows, dtype=np.float64).copy()
        highs = np.asarray(highs, dtype=np.float64).copy()
        if lows.shape != highs.shape or lows.ndim != 1:
            raise DatasetError("region bounds must be matching 1-D vectors")
        np.clip(lows, DOMAIN_MIN, DOMAIN_MAX, out=lows)
        np.clip(highs, DOMAIN_MIN, DOMAIN_MAX, out=highs)
        if np.any(lows > highs):
            raise DatasetError("region requires lo <= hi in every dimension")
        d = lows.shape[0]
        self.lows = lows
        self.highs = highs
        self.lo_strict = (
            np.zeros(d, dtype=bool) if lo_strict is None else np.asarray(lo_strict, dtype=bool).copy()
        )
        self.hi_strict = (
            np.zeros(d, dtype=bool) if hi_strict is None else np.asarray(hi_strict, dtype=bool).copy()
        )
        for arr in (self.lows, self.highs, self.lo_strict, self.hi_strict):
            arr.setflags(write=False)

    @property
    def d(self) -> int:
        return self.lows.shape[0]

    @classmethod
    def full_domain(cls, d: int) -> "Region":
        return cls(np.full(d, DOMAIN_MIN), np.full(d, DOMAIN_MAX))

    @classmethod
    def box(cls, center, half_width) -> "Region":
        """Closed box ``center +- half_width``, clipped to the domain."""
        center = np.asarray(center, dtype=np.float64)
        half = np.broadcast_to(np.asarray(half_width, dtype=np.float64), center.shape)
        return cls(center - half, center + half)

    def contains_points(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        mask = np.ones(points.shape[0], dtype=bool)
        for j in range(self.d):
            col = points[:, j]
            if self.lo_strict[j]:
                mask &= col > self.lows[j]
            else:
                mask &= col >= self.lows[j]
            if self.hi_strict[j]:
                mask &= col < self.highs[j]
            else:
                mask &= col <= self.highs[j]
        return mask

    def contains(self, point) -> bool:
        return bool(self.contains_points(np.asarray(point)[None, :])[0])

    def widths(self) -> np.ndarray:
        return self.highs - self.lows

    def volume(self) -> float:
        return float(np.prod(self.widths()))

    def overlaps(self, other: "Region") -> bool:
        """Closed-interval overlap test (strict flags ignored; measure-zero)."""
        return bool(
            np.all(self.lows <= other.highs) and np.all(other.lows <= self.highs)
        )

    def to_dict(self) -> dict:
        return {
            "lows": self.lows.tolist(),
            "highs": self.highs.tolist(),
            "lo_strict": self.lo_strict.tolist(),
            "hi_strict": self.hi_strict.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Region":
        return cls(doc["lows"], doc["highs"], doc.get("lo_strict"), doc.get("hi_strict"))

    def __repr__(self):
        parts = []
        for j in range(self.d):
            lo_b = "(" if self.lo_strict[j] else "["
            hi_b = ")" if self.hi_strict[j] else "]"
            parts.append(f"{lo_b}{self.lows[j]:g}, {self.highs[j]:g}{hi_b}")
        return f"Region({' x '.join(parts)})"


class DistanceMetric(Enum):
    EUCLIDEAN_NORMALIZED = "euclidean-normalized"


def distance(a, b, metric: DistanceMetric = DistanceMetric.EUCLIDEAN_NORMALIZED) -> float:
    """Euclidean distance rescaled to [0, 1] over the normalized domain."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DatasetError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if metric is not DistanceMetric.EUCLIDEAN_NORMALIZED:
        raise DatasetError(f"unsupported metric {metric}")
    d = a.shape[-1]
    return float(np.sqrt(np.sum((a - b) ** 2)) / (DOMAIN_MAX * np.sqrt(d)))


def distances_to_set(points, refs) -> np.ndarray:
    """Pairwise [0, 1]-scaled distances, rows = points, cols = refs."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    refs = np.atleast_2d(np.asarray(refs, dtype=np.float64))
    if points.shape[1] != refs.shape[1]:
        raise DatasetError("dimension mismatch between point sets")
    d = points.shape[1]
    diff = points[:, None, :] - refs[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2)) / (DOMAIN_MAX * np.sqrt(d))


def load_dataset(path, schema=None, delimiter=None) -> Dataset:
    """Read a delimited text file with a header row and normalize it.

    ``schema`` picks and bounds the exploration attributes; when omitted, every
    column is used and raw bounds are inferred from the data. Constant columns
    cannot be normalized and are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        if delimiter is None:
            try:
                delimiter = csv.Sniffer().sniff(sample, delimiters=",;\t|").delimiter
            except csv.Error:
                delimiter = ","
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            rows.append((lineno, row))
    if not rows:
        raise DatasetError(f"{path}: no data rows")

    if schema is not None:
        schema = validate_schema(schema)
        try:
            col_idx = [header.index(a.name) for a in schema]
        except ValueError as exc:
            raise DatasetError(f"{path}: schema column missing from header: {exc}") from None
        names = [a.name for a in schema]
    else:
        col_idx = list(range(len(header)))
        names = header

    raw = np.empty((len(rows), len(col_idx)), dtype=np.float64)
    for i, (lineno, row) in enumerate(rows):
        for j, c in enumerate(col_idx):
            cell = row[c].strip()
            try:
                raw[i, j] = float(cell)
            except ValueError:
                raise DatasetError(
                    f"{path}:{lineno}: column {names[j]!r}: cannot parse {cell!r} as a number"
                ) from None

    if schema is None:
        attrs = []
        for j, name in enumerate(names):
            lo, hi = float(raw[:, j].min()), float(raw[:, j].max())
            if lo == hi:
                raise DatasetError(
                    f"{path}: column {name!r} is constant ({lo}); cannot normalize"
                )
            attrs.append(AttributeSpec(name, lo, hi))
        schema = tuple(attrs)

    norm = np.empty_like(raw)
    for j, attr in enumerate(schema):
        norm[:, j] = attr.normalize(raw[:, j])
    if norm.min() < -1e-9 or norm.max() > DOMAIN_MAX + 1e-9:
        bad = np.argwhere((norm < -1e-9) | (norm > DOMAIN_MAX + 1e-9))[0]
        raise DatasetError(
            f"{path}: value out of declared raw bounds at data row {int(bad[0]) + 1}, "
            f"column {schema[int(bad[1])].name!r}"
        )
    return Dataset(schema, norm, np.arange(len(rows), dtype=np.int64))


def sample_reduce(ds: Dataset, fraction: float, seed: int) -> Dataset:
    """Uniform per-tuple Bernoulli reduction of the exploration space."""
    if not (0.0 < fraction <= 1.0):
        raise DatasetError(f"fraction must be in (0, 1], got {fraction}")
    if fraction * ds.n < 1.0:
        raise DatasetError(f"fraction {fraction} of {ds.n} tuples expects < 1 row")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mask = rng.random(ds.n) < fraction
    if not mask.any():
        raise DatasetError("reduction selected no tuples; use a larger fraction")
    return Dataset(ds.schema, ds.tuples[mask], ds.ids[mask])


def random_within(ds: Dataset, region: Region, count: int, seed: int, exclude=None):
    """Uniform without-replacement draw of tuples inside ``region``.

    Returns ``(ids, points)``; fewer than ``count`` rows (possibly zero) when
    the region holds fewer qualifying tuples. ``exclude`` drops tuple ids from
    the qualifying pool before drawing.
    """
    if count < 1:
        raise DatasetError(f"count must be >= 1, got {count}")
    mask = region.contains_points(ds.tuples)
    if exclude is not None and len(exclude) > 0:
        mask &= ~np.isin(ds.ids, np.asarray(list(exclude), dtype=np.int64))
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return np.empty(0, dtype=np.int64), np.empty((0, ds.d))
    if idx.size <= count:
        chosen = idx
    else:
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        chosen = rng.choice(idx, size=count, replace=False)
    return ds.ids[chosen].copy(), ds.tuples[chosen].copy()
