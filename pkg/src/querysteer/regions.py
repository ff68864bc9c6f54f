"""Flatten a decision tree into hyper-rectangles and a range-predicate query.

A root-to-leaf path is an intersection of half-spaces; clipped against the
domain box it becomes one axis-aligned region per leaf. Relevant regions are
rendered as a disjunction of per-attribute range conjunctions in raw units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from querysteer.dataset import DOMAIN_MAX, DOMAIN_MIN, Region
from querysteer.tree import IRRELEVANT, RELEVANT, DecisionTree


@dataclass
class RegionSet:
    """Disjoint relevant/irrelevant regions covering the whole domain box."""

    relevant: list = field(default_factory=list)
    irrelevant: list = field(default_factory=list)
    d: int = 0

    def all_regions(self):
        for r in self.relevant:
            yield r, RELEVANT
        for r in self.irrelevant:
            yield r, IRRELEVANT

    def lookup(self, point) -> str:
        point = np.asarray(point, dtype=np.float64)
        for region, label in self.all_regions():
            if region.contains(point):
                return label
        raise ValueError(f"point {point} not covered by any region")

    def relevant_mask(self, points) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        mask = np.zeros(points.shape[0], dtype=bool)
        for region in self.relevant:
            mask |= region.contains_points(points)
        return mask

    def to_dict(self) -> dict:
        return {
            "relevant": [r.to_dict() for r in self.relevant],
            "irrelevant": [r.to_dict() for r in self.irrelevant],
        }


def extract_regions(tree: DecisionTree) -> RegionSet:
    """One region per leaf: split half-spaces intersected with the domain box.

    Left branches contribute inclusive upper bounds (`<= t`), right branches
    strict lower bounds (`> t`); the domain box itself is closed, so lo is
    strict exactly when it came from a split.
    """
    d = tree.d
    rs = RegionSet(d=d)

    def walk(node, lows, highs, lo_strict, hi_strict):
        if node.is_leaf:
            region = Region(lows, highs, lo_strict, hi_strict)
            (rs.relevant if node.label == RELEVANT else rs.irrelevant).append(region)
            return
        j, t = node.attr, node.threshold
        l_high = highs.copy()
        l_hs = hi_strict.copy()
        if t < l_high[j]:
            l_high[j] = t
            l_hs[j] = False
        walk(node.left, lows.copy(), l_high, lo_strict.copy(), l_hs)
        r_low = lows.copy()
        r_ls = lo_strict.copy()
        if t >= r_low[j]:
            r_low[j] = t
            r_ls[j] = True
        walk(node.right, r_low, highs.copy(), r_ls, hi_strict.copy())

    walk(
        tree.root,
        np.full(d, DOMAIN_MIN),
        np.full(d, DOMAIN_MAX),
        np.zeros(d, dtype=bool),
        np.zeros(d, dtype=bool),
    )
    return rs


@dataclass(frozen=True)
class ExtractionQuery:
    """Canonical predicate retrieving the relevant class, in raw units.

    ``text`` is stable byte-for-byte for a given model: dimensions render in
    schema order, regions in lexicographic order of their lower bounds, bounds
    that merely restate the attribute domain are dropped. ``clauses`` mirrors
    the text structurally so the query can be evaluated without re-parsing.
    """

    text: str
    attribute_names: tuple
    clauses: tuple  # per region: (lows_raw, highs_raw, lo_strict, hi_strict)

    @property
    def is_true(self) -> bool:
        return self.text == "TRUE"

    @property
    def is_false(self) -> bool:
        return self.text == "FALSE"

    def matches(self, raw_points) -> np.ndarray:
        """Evaluate the predicate over raw-unit rows (columns in schema order)."""
        raw_points = np.atleast_2d(np.asarray(raw_points, dtype=np.float64))
        if self.is_true:
            return np.ones(raw_points.shape[0], dtype=bool)
        out = np.zeros(raw_points.shape[0], dtype=bool)
        for lows, highs, lo_s, hi_s in self.clauses:
            m = np.ones(raw_points.shape[0], dtype=bool)
            for j in range(len(self.attribute_names)):
                col = raw_points[:, j]
                m &= (col > lows[j]) if lo_s[j] else (col >= lows[j])
                m &= (col < highs[j]) if hi_s[j] else (col <= highs[j])
            out |= m
        return out

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "attributes": list(self.attribute_names),
            "regions": [
                {
                    "lows": list(lo),
                    "highs": list(hi),
                    "lo_strict": list(ls),
                    "hi_strict": list(hs),
                }
                for lo, hi, ls, hs in self.clauses
            ],
        }


def _atom(name: str, op: str, value: float) -> str:
    return f"{name} {op} {value!r}"


def formulate_query(rs: RegionSet, schema) -> ExtractionQuery:
    schema = tuple(schema)
    names = tuple(a.name for a in schema)
    if not rs.relevant:
        return ExtractionQuery(text="FALSE", attribute_names=names, clauses=())

    raw_regions = []
    for region in rs.relevant:
        lows = np.array([a.denormalize(lo) for a, lo in zip(schema, region.lows)])
        highs = np.array([a.denormalize(hi) for a, hi in zip(schema, region.highs)])
        raw_regions.append(
            (
                lows,
                highs,
                region.lo_strict.copy(),
                region.hi_strict.copy(),
                region.lows.copy(),
                region.highs.copy(),
            )
        )
    raw_regions.sort(key=lambda r: tuple(r[0]))

    parts = []
    clauses = []
    for lows, highs, lo_s, hi_s, nlo, nhi in raw_regions:
        atoms = []
        for j, attr in enumerate(schema):
            if nlo[j] > DOMAIN_MIN or lo_s[j]:
                atoms.append(_atom(attr.name, ">" if lo_s[j] else ">=", float(lows[j])))
            if nhi[j] < DOMAIN_MAX or hi_s[j]:
                atoms.append(_atom(attr.name, "<" if hi_s[j] else "<=", float(highs[j])))
        if not atoms:
            # a full-domain relevant region swallows the disjunction
            return ExtractionQuery(text="TRUE", attribute_names=names, clauses=())
        parts.append("(" + " and ".join(atoms) + ")")
        clauses.append(
            (
                tuple(float(v) for v in lows),
                tuple(float(v) for v in highs),
                tuple(bool(v) for v in lo_s),
                tuple(bool(v) for v in hi_s),
            )
        )
    return ExtractionQuery(
        text=" or ".join(parts), attribute_names=names, clauses=tuple(clauses)
    )
