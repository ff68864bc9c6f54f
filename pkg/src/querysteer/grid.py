"""Hierarchical exploration grids: cell geometry, density, zoom bookkeeping.

Levels are β^d lattices of equal-width cells over [0, 100]^d; a session walks
the frontier sampling near cell centers and zooms a cell into the next level
when it yields no relevant object.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from querysteer.dataset import DOMAIN_MAX, Dataset, Region

# cell lifecycle; transitions move only left to right
UNEXPLORED = "unexplored"
SAMPLED = "sampled"
RELEVANT_FOUND = "relevant-found"
ZOOMED = "zoomed"
EMPTY = "empty"

TERMINAL_STATES = frozenset({RELEVANT_FOUND, ZOOMED, EMPTY})

_ALLOWED = {
    UNEXPLORED: {SAMPLED, EMPTY},
    SAMPLED: {RELEVANT_FOUND, ZOOMED, EMPTY},
}


class GridError(Exception):
    pass


@dataclass(frozen=True)
class ExplorationGrid:
    """One exploration level: an implicit β^d lattice."""

    level: int
    beta: int
    d: int

    def __post_init__(self):
        if self.beta < 2:
            raise GridError(f"beta must be >= 2, got {self.beta}")

    @property
    def delta(self) -> float:
        return DOMAIN_MAX / self.beta

    @property
    def num_cells(self) -> int:
        return self.beta ** self.d

    def cell_bounds(self, idx) -> Region:
        lo = np.array(idx, dtype=np.float64) * self.delta
        hi = lo + self.delta
        return Region(lo, hi)

    def cell_center(self, idx) -> np.ndarray:
        return (np.array(idx, dtype=np.float64) + 0.5) * self.delta

    def cell_of(self, point) -> tuple:
        point = np.asarray(point, dtype=np.float64)
        raw = np.floor(point / self.delta).astype(int)
        return tuple(np.clip(raw, 0, self.beta - 1))

    def indices(self):
        return itertools.product(range(self.beta), repeat=self.d)


def build_levels(d: int, betas) -> list[ExplorationGrid]:
    betas = list(betas)
    if any(b < 2 for b in betas):
        raise GridError("every beta must be >= 2")
    if any(b2 <= b1 for b1, b2 in zip(betas, betas[1:])):
        raise GridError(f"betas must be strictly increasing, got {betas}")
    return [ExplorationGrid(level=i, beta=b, d=d) for i, b in enumerate(betas)]


def default_betas(d: int) -> list[int]:
    # β^d frontier size must stay a small multiple of an iteration budget
    return [4, 8, 16] if d <= 3 else [3, 6]


@dataclass
class GridCell:
    level: int
    idx: tuple
    bounds: Region
    center: np.ndarray
    u: int
    p: int
    s: float
    state: str = UNEXPLORED


def _lattice_positions(lo: float, hi: float) -> int:
    """Integers in the half-open [lo, hi) at unit normalized resolution."""
    return max(int(math.ceil(hi) - math.ceil(lo)), 1)


def possible_combinations(grid: ExplorationGrid, idx) -> int:
    bounds = grid.cell_bounds(idx)
    p = 1
    for lo, hi in zip(bounds.lows, bounds.highs):
        p *= _lattice_positions(lo, hi)
    return p


def cell_density(cell: GridCell, ds: Dataset) -> float:
    """Density s = u/p over the cell's own bounds (clipped to [0, 1])."""
    inside = ds.tuples[cell.bounds.contains_points(ds.tuples)]
    u = np.unique(inside, axis=0).shape[0] if inside.shape[0] else 0
    return min(u / cell.p, 1.0) if cell.p else 0.0


class GridState:
    """Per-session frontier and cell-state bookkeeping across all levels."""

    def __init__(self, grids, ds: Dataset):
        if not grids:
            raise GridError("at least one exploration level required")
        self.grids = list(grids)
        self.ds = ds
        self.states: list[dict] = [dict() for _ in self.grids]
        self._stats: list[dict | None] = [None for _ in self.grids]
        self._unique_rows = None
        self.frontier: list[tuple[int, tuple]] = [
            (0, idx) for idx in self.grids[0].indices()
        ]

    def _unique(self) -> np.ndarray:
        if self._unique_rows is None:
            self._unique_rows = np.unique(self.ds.tuples, axis=0)
        return self._unique_rows

    def _level_stats(self, level: int) -> dict:
        """u per cell for a whole level in one vectorized pass."""
        if self._stats[level] is None:
            grid = self.grids[level]
            rows = self._unique()
            cells = np.clip(
                np.floor(rows / grid.delta).astype(np.int64), 0, grid.beta - 1
            )
            flat = np.ravel_multi_index(cells.T, (grid.beta,) * grid.d)
            counts = np.bincount(flat, minlength=grid.num_cells)
            self._stats[level] = {"u": counts, "shape": (grid.beta,) * grid.d}
        return self._stats[level]

    def cell(self, level: int, idx) -> GridCell:
        grid = self.grids[level]
        idx = tuple(idx)
        stats = self._level_stats(level)
        flat = np.ravel_multi_index(np.array(idx), stats["shape"])
        u = int(stats["u"][flat])
        p = possible_combinations(grid, idx)
        return GridCell(
            level=level,
            idx=idx,
            bounds=grid.cell_bounds(idx),
            center=grid.cell_center(idx),
            u=u,
            p=p,
            s=min(u / p, 1.0),
            state=self.states[level].get(idx, UNEXPLORED),
        )

    def state_of(self, level: int, idx) -> str:
        return self.states[level].get(tuple(idx), UNEXPLORED)

    def mark(self, level: int, idx, state: str):
        idx = tuple(idx)
        cur = self.state_of(level, idx)
        if state == cur:
            return
        if state not in _ALLOWED.get(cur, set()):
            raise GridError(f"illegal cell transition {cur} -> {state} at {idx}")
        self.states[level][idx] = state
        if state in TERMINAL_STATES or state == SAMPLED:
            self.frontier = [
                (lv, ix) for lv, ix in self.frontier if not (lv == level and ix == idx)
            ]

    def frontier_cells(self, level: int | None = None):
        for lv, idx in list(self.frontier):
            if level is not None and lv != level:
                continue
            yield self.cell(lv, idx)

    def active_levels(self):
        return sorted({lv for lv, _ in self.frontier})

    def snapshot(self) -> dict:
        """Visited cells with state and density, for UI overlays."""
        cells = []
        for lv, level_states in enumerate(self.states):
            for idx, state in sorted(level_states.items()):
                c = self.cell(lv, idx)
                cells.append(
                    {
                        "level": lv,
                        "idx": list(idx),
                        "state": state,
                        "s": c.s,
                        "lows": c.bounds.lows.tolist(),
                        "highs": c.bounds.highs.tolist(),
                    }
                )
        return {
            "levels": [{"level": g.level, "beta": g.beta} for g in self.grids],
            "cells": cells,
            "frontier_size": len(self.frontier),
        }


def sparse_gamma(gamma: float, delta: float) -> float:
    """Widened sampling step for sparse cells, capped inside the cell."""
    return min(0.45 * delta, 2.0 * gamma)


def discovery_areas(
    state: GridState,
    grid: ExplorationGrid,
    ds: Dataset,
    gamma: float,
    sparse_threshold: float | None = None,
    sparse_only: bool = False,
):
    """Sampling region per frontier cell of one level: center ± γ in-cell.

    Sparse cells (0 < s <= threshold) get the widened γ; empty cells are
    marked terminal on the spot. ``sparse_only`` keeps just the sparse cells,
    which is the grid's role inside the hybrid discovery strategy.
    """
    if not (0.0 < gamma < grid.delta / 2.0):
        raise GridError(f"gamma must satisfy 0 < gamma < delta/2, got {gamma}")
    plan = []
    for cell in state.frontier_cells(level=grid.level):
        if cell.u == 0:
            state.mark(cell.level, cell.idx, EMPTY)
            continue
        is_sparse = sparse_threshold is not None and cell.s <= sparse_threshold
        if sparse_only and not is_sparse:
            continue
        g = sparse_gamma(gamma, grid.delta) if is_sparse else gamma
        lo = np.maximum(cell.center - g, cell.bounds.lows)
        hi = np.minimum(cell.center + g, cell.bounds.highs)
        plan.append((cell, Region(lo, hi)))
    return plan


def zoom_in(state: GridState, cell: GridCell) -> list[GridCell]:
    """Push a fruitless cell's next-level children onto the frontier."""
    next_level = cell.level + 1
    if next_level >= len(state.grids):
        state.mark(cell.level, cell.idx, EMPTY)
        return []
    child = state.grids[next_level]
    parent = state.grids[cell.level]
    ratio = child.beta / parent.beta
    start = [int(round(i * ratio)) for i in cell.idx]
    span = int(round(ratio))
    children = []
    for offsets in itertools.product(range(span), repeat=child.d):
        idx = tuple(s + o for s, o in zip(start, offsets))
        children.append(state.cell(next_level, idx))
        if (next_level, idx) not in state.frontier and state.state_of(
            next_level, idx
        ) == UNEXPLORED:
            state.frontier.append((next_level, idx))
    state.mark(cell.level, cell.idx, ZOOMED)
    return children
