"""Per-phase sample selection: discovery, misclassified, boundary, similarity.

Each phase reads session state and emits a SamplingPlan (regions + requested
counts); the engine trims plans to the iteration budget in phase priority
order and executes them against the dataset.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from querysteer.cluster import Cluster, fit_points, kmeans, _level_seed
from querysteer.dataset import DOMAIN_MAX, DOMAIN_MIN, Dataset, Region, distances_to_set
from querysteer.grid import discovery_areas
from querysteer.tree import IRRELEVANT, RELEVANT, SIMILAR, classify

PHASE_DISCOVERY = "discovery"
PHASE_MISCLASSIFIED = "misclassified"
PHASE_BOUNDARY = "boundary"
PHASE_SIMILARITY = "similarity"

MODE_UNIFORM = "uniform-random"
MODE_PROBABILISTIC = "probabilistic"

DISCOVERY_HYBRID = "hybrid"
DISCOVERY_GRID = "grid"
DISCOVERY_CLUSTER = "cluster"
DISCOVERY_RANDOM = "random"

_DISCOVERY_MODES = (DISCOVERY_HYBRID, DISCOVERY_GRID, DISCOVERY_CLUSTER, DISCOVERY_RANDOM)


class PhaseError(Exception):
    pass


@dataclass
class PhaseConfig:
    """Knobs for the exploration loop; defaults follow the 20-sample protocol."""

    gamma: float = 5.0              # similarity step / chain box scale
    f: int = 10                     # samples per misclassified object
    y: float = 5.0                  # misclassified box expansion per dimension
    alpha_max: int = 8              # boundary-phase sample budget (40% of 20)
    x: float = 1.0                  # boundary band half-width
    alpha_weight: float = 0.5       # posterior mix between S+ and S-
    density_threshold: float = 0.1  # sparse-cell cutoff t
    budget: int = 20                # samples per iteration
    discovery: str = DISCOVERY_HYBRID
    probabilistic: bool = False
    enable_misclassified: bool = True
    enable_boundary: bool = True
    betas: tuple | None = None      # grid level schedule; None = by dimension
    cluster_ks: tuple | None = None  # cluster level schedule; None = betas^d
    cluster_fit_cap: int = 50_000
    discovery_gamma_fraction: float = 0.4
    min_chain_gamma: float = 0.5
    tree_min_samples_leaf: int = 2
    tree_max_depth: int = 20

    def validate(self):
        if self.budget < 1:
            raise PhaseError(f"budget must be >= 1, got {self.budget}")
        if not (0.0 < self.gamma):
            raise PhaseError("gamma must be positive")
        if not (1 <= self.f):
            raise PhaseError("f must be >= 1")
        if self.y <= 0 or self.x <= 0:
            raise PhaseError("y and x must be positive")
        if self.alpha_max < 0:
            raise PhaseError("alpha_max must be >= 0")
        if not (0.0 <= self.alpha_weight <= 1.0):
            raise PhaseError("alpha_weight must lie in [0, 1]")
        if not (0.0 <= self.density_threshold <= 1.0):
            raise PhaseError("density_threshold must lie in [0, 1]")
        if self.discovery not in _DISCOVERY_MODES:
            raise PhaseError(f"unknown discovery mode {self.discovery!r}")
        if not (0.0 < self.discovery_gamma_fraction < 0.5):
            raise PhaseError("discovery_gamma_fraction must be in (0, 0.5)")


@dataclass
class PlanEntry:
    region: Region
    count: int
    mode: str
    phase: str
    meta: dict = field(default_factory=dict)


@dataclass
class SamplingPlan:
    entries: list = field(default_factory=list)

    def total(self) -> int:
        return sum(e.count for e in self.entries)

    def __bool__(self):
        return bool(self.entries)


class ClusterExploration:
    """Cluster-level cursor: coarse-to-fine clusterings, built on first use."""

    def __init__(self, ds: Dataset, ks, seed: int, sample_cap: int = 50_000,
                 level_cache=None):
        self.ks = tuple(ks)
        self._ds = ds
        self._seed = seed
        self._cap = sample_cap
        self._points = None
        # held by reference: paired benchmark runs share one cache so each
        # level's k-means runs once per (dataset, seed)
        self._levels = level_cache if level_cache is not None else [None] * len(self.ks)
        if len(self._levels) != len(self.ks):
            raise PhaseError("level cache length must match ks")
        self.level = 0
        self.sampled = [set() for _ in self.ks]
        self.awaiting = [set() for _ in self.ks]  # sample ids awaiting feedback
        self.relevant_found = [False for _ in self.ks]

    def clusters_at(self, level: int):
        if self._levels[level] is None:
            if self._points is None:
                self._points = fit_points(self._ds, self._seed, self._cap)
            k = min(self.ks[level], self._points.shape[0])
            self._levels[level] = kmeans(
                self._points, k, seed=_level_seed(self._seed, level)
            )
        return self._levels[level]

    def _level_spent(self, level: int) -> bool:
        return (
            len(self.sampled[level]) >= len(self.clusters_at(level))
            and not self.awaiting[level]
        )

    def advance(self):
        """Zoom to the next level when the current one is spent and fruitless."""
        while (
            self.level + 1 < len(self.ks)
            and not self.relevant_found[self.level]
            and self._level_spent(self.level)
        ):
            self.level += 1

    def pending(self):
        clusters = self.clusters_at(self.level)
        return [
            (i, c) for i, c in enumerate(clusters) if i not in self.sampled[self.level]
        ]

    @property
    def exhausted(self) -> bool:
        if not self._level_spent(self.level):
            return False
        return self.relevant_found[self.level] or self.level + 1 >= len(self.ks)

    def mark_sampled(self, level: int, idx: int, sample_ids=()):
        self.sampled[level].add(idx)
        self.awaiting[level].update(int(t) for t in sample_ids)

    def note_feedback(self, level: int, tuple_id: int, relevant: bool):
        self.awaiting[level].discard(int(tuple_id))
        if relevant:
            self.relevant_found[level] = True

    def snapshot(self) -> dict:
        return {
            "ks": list(self.ks),
            "level": self.level,
            "sampled": [len(s) for s in self.sampled],
            "relevant_found": list(self.relevant_found),
        }


def cluster_sampling_region(cluster: Cluster) -> Region:
    # γ_c must stay under the cluster radius; half keeps cluster sampling
    # concentrated near dense mass instead of blurring into the grid's role;
    # singletons get a token box
    half = 0.5 * cluster.radius if cluster.radius > 0 else 1.0
    return Region.box(cluster.centroid, half)


def object_discovery(session) -> SamplingPlan:
    """Hybrid discovery: cluster-centroid areas plus sparse grid cells.

    Pure-grid and pure-cluster configurations degrade to one half of the
    hybrid; "random" turns discovery into a whole-domain uniform draw. When
    every cluster level is spent without a relevant object the grid side drops
    its sparse-only filter so the sweep can still cover the full space.
    """
    cfg = session.config
    mode = cfg.discovery
    plan = SamplingPlan()

    if mode == DISCOVERY_RANDOM:
        plan.entries.append(
            PlanEntry(
                region=Region.full_domain(session.ds.d),
                count=cfg.budget,
                mode=MODE_UNIFORM,
                phase=PHASE_DISCOVERY,
                meta={"kind": "random"},
            )
        )
        return plan

    if mode in (DISCOVERY_HYBRID, DISCOVERY_CLUSTER) and session.clusters is not None:
        cx = session.clusters
        cx.advance()
        for idx, cluster in cx.pending():
            plan.entries.append(
                PlanEntry(
                    region=cluster_sampling_region(cluster),
                    count=1,
                    mode=MODE_UNIFORM,
                    phase=PHASE_DISCOVERY,
                    meta={"kind": "cluster", "level": cx.level, "index": idx},
                )
            )

    if mode in (DISCOVERY_HYBRID, DISCOVERY_GRID):
        sparse_only = mode == DISCOVERY_HYBRID
        if (
            sparse_only
            and session.clusters is not None
            and session.clusters.exhausted
            and session.discovery_relevant_count() == 0
        ):
            sparse_only = False
        state = session.grid_state
        emitted = set()
        for level in state.active_levels():
            grid = state.grids[level]
            gamma = cfg.discovery_gamma_fraction * grid.delta
            for cell, region in discovery_areas(
                state,
                grid,
                session.ds,
                gamma,
                sparse_threshold=cfg.density_threshold,
                sparse_only=sparse_only,
            ):
                emitted.add((cell.level, cell.idx))
                plan.entries.append(
                    PlanEntry(
                        region=region,
                        count=1,
                        mode=MODE_UNIFORM,
                        phase=PHASE_DISCOVERY,
                        meta={"kind": "cell", "level": cell.level, "idx": cell.idx},
                    )
                )
        if sparse_only:
            # dense frontier cells back-fill surplus discovery budget so the
            # hybrid sweep never idles on uniform regions of the space
            for level in state.active_levels():
                grid = state.grids[level]
                gamma = cfg.discovery_gamma_fraction * grid.delta
                for cell, region in discovery_areas(
                    state, grid, session.ds, gamma,
                    sparse_threshold=cfg.density_threshold, sparse_only=False,
                ):
                    if (cell.level, cell.idx) in emitted:
                        continue
                    plan.entries.append(
                        PlanEntry(
                            region=region,
                            count=1,
                            mode=MODE_UNIFORM,
                            phase=PHASE_DISCOVERY,
                            meta={
                                "kind": "cell",
                                "level": cell.level,
                                "idx": cell.idx,
                                "filler": True,
                            },
                        )
                    )
    return plan


def _false_negatives(session):
    if session.tree is None:
        return []
    fns = [
        (tid, pt)
        for tid, pt in sorted(session.d_r.items())
        if classify(session.tree, pt) == IRRELEVANT
    ]
    return fns


def misclassified_exploitation(session) -> SamplingPlan:
    """Sampling areas around (clusters of) false negatives.

    k is the running count of relevant objects the discovery phase has found;
    when k < |FN| the false negatives are k-means grouped and each cluster gets
    a member-bounding-box area expanded by y, worth f x (cluster size) samples.
    Otherwise each false negative individually gets an f-sample box.
    """
    cfg = session.config
    plan = SamplingPlan()
    fns = _false_negatives(session)
    if not fns:
        return plan
    mode = MODE_PROBABILISTIC if cfg.probabilistic else MODE_UNIFORM
    k = session.discovery_relevant_count()
    if k < len(fns):
        points = np.array([pt for _, pt in fns])
        clusters = kmeans(points, max(1, k), seed=session.seed_for("fn-kmeans"))
        for cluster in clusters:
            if cluster.member_idx.size == 0:
                continue
            members = points[cluster.member_idx]
            lo = members.min(axis=0) - cfg.y
            hi = members.max(axis=0) + cfg.y
            plan.entries.append(
                PlanEntry(
                    region=Region(lo, hi),
                    count=cfg.f * cluster.member_idx.size,
                    mode=mode,
                    phase=PHASE_MISCLASSIFIED,
                    meta={
                        "kind": "fn-cluster",
                        "fn_ids": [fns[i][0] for i in cluster.member_idx],
                    },
                )
            )
    else:
        for tid, pt in fns:
            plan.entries.append(
                PlanEntry(
                    region=Region.box(pt, cfg.y),
                    count=cfg.f,
                    mode=mode,
                    phase=PHASE_MISCLASSIFIED,
                    meta={"kind": "fn-single", "fn_ids": [tid]},
                )
            )
    return plan


def boundary_exploitation(session) -> SamplingPlan:
    """Thin domain-sampling bands around every facet of every relevant region.

    The band pins one dimension to [b - x, b + x] and leaves every other
    dimension spanning its full domain, which is what strips attributes that
    do not matter from the model.
    """
    cfg = session.config
    plan = SamplingPlan()
    rs = session.region_set
    if rs is None or not rs.relevant:
        return plan
    d = session.ds.d
    k = len(rs.relevant)
    per_band = max(1, cfg.alpha_max // (k * 2 ** d))
    for ri, region in enumerate(rs.relevant):
        for j in range(d):
            for side, b in (("lo", region.lows[j]), ("hi", region.highs[j])):
                lows = np.full(d, DOMAIN_MIN)
                highs = np.full(d, DOMAIN_MAX)
                lows[j] = b - cfg.x
                highs[j] = b + cfg.x
                plan.entries.append(
                    PlanEntry(
                        region=Region(lows, highs),
                        count=per_band,
                        mode=MODE_UNIFORM,
                        phase=PHASE_BOUNDARY,
                        meta={"kind": "band", "region": ri, "dim": j, "side": side},
                    )
                )
    return plan


def posterior_relevance(x, s_plus, s_minus, alpha_weight: float) -> float:
    """Relevance posterior of one point from exponential-similarity voters."""
    posts = posterior_relevance_batch(
        np.asarray(x, dtype=np.float64)[None, :], s_plus, s_minus, alpha_weight
    )
    return float(posts[0])


def posterior_relevance_batch(points, s_plus, s_minus, alpha_weight: float) -> np.ndarray:
    if not (0.0 <= alpha_weight <= 1.0):
        raise PhaseError("alpha_weight must lie in [0, 1]")
    s_plus = np.asarray(s_plus, dtype=np.float64)
    s_minus = np.asarray(s_minus, dtype=np.float64)
    have_plus = s_plus.size > 0
    have_minus = s_minus.size > 0
    if not have_plus and not have_minus:
        raise PhaseError("posterior needs at least one labeled sample")
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    # distances are the [0,1]-scaled Euclidean, so each vote lies in [e^-1, 1]
    w_plus, w_minus = alpha_weight, 1.0 - alpha_weight
    if not have_plus:
        w_plus, w_minus = 0.0, 1.0
    if not have_minus:
        w_plus, w_minus = 1.0, 0.0
    out = np.zeros(points.shape[0])
    if have_plus and w_plus > 0:
        votes = np.exp(-distances_to_set(points, s_plus))
        out += w_plus * votes.mean(axis=1)
    if have_minus and w_minus > 0:
        votes = 1.0 - np.exp(-distances_to_set(points, s_minus))
        out += w_minus * votes.mean(axis=1)
    return out


def probabilistic_select(candidates, session, count: int):
    """Uncertainty pick: the candidates whose posterior is nearest 0.5.

    ``candidates`` are (tuple_id, point) pairs enumerated from a phase's
    sampling regions; ties on |posterior - 0.5| break toward the lower id.
    """
    if count < 0:
        raise PhaseError("count must be >= 0")
    cands = list(candidates)
    if not cands:
        return []
    s_plus = np.array([pt for _, pt in sorted(session.d_r.items())], dtype=np.float64)
    s_minus = np.array([pt for _, pt in sorted(session.d_nr.items())], dtype=np.float64)
    pts = np.array([pt for _, pt in cands], dtype=np.float64)
    posts = posterior_relevance_batch(pts, s_plus, s_minus, session.config.alpha_weight)
    order = sorted(range(len(cands)), key=lambda i: (abs(posts[i] - 0.5), cands[i][0]))
    return [cands[i] for i in order[:count]]


@dataclass
class SimilarChain:
    """Directional exploration spawned by one "similar"-labeled sample.

    A generation covers every sign vector over the interesting dimensions; if
    a whole generation comes back irrelevant the chain restarts from its
    original sample at half the step.
    """

    chain_id: int
    root_id: int
    root_point: np.ndarray
    cur_point: np.ndarray
    gamma: float
    dims: tuple
    awaiting_signs: list = field(default_factory=list)
    pending: dict = field(default_factory=dict)  # tuple_id -> sign vector
    outcomes: list = field(default_factory=list)  # (label, point, dims|None)
    active: bool = True

    def needs_generation(self) -> bool:
        return self.active and not self.awaiting_signs and not self.pending

    def start_generation(self):
        self.awaiting_signs = [
            signs for signs in itertools.product((1, -1), repeat=len(self.dims))
        ]
        self.outcomes = []

    def area_for(self, signs) -> Region:
        center = self.cur_point.copy()
        for dim, sign in zip(self.dims, signs):
            center[dim] += sign * self.gamma
        return Region.box(np.clip(center, DOMAIN_MIN, DOMAIN_MAX), self.gamma / 2.0)

    def note_sampled(self, signs, tuple_id):
        self.awaiting_signs = [s for s in self.awaiting_signs if s != tuple(signs)]
        if tuple_id is None:
            # nothing to show the user in that direction: counts as irrelevant
            self.outcomes.append((IRRELEVANT, None, None, None))
        else:
            self.pending[int(tuple_id)] = tuple(signs)

    def note_label(self, tuple_id, label, point, dims=None):
        if int(tuple_id) in self.pending:
            del self.pending[int(tuple_id)]
            self.outcomes.append((label, int(tuple_id), point, dims))

    def generation_done(self) -> bool:
        return self.active and not self.awaiting_signs and not self.pending and bool(self.outcomes)

    def resolve(self, min_gamma: float):
        """Close the generation; returns (id, point, dims) continuations."""
        labels = [o[0] for o in self.outcomes]
        descendants = []
        if RELEVANT in labels:
            self.active = False
        elif SIMILAR in labels:
            for lab, tid, point, dims in self.outcomes:
                if lab == SIMILAR:
                    descendants.append((tid, point, dims))
            self.active = False  # continuation lives in the descendant chains
        else:
            self.gamma /= 2.0
            if self.gamma < min_gamma:
                self.active = False
            else:
                self.cur_point = self.root_point.copy()
        self.outcomes = []
        return descendants


def similarity_exploitation(session) -> SamplingPlan:
    """One sampling area per open exploration direction of each active chain."""
    plan = SamplingPlan()
    for chain in session.chains:
        if not chain.active:
            continue
        if chain.needs_generation():
            chain.start_generation()
        for signs in list(chain.awaiting_signs):
            plan.entries.append(
                PlanEntry(
                    region=chain.area_for(signs),
                    count=1,
                    mode=MODE_UNIFORM,
                    phase=PHASE_SIMILARITY,
                    meta={"kind": "chain", "chain_id": chain.chain_id, "signs": signs},
                )
            )
    return plan


def trim_plans(plans, budget: int, alpha_max: int | None = None):
    """Allocate the iteration budget across plans in priority order.

    Within a plan, counts are granted one sample at a time round-robin so late
    regions are not starved by early ones. The boundary plan is capped at
    alpha_max, and that demand is reserved out of the misclassified phase's
    share so the two exploitation phases coexist inside one iteration;
    whatever is left after similarity flows to discovery.
    """
    boundary_demand = 0
    for plan in plans:
        for e in plan.entries:
            if e.phase == PHASE_BOUNDARY:
                boundary_demand += e.count
    if alpha_max is not None:
        boundary_demand = min(boundary_demand, alpha_max)

    chosen = []
    remaining = budget
    for plan in plans:
        if remaining <= 0:
            break
        entries = plan.entries
        if not entries:
            continue
        phase = entries[0].phase
        cap = remaining
        if phase == PHASE_BOUNDARY and alpha_max is not None:
            cap = min(cap, alpha_max)
        elif phase == PHASE_MISCLASSIFIED and boundary_demand:
            cap = max(remaining - boundary_demand, 0)
        want = [e.count for e in entries]
        got = [0] * len(entries)
        avail = cap
        while avail > 0 and any(g < w for g, w in zip(got, want)):
            for i in range(len(entries)):
                if avail <= 0:
                    break
                if got[i] < want[i]:
                    got[i] += 1
                    avail -= 1
        for entry, g in zip(entries, got):
            if g > 0:
                chosen.append(
                    PlanEntry(
                        region=entry.region,
                        count=g,
                        mode=entry.mode,
                        phase=entry.phase,
                        meta=entry.meta,
                    )
                )
                remaining -= g
    return chosen
