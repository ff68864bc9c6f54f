"""Session state machine: plan, sample, ingest feedback, retrain, predict.

One session is one logical state machine; callers never overlap mutating calls
(the service layer enforces per-session mutual exclusion on top of this).
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass

import numpy as np

from querysteer import phases
from querysteer.cluster import default_cluster_ks
from querysteer.dataset import Dataset, random_within
from querysteer.grid import (
    RELEVANT_FOUND,
    SAMPLED,
    GridState,
    build_levels,
    default_betas,
    zoom_in,
)
from querysteer.phases import (
    MODE_PROBABILISTIC,
    PHASE_DISCOVERY,
    ClusterExploration,
    PhaseConfig,
    SimilarChain,
    boundary_exploitation,
    misclassified_exploitation,
    object_discovery,
    probabilistic_select,
    similarity_exploitation,
    trim_plans,
)
from querysteer.regions import RegionSet, extract_regions, formulate_query
from querysteer.tree import (
    IRRELEVANT,
    RELEVANT,
    SIMILAR,
    LabeledSample,
    TreeParams,
    train,
)

STATUS_READY = "ready"
STATUS_COMPLETED = "completed"

# hard stop for the plan/execute loop; progress is checked per pass, so this
# only guards against a plan that neither yields tuples nor advances state
_MAX_PLAN_PASSES = 10_000


class EngineError(Exception):
    pass


class NoModelError(EngineError):
    """Prediction requested before any feedback has trained a model."""


class PendingFeedbackError(EngineError):
    """next_samples called while a batch still awaits labels."""


class UnknownTupleError(EngineError):
    pass


@dataclass(frozen=True)
class FeedbackItem:
    tuple_id: int
    label: str
    dims: tuple | None = None  # interesting dimensions for "similar"


@dataclass
class Feedback:
    items: list


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f_measure: float
    labeled_count: int
    iteration_seconds: float

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "labeled_count": self.labeled_count,
            "iteration_seconds": self.iteration_seconds,
        }


@dataclass
class PendingSample:
    point: np.ndarray
    phase: str
    meta: dict


class ExplorationSession:
    def __init__(self, ds: Dataset, config: PhaseConfig, seed: int, cluster_cache=None):
        self.ds = ds
        self.config = config
        self.seed = int(seed) & (2 ** 63 - 1)
        betas = list(config.betas) if config.betas else default_betas(ds.d)
        self.grid_state = GridState(build_levels(ds.d, betas), ds)
        self.clusters = None
        if config.discovery in (phases.DISCOVERY_HYBRID, phases.DISCOVERY_CLUSTER):
            ks = tuple(config.cluster_ks) if config.cluster_ks else default_cluster_ks(betas, ds.d)
            self.clusters = ClusterExploration(
                ds,
                ks,
                seed=self.seed,
                sample_cap=config.cluster_fit_cap,
                level_cache=cluster_cache,
            )
        self.d_r: dict[int, np.ndarray] = {}
        self.d_nr: dict[int, np.ndarray] = {}
        self.similar: dict[int, tuple] = {}
        self.chains: list[SimilarChain] = []
        self._next_chain_id = 0
        self.tree = None
        self.region_set: RegionSet | None = None
        self.query = None
        self.iteration = 0
        self.pending: dict[int, PendingSample] = {}
        self.shown: set[int] = set()
        self.sample_phase: dict[int, str] = {}
        self.sample_point: dict[int, np.ndarray] = {}
        self.timings: list[float] = []
        self._iter_elapsed = 0.0
        self.status = STATUS_READY

    # -- helpers ---------------------------------------------------------

    def seed_for(self, *tags) -> int:
        parts = [self.seed, self.iteration] + [
            zlib.crc32(str(t).encode()) for t in tags
        ]
        return int(np.random.SeedSequence(parts).generate_state(1)[0])

    def discovery_relevant_count(self) -> int:
        return sum(
            1 for tid in self.d_r if self.sample_phase.get(tid) == PHASE_DISCOVERY
        )

    def labeled_count(self) -> int:
        return len(self.d_r) + len(self.d_nr) + len(self.similar)

    def _chain(self, chain_id: int) -> SimilarChain | None:
        for c in self.chains:
            if c.chain_id == chain_id:
                return c
        return None

    def _spawn_chain(self, origin_id: int, point: np.ndarray, dims, gamma: float):
        dims = tuple(dims) if dims else tuple(range(self.ds.d))
        self.chains.append(
            SimilarChain(
                chain_id=self._next_chain_id,
                root_id=int(origin_id),
                root_point=np.asarray(point, dtype=np.float64).copy(),
                cur_point=np.asarray(point, dtype=np.float64).copy(),
                gamma=float(gamma),
                dims=dims,
            )
        )
        self._next_chain_id += 1

    def _state_fingerprint(self):
        return (
            len(self.grid_state.frontier),
            tuple(len(s) for s in self.grid_state.states),
            self.clusters.level if self.clusters else -1,
            tuple(len(s) for s in self.clusters.sampled) if self.clusters else (),
            sum(len(c.awaiting_signs) + len(c.pending) for c in self.chains if c.active),
        )

    def snapshot(self) -> dict:
        doc = {
            "iteration": self.iteration,
            "status": self.status,
            "labeled": {
                "relevant": len(self.d_r),
                "irrelevant": len(self.d_nr),
                "similar": len(self.similar),
            },
            "pending": len(self.pending),
            "relevant_regions": len(self.region_set.relevant) if self.region_set else 0,
            "query": self.query.text if self.query else None,
            "grid": self.grid_state.snapshot(),
        }
        if self.clusters is not None:
            doc["clusters"] = self.clusters.snapshot()
        return doc


def start_session(
    ds: Dataset, config: PhaseConfig, seed: int, cluster_cache=None
) -> ExplorationSession:
    config.validate()
    if ds.n < 1:
        raise EngineError("dataset is empty")
    return ExplorationSession(ds, config, seed, cluster_cache=cluster_cache)


def _split_discovery(plan):
    primary, filler = phases.SamplingPlan(), phases.SamplingPlan()
    for e in plan.entries:
        (filler if e.meta.get("filler") else primary).entries.append(e)
    return primary, filler


def next_samples(session: ExplorationSession):
    """Assemble and execute one iteration's sampling plan.

    Returns up to ``budget`` fresh ``(tuple_id, raw point, phase)`` samples;
    an empty list signals that exploration is exhausted and the session is
    complete. Phase priority: misclassified, boundary, similarity, discovery.
    """
    if session.pending:
        raise PendingFeedbackError("a pending batch awaits feedback")
    if session.status == STATUS_COMPLETED:
        return []
    t0 = time.perf_counter()
    cfg = session.config
    batch: dict[int, PendingSample] = {}
    exec_counter = 0

    for pass_no in range(_MAX_PLAN_PASSES):
        remaining = cfg.budget - len(batch)
        if remaining <= 0:
            break
        before = session._state_fingerprint()
        plans = []
        if pass_no == 0:
            # exploitation phases plan once per iteration; top-up passes only
            # re-plan discovery, whose bookkeeping prevents double sampling
            if cfg.enable_misclassified:
                plans.append(misclassified_exploitation(session))
            if cfg.enable_boundary:
                plans.append(boundary_exploitation(session))
            plans.append(similarity_exploitation(session))
        primary, filler = _split_discovery(object_discovery(session))
        plans.append(primary)
        plans.append(filler)
        entries = trim_plans(plans, remaining, alpha_max=cfg.alpha_max)
        if not entries:
            break
        added = 0
        exclude = session.shown | set(batch)
        for entry in entries:
            if entry.mode == MODE_PROBABILISTIC:
                picked = _enumerate_and_select(session, entry, exclude)
                ids = np.array([tid for tid, _ in picked], dtype=np.int64)
                pts = (
                    np.array([pt for _, pt in picked])
                    if picked
                    else np.empty((0, session.ds.d))
                )
            else:
                ids, pts = random_within(
                    session.ds,
                    entry.region,
                    entry.count,
                    seed=session.seed_for(entry.phase, exec_counter),
                    exclude=exclude,
                )
            exec_counter += 1
            meta = entry.meta
            if ids.size == 0:
                _note_empty_result(session, entry)
                continue
            for tid, pt in zip(ids.tolist(), pts):
                batch[int(tid)] = PendingSample(point=pt.copy(), phase=entry.phase, meta=meta)
                exclude.add(int(tid))
                added += 1
            _note_sampled(session, entry, ids)
        if len(batch) >= cfg.budget:
            break
        if added == 0 and session._state_fingerprint() == before:
            break

    session._iter_elapsed = time.perf_counter() - t0
    if not batch:
        session.status = STATUS_COMPLETED
        session.timings.append(session._iter_elapsed)
        return []
    session.pending = batch
    for tid, ps in batch.items():
        session.shown.add(tid)
        session.sample_phase[tid] = ps.phase
        session.sample_point[tid] = ps.point
    out = []
    raw = session.ds.denormalize_points(np.array([ps.point for ps in batch.values()]))
    for (tid, ps), raw_pt in zip(batch.items(), raw):
        out.append((tid, raw_pt, ps.phase))
    return out


def _enumerate_and_select(session, entry, exclude):
    """Pool every unseen tuple inside the region and keep the most uncertain."""
    ds = session.ds
    mask = entry.region.contains_points(ds.tuples)
    idx = np.flatnonzero(mask)
    if exclude and idx.size:
        keep = ~np.isin(ds.ids[idx], np.fromiter(exclude, dtype=np.int64))
        idx = idx[keep]
    cand = [(int(ds.ids[i]), ds.tuples[i]) for i in idx]
    return probabilistic_select(cand, session, entry.count)


def _note_sampled(session, entry, ids):
    meta = entry.meta
    kind = meta.get("kind")
    if kind == "cell":
        session.grid_state.mark(meta["level"], meta["idx"], SAMPLED)
    elif kind == "cluster":
        session.clusters.mark_sampled(meta["level"], meta["index"], sample_ids=ids)
    elif kind == "chain":
        chain = session._chain(meta["chain_id"])
        if chain is not None:
            chain.note_sampled(meta["signs"], int(ids[0]))


def _note_empty_result(session, entry):
    meta = entry.meta
    kind = meta.get("kind")
    if kind == "cell":
        # nothing retrievable near the center: zoom without user feedback
        session.grid_state.mark(meta["level"], meta["idx"], SAMPLED)
        zoom_in(session.grid_state, session.grid_state.cell(meta["level"], meta["idx"]))
    elif kind == "cluster":
        session.clusters.mark_sampled(meta["level"], meta["index"])
    elif kind == "chain":
        chain = session._chain(meta["chain_id"])
        if chain is not None:
            chain.note_sampled(meta["signs"], None)


def submit_feedback(session: ExplorationSession, fb: Feedback) -> dict:
    """Apply one round of labels, retrain the model, advance the iteration.

    Validation is all-or-nothing: an unknown tuple id or malformed item
    rejects the whole document before any state changes.
    """
    items = list(fb.items)
    seen = set()
    for item in items:
        tid = int(item.tuple_id)
        if tid in seen:
            raise EngineError(f"duplicate feedback for tuple {tid}")
        seen.add(tid)
        if tid not in session.shown:
            raise UnknownTupleError(f"tuple {tid} was never shown in this session")
        if item.label not in (RELEVANT, IRRELEVANT, SIMILAR):
            raise EngineError(f"unknown label {item.label!r}")
        if item.dims is not None:
            if item.label != SIMILAR:
                raise EngineError("interesting dimensions only apply to similar labels")
            if any(not (0 <= int(d) < session.ds.d) for d in item.dims):
                raise EngineError(f"interesting dimensions out of range: {item.dims}")
    missing = set(session.pending) - seen
    if missing:
        raise EngineError(f"batch incompletely labeled: missing {sorted(missing)[:5]}")

    t0 = time.perf_counter()
    for item in items:
        tid = int(item.tuple_id)
        point = session.sample_point[tid]
        was_similar = tid in session.similar
        session.d_r.pop(tid, None)
        session.d_nr.pop(tid, None)
        session.similar.pop(tid, None)
        if was_similar and item.label != SIMILAR:
            for chain in session.chains:
                if chain.root_id == tid:
                    chain.active = False
        pend = session.pending.get(tid)
        if item.label == RELEVANT:
            session.d_r[tid] = point
        elif item.label == IRRELEVANT:
            session.d_nr[tid] = point
        else:
            session.similar[tid] = (point, tuple(item.dims) if item.dims else None)

        if pend is not None:
            _resolve_pending(session, tid, pend, item)
        elif item.label == SIMILAR and not was_similar:
            # relabeled an old sample to similar: open a fresh chain
            session._spawn_chain(tid, point, item.dims, session.config.gamma)

    session.pending.clear()
    _resolve_chain_generations(session)
    _retrain(session)
    session.iteration += 1
    elapsed = time.perf_counter() - t0
    session.timings.append(session._iter_elapsed + elapsed)
    session._iter_elapsed = 0.0
    return {
        "iteration": session.iteration,
        "labeled": {
            "relevant": len(session.d_r),
            "irrelevant": len(session.d_nr),
            "similar": len(session.similar),
        },
        "relevant_regions": len(session.region_set.relevant) if session.region_set else 0,
        "query": session.query.text if session.query else None,
        "status": session.status,
    }


def _resolve_pending(session, tid, pend, item):
    meta = pend.meta
    kind = meta.get("kind")
    relevant = item.label == RELEVANT
    if kind == "cell":
        level, idx = meta["level"], meta["idx"]
        if relevant:
            session.grid_state.mark(level, idx, RELEVANT_FOUND)
        else:
            cell = session.grid_state.cell(level, idx)
            if cell.state == SAMPLED:
                zoom_in(session.grid_state, cell)
    elif kind == "cluster":
        session.clusters.note_feedback(meta["level"], tid, relevant=relevant)
    elif kind == "chain":
        chain = session._chain(meta["chain_id"])
        if chain is not None:
            chain.note_label(
                tid,
                item.label,
                session.sample_point[tid],
                dims=item.dims,
            )
    if item.label == SIMILAR and kind != "chain":
        session._spawn_chain(tid, session.sample_point[tid], item.dims, session.config.gamma)


def _resolve_chain_generations(session):
    for chain in list(session.chains):
        if chain.generation_done():
            descendants = chain.resolve(session.config.min_chain_gamma)
            for tid, point, dims in descendants:
                session._spawn_chain(tid, point, dims, chain.gamma)


def _retrain(session):
    if not session.d_r and not session.d_nr:
        return
    samples = [
        LabeledSample(tid, pt, RELEVANT) for tid, pt in sorted(session.d_r.items())
    ] + [
        LabeledSample(tid, pt, IRRELEVANT) for tid, pt in sorted(session.d_nr.items())
    ]
    params = TreeParams(
        min_samples_leaf=session.config.tree_min_samples_leaf,
        max_depth=session.config.tree_max_depth,
    )
    session.tree = train(samples, params)
    session.region_set = extract_regions(session.tree)
    session.query = formulate_query(session.region_set, session.ds.schema)


def current_prediction(session: ExplorationSession):
    """Current model as (normalized RegionSet, raw-unit ExtractionQuery)."""
    if session.tree is None:
        raise NoModelError("no model yet: submit feedback first")
    return session.region_set, session.query


def score_prediction(ds: Dataset, predicted_mask: np.ndarray, truth) -> tuple:
    truth_mask = truth.contains_points(ds.tuples)
    tp = int(np.sum(predicted_mask & truth_mask))
    fp = int(np.sum(predicted_mask & ~truth_mask))
    fn = int(np.sum(~predicted_mask & truth_mask))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def evaluate(session: ExplorationSession, truth) -> Metrics:
    """F-measure of the current model against a ground-truth region set."""
    if session.region_set is not None:
        pred = session.region_set.relevant_mask(session.ds.tuples)
    else:
        pred = np.zeros(session.ds.n, dtype=bool)
    precision, recall, f = score_prediction(session.ds, pred, truth)
    return Metrics(
        precision=precision,
        recall=recall,
        f_measure=f,
        labeled_count=session.labeled_count(),
        iteration_seconds=session.timings[-1] if session.timings else 0.0,
    )
