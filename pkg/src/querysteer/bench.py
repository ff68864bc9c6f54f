"""Benchmark harness: seeded synthetic runs, baselines, replayable results.

Wall-clock timings are kept out of the result documents (results + summary)
so that replaying a spec reproduces them byte for byte; timings travel in a
sidecar document instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from querysteer.dataset import Dataset, sample_reduce
from querysteer.engine import (
    Feedback,
    FeedbackItem,
    next_samples,
    score_prediction,
    start_session,
    submit_feedback,
)
from querysteer.phases import (
    DISCOVERY_CLUSTER,
    DISCOVERY_GRID,
    DISCOVERY_HYBRID,
    DISCOVERY_RANDOM,
    PhaseConfig,
)
from querysteer.simuser import (
    PLACEMENT_ANY,
    SimUserConfig,
    generate_target,
    label,
    label_with_similarity,
    synth_dataset,
)

STATUS_REACHED = "reached"
STATUS_BUDGET = "budget-exhausted"
STATUS_EXPLORED_OUT = "exploration-exhausted"

STRATEGIES = (
    "aide",
    "aide-prob",
    "aide-sim-feedback",
    "aide-grid-only",
    "aide-cluster-only",
    "random",
    "random-grid",
)


class BenchError(Exception):
    pass


def strategy_config(strategy: str, budget: int = 20, **overrides) -> PhaseConfig:
    base = dict(budget=budget)
    if strategy == "aide":
        base.update(discovery=DISCOVERY_HYBRID)
    elif strategy == "aide-prob":
        base.update(discovery=DISCOVERY_HYBRID, probabilistic=True)
    elif strategy == "aide-sim-feedback":
        base.update(discovery=DISCOVERY_HYBRID)
    elif strategy == "aide-grid-only":
        base.update(discovery=DISCOVERY_GRID)
    elif strategy == "aide-cluster-only":
        base.update(discovery=DISCOVERY_CLUSTER)
    elif strategy == "random":
        base.update(
            discovery=DISCOVERY_RANDOM,
            enable_misclassified=False,
            enable_boundary=False,
        )
    elif strategy == "random-grid":
        base.update(
            discovery=DISCOVERY_GRID,
            enable_misclassified=False,
            enable_boundary=False,
        )
    else:
        raise BenchError(f"unknown strategy {strategy!r}")
    base.update(overrides)
    return PhaseConfig(**base)


@dataclass
class ExperimentSpec:
    name: str
    dataset: dict          # {"kind", "n", "d"}
    target: dict           # {"count", "size_class", "placement"?}
    strategies: list
    seeds: list
    stop: dict             # exactly one of {"f_target": x} / {"max_labeled": n}
    reduction_fraction: float | None = None
    budget: int = 20
    safety_cap: int = 4000
    similarity_threshold: float = 0.10
    config_overrides: dict = field(default_factory=dict)

    def validate(self):
        if not self.seeds:
            raise BenchError("seeds must be non-empty")
        if len(set(self.strategies) - set(STRATEGIES)) > 0:
            raise BenchError(f"unknown strategies: {self.strategies}")
        if not self.strategies:
            raise BenchError("at least one strategy required")
        keys = {k for k in ("f_target", "max_labeled") if self.stop.get(k) is not None}
        if len(keys) != 1:
            raise BenchError("exactly one stopping rule (f_target or max_labeled)")
        if self.reduction_fraction is not None and not (0 < self.reduction_fraction <= 1):
            raise BenchError("reduction_fraction must lie in (0, 1]")
        for key in ("kind", "n", "d"):
            if key not in self.dataset:
                raise BenchError(f"dataset spec missing {key!r}")
        for key in ("count", "size_class"):
            if key not in self.target:
                raise BenchError(f"target spec missing {key!r}")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dataset": self.dataset,
            "target": self.target,
            "strategies": list(self.strategies),
            "seeds": list(self.seeds),
            "stop": self.stop,
            "reduction_fraction": self.reduction_fraction,
            "budget": self.budget,
            "safety_cap": self.safety_cap,
            "similarity_threshold": self.similarity_threshold,
            "config_overrides": self.config_overrides,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        spec = cls(
            name=doc["name"],
            dataset=doc["dataset"],
            target=doc["target"],
            strategies=list(doc["strategies"]),
            seeds=list(doc["seeds"]),
            stop=doc["stop"],
            reduction_fraction=doc.get("reduction_fraction"),
            budget=doc.get("budget", 20),
            safety_cap=doc.get("safety_cap", 4000),
            similarity_threshold=doc.get("similarity_threshold", 0.10),
            config_overrides=doc.get("config_overrides", {}),
        )
        spec.validate()
        return spec


@dataclass
class RunRecord:
    spec_name: str
    strategy: str
    seed: int
    iterations: list       # {"labeled", "precision", "recall", "f"}
    times: list            # seconds per iteration; excluded from result docs
    status: str
    samples_to_target: int | None

    def to_result_dict(self) -> dict:
        return {
            "spec": self.spec_name,
            "strategy": self.strategy,
            "seed": self.seed,
            "iterations": self.iterations,
            "status": self.status,
            "samples_to_target": self.samples_to_target,
        }

    def to_timing_dict(self) -> dict:
        return {
            "spec": self.spec_name,
            "strategy": self.strategy,
            "seed": self.seed,
            "iteration_seconds": self.times,
        }


def _build_space(spec: ExperimentSpec, seed: int):
    ds = synth_dataset(
        spec.dataset["kind"], int(spec.dataset["n"]), int(spec.dataset["d"]), seed=seed
    )
    target = generate_target(
        int(spec.dataset["d"]),
        int(spec.target["count"]),
        spec.target["size_class"],
        seed=seed + 7919,
        ds=ds,
        placement=spec.target.get("placement", PLACEMENT_ANY),
    )
    return ds, target


def run_one(
    spec: ExperimentSpec,
    strategy: str,
    seed: int,
    ds: Dataset,
    target,
    cluster_cache=None,
) -> RunRecord:
    config = strategy_config(strategy, budget=spec.budget, **spec.config_overrides)
    explore_ds = ds
    if spec.reduction_fraction is not None and spec.reduction_fraction < 1.0:
        explore_ds = sample_reduce(ds, spec.reduction_fraction, seed=seed + 104729)
        cluster_cache = None  # clusterings of the full space do not transfer
    session = start_session(explore_ds, config, seed=seed, cluster_cache=cluster_cache)
    sim_cfg = (
        SimUserConfig(spec.similarity_threshold)
        if strategy == "aide-sim-feedback"
        else None
    )
    f_target = spec.stop.get("f_target")
    max_labeled = spec.stop.get("max_labeled") or spec.safety_cap

    iterations = []
    samples_to_target = None
    status = STATUS_BUDGET
    while True:
        batch = next_samples(session)
        if not batch:
            status = STATUS_EXPLORED_OUT
            break
        items = []
        for tid, _raw, _phase in batch:
            pt = session.sample_point[tid]
            if sim_cfg is not None:
                lab, dims = label_with_similarity(target, pt, sim_cfg)
                items.append(FeedbackItem(tid, lab, dims))
            else:
                items.append(FeedbackItem(tid, label(target, pt)))
        submit_feedback(session, Feedback(items))
        if session.region_set is not None:
            pred = session.region_set.relevant_mask(ds.tuples)
        else:
            pred = np.zeros(ds.n, dtype=bool)
        precision, recall, f = score_prediction(ds, pred, target)
        labeled = session.labeled_count()
        iterations.append(
            {
                "labeled": labeled,
                "precision": round(precision, 10),
                "recall": round(recall, 10),
                "f": round(f, 10),
            }
        )
        if f_target is not None and f >= f_target and samples_to_target is None:
            samples_to_target = labeled
            status = STATUS_REACHED
            break
        if labeled >= max_labeled:
            status = STATUS_BUDGET
            break
    return RunRecord(
        spec_name=spec.name,
        strategy=strategy,
        seed=seed,
        iterations=iterations,
        times=list(session.timings),
        status=status,
        samples_to_target=samples_to_target,
    )


def run_seed(spec: ExperimentSpec, seed: int) -> list:
    """All strategies for one seed over a shared dataset and target."""
    ds, target = _build_space(spec, seed)
    needs_clusters = any(
        s in ("aide", "aide-prob", "aide-sim-feedback", "aide-cluster-only")
        for s in spec.strategies
    )
    cache = None
    if needs_clusters and spec.reduction_fraction is None:
        config = strategy_config("aide", budget=spec.budget, **spec.config_overrides)
        from querysteer.cluster import default_cluster_ks
        from querysteer.grid import default_betas

        betas = config.betas or default_betas(ds.d)
        ks = config.cluster_ks or default_cluster_ks(betas, ds.d)
        cache = [None] * len(ks)
    return [
        run_one(spec, strategy, seed, ds, target, cluster_cache=cache)
        for strategy in spec.strategies
    ]


def run(spec: ExperimentSpec, parallelism: int = 1) -> list:
    """One record per (strategy, seed); strategies share the seed's space."""
    spec.validate()
    if parallelism > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            per_seed = list(pool.map(run_seed, [spec] * len(spec.seeds), spec.seeds))
    else:
        per_seed = [run_seed(spec, seed) for seed in spec.seeds]
    records = [r for group in per_seed for r in group]
    records.sort(key=lambda r: (spec.strategies.index(r.strategy), r.seed))
    return records


def _median(values):
    vals = sorted(values)
    if not vals:
        return None
    mid = len(vals) // 2
    if len(vals) % 2:
        return float(vals[mid])
    return (vals[mid - 1] + vals[mid]) / 2.0


def report(records) -> dict:
    """Deterministic summary: samples-to-target stats and paired deltas."""
    if not records:
        raise BenchError("no records to report")
    strategies = []
    for r in records:
        if r.strategy not in strategies:
            strategies.append(r.strategy)
    by_strategy = {s: [r for r in records if r.strategy == s] for s in strategies}
    summary = {"spec": records[0].spec_name, "strategies": {}}
    for s, runs in by_strategy.items():
        reached = [r.samples_to_target for r in runs if r.samples_to_target is not None]
        final_f = [r.iterations[-1]["f"] if r.iterations else 0.0 for r in runs]
        summary["strategies"][s] = {
            "runs": len(runs),
            "reached_target": len(reached),
            "samples_to_target_median": _median(reached),
            "samples_to_target_mean": (
                round(sum(reached) / len(reached), 6) if reached else None
            ),
            "final_f_median": _median(final_f),
        }
    if len(strategies) > 1:
        base = strategies[0]
        base_by_seed = {r.seed: r.samples_to_target for r in by_strategy[base]}
        pairs = {}
        for s in strategies[1:]:
            deltas = {}
            for r in by_strategy[s]:
                a, b = r.samples_to_target, base_by_seed.get(r.seed)
                deltas[str(r.seed)] = (a - b) if (a is not None and b is not None) else None
            pairs[f"{s}-minus-{base}"] = deltas
        summary["paired_deltas"] = pairs
    return summary


def timing_report(records) -> dict:
    """Per-strategy wall-clock stats; never part of the replayable documents."""
    out = {}
    for r in records:
        out.setdefault(r.strategy, []).extend(r.times)
    return {
        strategy: {
            "iterations": len(times),
            "mean_seconds": sum(times) / len(times) if times else None,
            "median_seconds": _median(times),
        }
        for strategy, times in out.items()
    }


def write_results(records, out_dir, spec: ExperimentSpec | None = None):
    """results.jsonl + summary.json are replay-stable; timing files are not."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with (out / "results.jsonl").open("w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_result_dict(), sort_keys=True) + "\n")
    with (out / "summary.json").open("w") as fh:
        json.dump(report(records), fh, sort_keys=True, indent=2)
        fh.write("\n")
    with (out / "timings.jsonl").open("w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_timing_dict(), sort_keys=True) + "\n")
    with (out / "timing.json").open("w") as fh:
        json.dump(timing_report(records), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if spec is not None:
        with (out / "spec.json").open("w") as fh:
            json.dump(spec.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")
    return out / "results.jsonl"
