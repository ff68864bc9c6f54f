"""Interactive query steering: learn interest regions from relevance feedback."""

from querysteer.dataset import (
    AttributeSpec,
    Dataset,
    DatasetError,
    DistanceMetric,
    Region,
    dataset_from_normalized,
    distance,
    load_dataset,
    random_within,
    sample_reduce,
)
from querysteer.engine import (
    ExplorationSession,
    Feedback,
    FeedbackItem,
    Metrics,
    current_prediction,
    evaluate,
    next_samples,
    start_session,
    submit_feedback,
)
from querysteer.phases import PhaseConfig
from querysteer.regions import ExtractionQuery, RegionSet, extract_regions, formulate_query
from querysteer.simuser import (
    SimUserConfig,
    TargetQuery,
    generate_target,
    label,
    label_with_similarity,
    synth_dataset,
)
from querysteer.tree import DecisionTree, LabeledSample, TreeParams, classify, train

__all__ = [
    "AttributeSpec",
    "Dataset",
    "DatasetError",
    "DecisionTree",
    "DistanceMetric",
    "ExplorationSession",
    "ExtractionQuery",
    "Feedback",
    "FeedbackItem",
    "LabeledSample",
    "Metrics",
    "PhaseConfig",
    "Region",
    "RegionSet",
    "SimUserConfig",
    "TargetQuery",
    "TreeParams",
    "classify",
    "current_prediction",
    "dataset_from_normalized",
    "distance",
    "evaluate",
    "extract_regions",
    "formulate_query",
    "generate_target",
    "label",
    "label_with_similarity",
    "load_dataset",
    "next_samples",
    "random_within",
    "sample_reduce",
    "start_session",
    "submit_feedback",
    "synth_dataset",
    "train",
]
