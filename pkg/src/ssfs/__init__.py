"""Semi-supervised wrapper feature selection.

Self-learning pseudo-labels the unlabeled data, an out-of-bag confusion
estimate corrects the majority-vote risk bound for pseudo-label noise, and
a feature-weight-aware genetic algorithm searches for a subset minimizing
the corrected bound.
"""

from .bounds import (
    BoundValue,
    MarginMoments,
    MislabelingMatrix,
    beta,
    cbound,
    cbound_beta,
    cbound_il,
    estimate_mislabeling,
    gamma,
    margin,
    margin_moments,
    margins,
)
from .dataset import (
    DataError,
    FeatureSubset,
    PartitionedDataset,
    generate_synthetic,
    inject_label_noise,
    load_csv,
    load_libsvm,
    project,
    split,
)
from .forest import Forest, ForestConfig, feature_weights, fit, oob_error, oob_votes, predict, votes
from .genetic import Candidate, EvalContext, GaConfig, GaResult, RemovedSet
from .pipeline import (
    ExperimentConfig,
    SelectionReport,
    criterion_comparison,
    evaluate_selection,
    mann_whitney_u,
    run_experiment,
    sewil_select,
)
from .selflearn import AugmentedSet, ThresholdVector, conditional_error, find_threshold, sla

__version__ = "0.1.0"

__all__ = [
    "AugmentedSet",
    "BoundValue",
    "Candidate",
    "DataError",
    "EvalContext",
    "ExperimentConfig",
    "FeatureSubset",
    "Forest",
    "ForestConfig",
    "GaConfig",
    "GaResult",
    "MarginMoments",
    "MislabelingMatrix",
    "PartitionedDataset",
    "RemovedSet",
    "SelectionReport",
    "ThresholdVector",
    "beta",
    "cbound",
    "cbound_beta",
    "cbound_il",
    "conditional_error",
    "criterion_comparison",
    "estimate_mislabeling",
    "evaluate_selection",
    "feature_weights",
    "find_threshold",
    "fit",
    "gamma",
    "generate_synthetic",
    "inject_label_noise",
    "load_csv",
    "load_libsvm",
    "mann_whitney_u",
    "margin",
    "margin_moments",
    "margins",
    "oob_error",
    "oob_votes",
    "predict",
    "project",
    "run_experiment",
    "sewil_select",
    "sla",
    "split",
    "votes",
]
