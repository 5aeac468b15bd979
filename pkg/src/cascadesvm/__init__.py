"""Cascade SVM (CSVM) and balanced cascade SVM (BCSVM) on a from-scratch SMO solver."""

__version__ = "0.1.0"

from .analysis import (
    RetentionCensus,
    binomial,
    census,
    denominator_inequality,
    measure_retention,
    retention_prob_balanced,
    retention_prob_random,
)
from .cascade import CascadePlan, LayerReport, bcsvm, csvm, run_cascade, validate_plan
from .dataset import (
    Dataset,
    Sample,
    SparseVector,
    load_libsvm,
    parse_libsvm,
    partition_balanced,
    partition_random,
    shuffle,
    split_by_class,
    write_libsvm,
)
from .estimators import CascadeSVC, SMOClassifier
from .kernel import KernelCache, KernelSpec, kernel_eval
from .solver import SolverConfig, SvmModel, accuracy, decision_value, predict, smo_train

__all__ = [
    "__version__",
    "Dataset", "Sample", "SparseVector",
    "parse_libsvm", "load_libsvm", "write_libsvm",
    "shuffle", "split_by_class", "partition_random", "partition_balanced",
    "KernelSpec", "KernelCache", "kernel_eval",
    "SolverConfig", "SvmModel", "smo_train", "decision_value", "predict", "accuracy",
    "CascadePlan", "LayerReport", "validate_plan", "run_cascade", "csvm", "bcsvm",
    "RetentionCensus", "binomial", "census", "retention_prob_random",
    "retention_prob_balanced", "denominator_inequality", "measure_retention",
    "SMOClassifier", "CascadeSVC",
]
