"""Infinite mixture of Markov chains: segment categorical event
sequences into recurring regimes, each owning its own transition
structure, via a truncated blocked Gibbs sampler.  Includes synthetic
benchmark generation, Markov-mixture and n-gram baselines, and scoring.
"""

from .baselines import (
    FmmcModel,
    NgramModel,
    fmmc_fit,
    fmmc_fit_best,
    fmmc_grid_search,
    fmmc_predict_next,
    ngram_fit,
    ngram_predict,
)
from .corpus import (
    Alphabet,
    ConcatenatedStream,
    Corpus,
    Sequence,
    concatenate,
    cut_for_prediction,
    load_corpus,
    load_labels,
    save_corpus,
    save_labels,
    split_stream,
    split_train_test,
)
from .dot import export_dot_files, state_to_dot
from .errors import (
    AlphabetMismatchError,
    ConfigError,
    CorpusFormatError,
    DegenerateModelError,
    EmptyCorpusError,
    EmptySequenceError,
    ImmcError,
    ModelFormatError,
    ModelVersionError,
)
from .evaluate import (
    SegmentationScore,
    immc_predict_next,
    prediction_accuracy,
    run_report,
    segmentation_error,
)
from .generator import (
    SIZES,
    GroundTruthProcess,
    SyntheticSpec,
    builtin_testcase,
    generate_corpus,
    make_testcase_spec,
    sample_from_immc,
)
from .model import (
    Hyperparams,
    ModelParams,
    SavedModel,
    SufficientStats,
    init_priors,
    load_model,
    resample_params,
    save_model,
)
from .sampler import (
    FitReport,
    LatentState,
    backward_pass,
    fit,
    forward_filter,
    gibbs_iteration,
    segment_labels,
)

__version__ = "0.1.0"

__all__ = [
    "Alphabet",
    "AlphabetMismatchError",
    "ConcatenatedStream",
    "ConfigError",
    "Corpus",
    "CorpusFormatError",
    "DegenerateModelError",
    "EmptyCorpusError",
    "EmptySequenceError",
    "FitReport",
    "FmmcModel",
    "NgramModel",
    "GroundTruthProcess",
    "Hyperparams",
    "ImmcError",
    "LatentState",
    "ModelFormatError",
    "ModelParams",
    "ModelVersionError",
    "SIZES",
    "SavedModel",
    "SegmentationScore",
    "Sequence",
    "SufficientStats",
    "SyntheticSpec",
    "backward_pass",
    "builtin_testcase",
    "concatenate",
    "cut_for_prediction",
    "export_dot_files",
    "fit",
    "fmmc_fit",
    "fmmc_fit_best",
    "fmmc_grid_search",
    "fmmc_predict_next",
    "forward_filter",
    "generate_corpus",
    "gibbs_iteration",
    "immc_predict_next",
    "init_priors",
    "load_corpus",
    "load_labels",
    "load_model",
    "make_testcase_spec",
    "ngram_fit",
    "ngram_predict",
    "prediction_accuracy",
    "resample_params",
    "run_report",
    "sample_from_immc",
    "save_corpus",
    "save_labels",
    "save_model",
    "segment_labels",
    "segmentation_error",
    "state_to_dot",
    "split_stream",
    "split_train_test",
    "__version__",
]
