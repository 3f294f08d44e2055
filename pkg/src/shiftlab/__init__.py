"""shiftlab: controllable latent-space distribution shifts and robustness metrics."""

__version__ = "0.1.0"

from .errors import (
    DegenerateFitError,
    DegenerateGeometryError,
    FormatError,
    InfeasibleGeometryError,
    InvalidArgumentError,
    ShiftLabError,
    UsageError,
)
from .geometry import LatentBatch, LatentCode, angle_between, sample_prior, slerp
from .intensity import IntensityReport, ball99, cap_fraction, intensity_analytic, intensity_mc
from .nn_distance import Dataset, NNResult, one_nn_distance, one_nn_distance_naive
from .robustness import EvalPoint, SlopeFit, delta_accuracy, fit_robustness_slope
from .shifts import (
    ShiftSpec,
    ShiftedBatch,
    TargetPair,
    apply_shift,
    derive_targets,
    in_support,
    sample_shifted_batch,
)
from .toy import (
    ExperimentConfig,
    ExperimentReport,
    ToyClassifier,
    ToyDecoderConfig,
    TrainConfig,
    decode_batch,
    run_experiment,
    toy_decode,
    train_classifier,
)

__all__ = [
    "DegenerateFitError",
    "DegenerateGeometryError",
    "FormatError",
    "InfeasibleGeometryError",
    "InvalidArgumentError",
    "ShiftLabError",
    "UsageError",
    "LatentBatch",
    "LatentCode",
    "angle_between",
    "sample_prior",
    "slerp",
    "IntensityReport",
    "ball99",
    "cap_fraction",
    "intensity_analytic",
    "intensity_mc",
    "Dataset",
    "NNResult",
    "one_nn_distance",
    "one_nn_distance_naive",
    "EvalPoint",
    "SlopeFit",
    "delta_accuracy",
    "fit_robustness_slope",
    "ShiftSpec",
    "ShiftedBatch",
    "TargetPair",
    "apply_shift",
    "derive_targets",
    "in_support",
    "sample_shifted_batch",
    "ExperimentConfig",
    "ExperimentReport",
    "ToyClassifier",
    "ToyDecoderConfig",
    "TrainConfig",
    "decode_batch",
    "run_experiment",
    "toy_decode",
    "train_classifier",
]
