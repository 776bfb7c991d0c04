"""iCLAP: Iterative Closest Labeled Point registration and the surrounding
tactile-kinesthetic object recognition pipelines (BoW, ICP, fusion)."""

from .codebook import (
    Codebook,
    WordHistogram,
    assign_label,
    build_histogram,
    extract_features,
    fit_codebook,
    histogram_intersection_distance,
    load_codebook,
    save_codebook,
)
from .dataset import (
    ExplorationTrace,
    SyntheticObject,
    TactileFrame,
    generate_object_suite,
    load_dataset,
    save_dataset,
    simulate_exploration,
)
from .errors import (
    ClassificationError,
    ConfigError,
    DimensionError,
    EmptyCloud,
    FormatError,
    IclapError,
    InsufficientData,
    NumericalFailure,
)
from .evaluation import EvalReport, leave_one_out, run_loo, weight_sweep
from .fusion import FusionSpec, fuse
from .geometry import (
    KdIndex,
    RigidTransform,
    apply_transform,
    centroid,
    optimal_rigid_alignment,
)
from .recognition import (
    DistanceVector,
    ModelLibrary,
    ObjectModel,
    classify_bow,
    classify_icp,
    classify_iclap,
    decide,
    load_library,
    save_library,
)
from .registration import RegistrationConfig, RegistrationResult, register, residual_error

__version__ = "0.1.0"
