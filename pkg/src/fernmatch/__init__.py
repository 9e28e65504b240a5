"""Real-time keypoint recognition with random ferns.

Train a semi-naive Bayes classifier over binary pixel-pair tests on
synthetically warped views of a model image, recognize those keypoints in
new images, and verify matches geometrically with a RANSAC homography.
"""

from .baseline import attach_reference_patches, ncc_baseline_classify
from .classifier import (
    ClassifierTable,
    FernCounts,
    accumulate,
    classify,
    counts_new,
    finalize,
    posterior,
)
from .detector import DetectorParams, Keypoint, detect_keypoints
from .ferns import (
    Fern,
    FernEnsemble,
    FernTestPair,
    build_ensemble,
    compute_feature,
    fern_value,
    fern_values,
)
from .geometry import (
    Correspondence,
    DegenerateGeometryError,
    Homography,
    collect_correspondences,
    estimate_homography_dlt,
    ransac_homography,
)
from .image import (
    GrayImage,
    Patch,
    PatchBorderError,
    PgmError,
    PgmFormatError,
    PgmTruncatedError,
    PgmUnsupportedError,
    extract_patch,
    gaussian_smooth,
    load_pgm,
    sample_bilinear,
    save_pgm,
)
from .model_io import ModelFormatError, load_model, model_file_size, save_model
from .training import (
    InsufficientKeypointsError,
    PatchClass,
    TrainedModel,
    TrainingConfig,
    select_stable_keypoints,
    train_model,
    training_report,
)
from .warp import (
    WarpParams,
    WarpRanges,
    apply_warp,
    map_point,
    map_point_inverse,
    map_points,
    map_points_inverse,
    sample_warp,
)

__version__ = "0.1.0"
