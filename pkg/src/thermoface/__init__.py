"""Thermal-face emotion recognition toolkit.

Submodules: imaging (frames, landmarks, PGM/CSV/manifest I/O), klt
(feature tracking and similarity alignment), roi (landmark polygons and
patches), spd (SPD matrix kernels and similarity measures), covmatch
(covariance signatures and least-distance matching), dne (discriminant
neighborhood embedding), lpq (local phase quantization), synth (synthetic
dataset generator), pipeline (batch runs) and cli.
"""

from . import covmatch, dne, errors, imaging, klt, lpq, pipeline, roi, spd, synth
from .covmatch import (
    ConfusionMatrix,
    CovarianceSignature,
    FpsConfig,
    build_fps,
    class_distance_matrix,
    covariance_of_fps,
    least_distance_label,
    loso_evaluate,
    match_probe,
    signature_from_frame,
)
from .dne import (
    AdjacencyF,
    DneModel,
    LabeledDataset,
    build_adjacency,
    degree_matrix,
    dne_fit,
    embed,
    knn_sets,
    nn_classify,
    objective_phi,
    pca_fit,
    point_roles,
)
from .imaging import (
    EMOTIONS,
    Emotion,
    LandmarkSet,
    SubjectRecord,
    ThermalFrame,
    gradient,
    load_frame,
    load_landmarks,
    load_manifest,
    sample_bilinear,
    save_frame,
    save_landmarks,
)
from .klt import (
    SimilarityTransform,
    TemplatePatch,
    TrackerConfig,
    TrackPoint,
    align_to_reference,
    detect_features,
    precompute_template,
    track_sequence,
    track_step,
    warp_frame,
)
from .lpq import LpqConfig, lpq_histogram, quantize_codes, stft_coefficients
from .pipeline import PipelineConfig, RunReport, run_pipeline, write_report
from .roi import (
    RoiPatch,
    RoiSpec,
    builtin_specs,
    extract_patch,
    polygon_from_landmarks,
    rasterize_mask,
)
from .spd import (
    SpdMatrix,
    cholesky_factor,
    dist_airm,
    dist_chol,
    dist_jbld,
    dist_jkld,
    dist_lerm,
    distance,
    inv_sqrt,
    matrix_exp,
    matrix_log,
)
from .synth import synth_generate

__version__ = "0.1.0"
