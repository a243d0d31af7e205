"""Diversity-promoting ensembles for binary segmentation model zoos.

Given a pool of segmentation models' per-slice probability maps and the
ground truth, this package scores each model (Dice/IoU), measures
pairwise agreement between models, greedily selects a small ensemble
that trades individual accuracy against redundancy, fuses the members by
soft plurality voting, and reports budget sweeps. A deterministic
synthetic generator stands in for trained models so the full pipeline
runs at desk scale.

Every stage is bit-reproducible: fixed reduction orders, exact tie
rules, counter-based randomness, and 17-digit decimal serialization.
"""

from .correlation import (
    CorrelationMatrix,
    correlation_matrix,
    export_heatmap,
    pairwise_dice,
    read_correlation_csv,
    write_correlation_csv,
)
from .errors import (
    BadMagicError,
    DimensionMismatchError,
    DipeError,
    DuplicateModelIdError,
    ManifestError,
    MissingPredictionError,
    RleError,
    TensorFormatError,
    TruncatedFileError,
    ValueRangeError,
    VersionMismatchError,
)
from .fusion import (
    FusedPrediction,
    evaluate_ensemble,
    evaluate_members,
    export_fused,
    fuse,
    fuse_prediction,
    fuse_stack,
)
from .metrics import (
    DEFAULT_THRESHOLD,
    ModelScore,
    dataset_dice,
    dataset_iou,
    dice_vector,
    plane_dice,
    plane_iou,
    score_models,
    slice_dice,
    slice_iou,
    threshold,
)
from .report import SweepReport, SweepRow, parse_sweep_csv, render, sweep
from .selection import (
    EnsembleSelection,
    SelectionScore,
    avg_score,
    select_all,
    select_dipe,
    select_dipe_ablated,
    select_exhaustive,
    select_topk,
    selection_from_dict,
    selection_to_dict,
)
from .synth import (
    SynthModel,
    SynthSpec,
    generate,
    load_synth_spec,
    synth_spec_from_dict,
    synth_spec_to_dict,
)
from .tensor_io import (
    BinaryMaskSet,
    Manifest,
    ModelRecord,
    ProbabilityMap,
    SliceRecord,
    decode_rle,
    encode_rle,
    load_manifest,
    read_probability_map,
    read_rle_csv,
    read_tensor_header,
    write_probability_map,
    write_rle_csv,
)

__version__ = "0.1.0"
