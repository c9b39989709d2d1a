"""Online post-processing for activity detection in untrimmed video.

Streamed per-clip foreground masks are turned into tubelets, scored,
merged into action-agnostic tubes online, and split into class-specific
detections; a DET-curve scorer and a synthetic scenario generator close
the loop. See the demos/ directory for narrative walkthroughs.
"""

from .core import (
    ActionInstance,
    ActionTube,
    FrameBox,
    Tubelet,
    box_iou,
    temporal_intersection,
    tube_link_score,
)
from .classify import (
    ClassCatalog,
    ConstantScoreSource,
    OracleScoreSource,
    TableScoreSource,
    multilabel_bce,
    score_tubelet,
)
from .extraction import (
    ExtractionConfig,
    binarize,
    components_to_tubelets,
    extract,
    label_components,
)
from .losses import (
    LossConfig,
    PatchGrid,
    bce_loss,
    build_pyramid,
    dice_loss,
    downsample_mask,
    multiscale_loss,
    patch_dice_gradient,
    patch_dice_loss,
)
from .merging import LinkConfig, TubeletMerger, merge_tubelets, merge_tubes
from .metrics import (
    DetCurve,
    GroundTruthInstance,
    ScoringConfig,
    align,
    audc,
    det_curve,
    per_class_report,
    pmiss_at_fa,
    temporal_iou,
)
from .pipeline import PipelineConfig, ThroughputReport, run_stream
from .splitting import SplitConfig, action_split, extract_actions, smooth
from .synthetic import ActorSpec, SyntheticScenario, generate_dataset

__version__ = "0.1.0"

__all__ = [
    "ActionInstance",
    "ActionTube",
    "ActorSpec",
    "ClassCatalog",
    "ConstantScoreSource",
    "DetCurve",
    "ExtractionConfig",
    "FrameBox",
    "GroundTruthInstance",
    "LinkConfig",
    "LossConfig",
    "OracleScoreSource",
    "PatchGrid",
    "PipelineConfig",
    "ScoringConfig",
    "SplitConfig",
    "SyntheticScenario",
    "TableScoreSource",
    "ThroughputReport",
    "Tubelet",
    "TubeletMerger",
    "action_split",
    "align",
    "audc",
    "bce_loss",
    "binarize",
    "box_iou",
    "build_pyramid",
    "components_to_tubelets",
    "det_curve",
    "dice_loss",
    "downsample_mask",
    "extract",
    "extract_actions",
    "generate_dataset",
    "label_components",
    "merge_tubelets",
    "merge_tubes",
    "multilabel_bce",
    "multiscale_loss",
    "patch_dice_gradient",
    "patch_dice_loss",
    "per_class_report",
    "pmiss_at_fa",
    "run_stream",
    "score_tubelet",
    "smooth",
    "temporal_intersection",
    "temporal_iou",
    "tube_link_score",
]
