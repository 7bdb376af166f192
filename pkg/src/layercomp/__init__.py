"""Layer-based sequential scene generation.

Scenes are assembled as an ordered stack: a generated (or uploaded)
background canvas followed by one foreground object per step, each
object conditioned on its own mask, class, and noise seed.  The
package covers the full loop: synthetic data, network definitions,
adversarial training, interactive composition, evaluation, and an
HTTP service for driving sessions remotely.
"""

from .errors import (
    CheckpointError,
    ConfigHashMismatchError,
    ContractError,
    EmptyMaskError,
    InvalidInputError,
    LayerCompError,
    NumericalStabilityError,
    OutOfFrameError,
    TrainingDivergenceError,
)
from .layout import (
    BBox,
    InstanceMask,
    SemanticLayout,
    aggregate,
    apply_affine,
    bbox_mask,
    bbox_of,
    mask_out,
    occupancy_of,
)
from .losses import (
    LossWeights,
    adv_loss_d,
    adv_loss_g,
    bg_total,
    feature_matching,
    fg_rec_loss,
    fg_total,
    mask_gen_loss,
    masked_l2,
)
from .trainer import TrainConfig, TrainResult, lr_schedule, train_bg, train_fg, train_mask_gen
from .composer import (
    ComposerEngine,
    CompositionSession,
    compose,
    expand_seed,
    load_session,
    run_experiment,
    save_session,
    session_from_dict,
    session_to_dict,
)

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "CheckpointError",
    "ComposerEngine",
    "CompositionSession",
    "ConfigHashMismatchError",
    "ContractError",
    "EmptyMaskError",
    "InstanceMask",
    "InvalidInputError",
    "LayerCompError",
    "LossWeights",
    "NumericalStabilityError",
    "OutOfFrameError",
    "SemanticLayout",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergenceError",
    "adv_loss_d",
    "adv_loss_g",
    "aggregate",
    "apply_affine",
    "bbox_mask",
    "bbox_of",
    "bg_total",
    "compose",
    "expand_seed",
    "feature_matching",
    "fg_rec_loss",
    "fg_total",
    "lr_schedule",
    "load_session",
    "mask_gen_loss",
    "mask_out",
    "masked_l2",
    "occupancy_of",
    "run_experiment",
    "save_session",
    "session_from_dict",
    "session_to_dict",
    "train_bg",
    "train_fg",
    "train_mask_gen",
    "__version__",
]
