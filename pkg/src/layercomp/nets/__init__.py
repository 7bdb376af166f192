from .blocks import DiscBlock, DiscBlockFirst, EncBlock, GenBlock, channel_widths
from .checkpoint import NET_KINDS, load_checkpoint, load_net, read_manifest, save_checkpoint
from .config import NetConfig
from .discriminators import ConditionalDiscriminator, LocalDiscriminator, MaskCropDiscriminator
from .generators import BackgroundGenerator, ForegroundGenerator, MaskGenerator
from .ops import (
    bg_forward,
    bg_inference,
    canvas_to_tensor,
    disc_global_forward,
    disc_local_forward,
    fg_forward,
    mask_gen_forward,
    mask_to_tensor,
    noise_to_tensor,
    tensor_to_canvas,
)
from .roi import bilinear_roi, bilinear_roi_batch
from .sn import PowerIterationState, SNConv2d, SNLinear, spectral_normalize

__all__ = [
    "NetConfig",
    "BackgroundGenerator", "ForegroundGenerator", "MaskGenerator",
    "ConditionalDiscriminator", "LocalDiscriminator", "MaskCropDiscriminator",
    "GenBlock", "EncBlock", "DiscBlock", "DiscBlockFirst", "channel_widths",
    "PowerIterationState", "SNConv2d", "SNLinear", "spectral_normalize",
    "bilinear_roi", "bilinear_roi_batch",
    "bg_forward", "bg_inference", "fg_forward", "mask_gen_forward",
    "disc_global_forward", "disc_local_forward",
    "canvas_to_tensor", "tensor_to_canvas", "mask_to_tensor", "noise_to_tensor",
    "save_checkpoint", "load_checkpoint", "load_net", "read_manifest", "NET_KINDS",
]
