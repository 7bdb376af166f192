from .fid import fid
from .iou import layout_to_labels, mean_iou
from .protocol import EvalReport, eval_protocol
from .providers import (
    ColorPrototypeSegmenter,
    RandomProjectionProvider,
    SyntheticClassifierProvider,
    SyntheticSegmenter,
)
from .stats import GaussianStats, fit_gaussian, frechet_distance, product_sqrt

__all__ = [
    "GaussianStats", "fit_gaussian", "frechet_distance", "product_sqrt",
    "fid", "layout_to_labels", "mean_iou",
    "RandomProjectionProvider", "SyntheticClassifierProvider",
    "ColorPrototypeSegmenter", "SyntheticSegmenter",
    "EvalReport", "eval_protocol",
]
