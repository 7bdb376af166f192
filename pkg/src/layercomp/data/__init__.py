from .coco import ingest_coco, segmentation_to_mask
from .files import (
    canvas_from_uint8,
    canvas_to_uint8,
    layout_from_dict,
    layout_to_dict,
    load_canvas,
    load_layout,
    save_canvas,
    save_layout,
)
from .index import (
    DatasetIndex,
    DatasetRecord,
    TrainingSample,
    load_index,
    sample_fg_batch,
    save_index,
)
from .rle import decode_rle, encode_rle
from .synth import (
    CANONICAL_COLORS,
    canonical_color,
    rasterize_shape,
    synth_dataset,
    synth_palette,
)
