from .idx import (
    IMAGES_MAGIC,
    LABELS_MAGIC,
    RawDataset,
    load_idx,
    load_mnist,
    mnist_available,
    read_idx,
    resolve_data_dir,
)
from .pipeline import (
    VALID_INPUT_BITS,
    PipelineConfig,
    batches,
    bin_width,
    dataset_inputs,
    discretize_pixels,
    normalize_images,
    quantize_normalized,
    raw_batches,
)

__all__ = [
    "IMAGES_MAGIC",
    "LABELS_MAGIC",
    "VALID_INPUT_BITS",
    "PipelineConfig",
    "RawDataset",
    "batches",
    "bin_width",
    "dataset_inputs",
    "discretize_pixels",
    "load_idx",
    "load_mnist",
    "mnist_available",
    "normalize_images",
    "quantize_normalized",
    "raw_batches",
    "read_idx",
    "resolve_data_dir",
]
