from .layers import LAYER_KINDS, LayerSpec, softmax_xent
from .model import (
    ARCHITECTURES,
    ForwardCache,
    Gradients,
    ModelGraph,
    accuracy,
    backward,
    binary_weights_in_range,
    build,
    build_from_specs,
    forward,
    loss,
    predict,
)
from .optimizer import SGDState, sgd_step, step_decay_lr
from .checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "ARCHITECTURES",
    "FORMAT_VERSION",
    "ForwardCache",
    "Gradients",
    "LAYER_KINDS",
    "LayerSpec",
    "MAGIC",
    "ModelGraph",
    "SGDState",
    "accuracy",
    "backward",
    "binary_weights_in_range",
    "build",
    "build_from_specs",
    "decode_checkpoint",
    "encode_checkpoint",
    "forward",
    "load_checkpoint",
    "loss",
    "predict",
    "save_checkpoint",
    "sgd_step",
    "softmax_xent",
    "step_decay_lr",
]
