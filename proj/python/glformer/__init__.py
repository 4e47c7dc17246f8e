"""Global-local video feature aggregation.

Thin python facade over the C++ core: spatial-temporal multi-head
self-attention, pruned dynamic graph convolution, and adaptive global-local
feature blending, plus the TZR tensor file format and the verification
harnesses (oracle comparison, gradient checking).
"""

from ._core import (
    ConfigError,
    DimensionError,
    IoError,
    __version__,
    adjacency_tensor,
    blend,
    blend_weights,
    default_config,
    global_features,
    gradcheck,
    layer_norm,
    local_features,
    oracle_check,
    positional_encoding,
    pruned_adjacency,
    pruned_graph,
    read_tzr,
    resolve_config,
    run,
    softmax,
    synth,
    tokenize,
    write_tzr,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "IoError",
    "__version__",
    "adjacency_tensor",
    "blend",
    "blend_weights",
    "default_config",
    "global_features",
    "gradcheck",
    "layer_norm",
    "local_features",
    "oracle_check",
    "positional_encoding",
    "pruned_adjacency",
    "pruned_graph",
    "read_tzr",
    "resolve_config",
    "run",
    "softmax",
    "synth",
    "tokenize",
    "write_tzr",
]
