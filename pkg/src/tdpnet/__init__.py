"""Streaming CNN inference for event classification on small sensor nodes.

The package covers the spectrogram front end, a fixed convolutional
classifier with layer-by-layer and time-distributed streaming inference,
power-of-two weight quantization, and the event-triggered sensing chain
(triggering, co-detection and energy accounting).
"""
from .estimators import SpectrogramExtractor, TDPClassifier
from .exceptions import (DimensionError, FormatError, InsufficientDataError, ParameterError,
                         StateError, TDPError, UndefinedMetricError, UnsupportedArchitectureError,
                         WeightError)
from .network import (LayerSpec, NetworkSpec, WeightStore, batch_macs, canonical_network,
                      infer_batch, infer_windows, peak_intermediate_bytes, random_weights,
                      zero_weights)
from .preprocess import SpectrogramStream, spectrogram
from .quantize import Pow2Codebook, Pow2Quantizer, quantize_store
from .streaming import StreamPlan, StreamState, derive_plan, plan_memory_bytes, step_cost_ops
from .weightfile import load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "SpectrogramExtractor", "TDPClassifier",
    "DimensionError", "FormatError", "InsufficientDataError", "ParameterError", "StateError",
    "TDPError", "UndefinedMetricError", "UnsupportedArchitectureError", "WeightError",
    "LayerSpec", "NetworkSpec", "WeightStore", "batch_macs", "canonical_network", "infer_batch",
    "infer_windows", "peak_intermediate_bytes", "random_weights", "zero_weights",
    "SpectrogramStream", "spectrogram", "Pow2Codebook", "Pow2Quantizer", "quantize_store",
    "StreamPlan", "StreamState", "derive_plan", "plan_memory_bytes", "step_cost_ops",
    "load_weights", "save_weights", "__version__",
]
