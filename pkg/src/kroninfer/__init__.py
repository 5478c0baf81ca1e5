"""Random Kronecker multiplex graphs: sampling, spectral denoising and parameter recovery."""

from .denoise import DenoiseReport, denoise, estimate_p, estimate_pk, shrinkage_estimate
from .errors import (
    CapacityError,
    DivergenceError,
    KronInferError,
    MalformedInputError,
    ParameterError,
    ShapeError,
    SingularTensorError,
)
from .kron_graph import GraphSample, InitiatorParams, KronShape, sample_graph, signal_tensor
from .pipeline import InferenceResult, RunConfig, evaluate, infer
from .solve import SolveConfig, SolveResult, solve
from .tensor import EvenTensor, flatten, unflatten

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DenoiseReport",
    "DivergenceError",
    "EvenTensor",
    "GraphSample",
    "InferenceResult",
    "InitiatorParams",
    "KronInferError",
    "KronShape",
    "MalformedInputError",
    "ParameterError",
    "RunConfig",
    "ShapeError",
    "SingularTensorError",
    "SolveConfig",
    "SolveResult",
    "denoise",
    "estimate_p",
    "estimate_pk",
    "evaluate",
    "flatten",
    "infer",
    "sample_graph",
    "shrinkage_estimate",
    "signal_tensor",
    "solve",
    "unflatten",
]
