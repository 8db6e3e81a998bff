"""linkseq: generative link-sequence modeling for temporal link prediction.

Chronologically ordered edge lists are tokenized into community-pair
sequences by a jointly trained clustering, modeled with a recurrent
network, and turned into candidate future links by two-step sampling.
Classic baselines and a windowed benchmark harness are included.
"""

from .baselines import AdamicAdar, JaccardCoefficient, MatrixFactorization
from .datasets import make_cyclic_network, make_social_stream
from .evaluation import MetricsReport, run_benchmark
from .generator import GeneratedLinkSet, GenerationConfig
from .ingest import (
    ParseError,
    SplitSpec,
    TemporalEdgeRecord,
    TemporalNetwork,
    WindowSpec,
    binarize_ratings,
    build_network,
    make_windows,
    parse_edge_list,
    split,
)
from .model import GLSM, TrainConfig, load_checkpoint, save_checkpoint
from .tokenizer import TokenAlphabet

__version__ = "0.1.0"

__all__ = [
    "GLSM",
    "AdamicAdar",
    "JaccardCoefficient",
    "MatrixFactorization",
    "GeneratedLinkSet",
    "GenerationConfig",
    "MetricsReport",
    "ParseError",
    "SplitSpec",
    "TemporalEdgeRecord",
    "TemporalNetwork",
    "TokenAlphabet",
    "TrainConfig",
    "WindowSpec",
    "__version__",
    "binarize_ratings",
    "build_network",
    "load_checkpoint",
    "make_cyclic_network",
    "make_social_stream",
    "make_windows",
    "parse_edge_list",
    "run_benchmark",
    "save_checkpoint",
    "split",
]
