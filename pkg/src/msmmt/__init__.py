"""Multi-scale multi-modal transformer pipeline for micro-motion recognition.

The package covers the full desk-scale pipeline: a minimal autodiff tensor
core with AdamW, clip preprocessing (alignment, augmentation, motion
magnification), the two modality extractors (rank-pooled dynamic images and
TV-L1 flow/strain images), the multi-scale transformer with attention-weight
patch fusion, the contrastive + cross-entropy objective, and a
leave-one-subject-out evaluation harness with a synthetic dataset generator.
"""

from .autodiff import NumericError, ShapeError, Tensor, concat, dropout, layernorm, softmax
from .dynimg import DynamicImage, RankPoolProblem, dynamic_image, rank_pool, render_dynamic_image
from .evm import evm_magnify
from .flow import (
    FlowField,
    StrainMap,
    TVL1Params,
    clip_flow,
    compose_flow_os,
    flow_os_image,
    strain,
    tvl1_flow,
)
from .losses import ContrastiveBatch, contrastive_loss, cosine_sim, cross_entropy, total_loss
from .loso import LOSOResult, Sample, TrainConfig, loso_split, run_alpha_sweep, run_loso
from .metrics import MetricsReport, compute_metrics
from .model import MicroExpressionModel, ModelConfig, load_checkpoint, multiscale_views, save_checkpoint
from .optim import AdamW
from .prep import VideoClip, align_and_crop, augment, load_frames, load_landmarks_csv
from .synth import SyntheticSpec, gen_synthetic
from .tensorio import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "AdamW",
    "ContrastiveBatch",
    "DynamicImage",
    "FlowField",
    "LOSOResult",
    "MetricsReport",
    "MicroExpressionModel",
    "ModelConfig",
    "NumericError",
    "RankPoolProblem",
    "Sample",
    "ShapeError",
    "StrainMap",
    "SyntheticSpec",
    "TVL1Params",
    "Tensor",
    "TrainConfig",
    "VideoClip",
    "align_and_crop",
    "augment",
    "clip_flow",
    "compose_flow_os",
    "compute_metrics",
    "concat",
    "contrastive_loss",
    "cosine_sim",
    "cross_entropy",
    "dropout",
    "dynamic_image",
    "evm_magnify",
    "flow_os_image",
    "gen_synthetic",
    "layernorm",
    "load_checkpoint",
    "load_frames",
    "load_landmarks_csv",
    "loso_split",
    "multiscale_views",
    "rank_pool",
    "read_tensor",
    "render_dynamic_image",
    "run_alpha_sweep",
    "run_loso",
    "save_checkpoint",
    "softmax",
    "strain",
    "total_loss",
    "tvl1_flow",
    "write_tensor",
]
