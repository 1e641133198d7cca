"""Electrocardio-field encoding and panoramic ECG view synthesis."""

from .angular import AngularCode, PerturbationConfig, angular_encode
from .data import (
    CANONICAL_LENGTH,
    CardiacCycle,
    DatasetError,
    MultiViewCycle,
    load_dataset,
    save_dataset,
)
from .dipole import generate_dipole_dataset
from .fieldops import DeflectionSpans, map_demarcations, reverse_roi_align_1d, roi_align_1d
from .metrics import psnr, ssim_1d
from .nefnet import (
    ElectrocardioField,
    ModelConfig,
    NefNet,
    decode_view,
    encode_view,
    fuse_views,
    panorama,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import PanoramaSynthesizer
from .scratchsynth import MemoryBank, build_bank, mix, synthesize_scratch
from .training import TrainConfig, ViewGroupSplit, evaluate, standin_loss, total_loss, train
from .viewpoints import LEAD_ANGLES, Viewpoint, unit_vector

__version__ = "0.1.0"

__all__ = [
    "AngularCode",
    "CANONICAL_LENGTH",
    "CardiacCycle",
    "DatasetError",
    "DeflectionSpans",
    "ElectrocardioField",
    "LEAD_ANGLES",
    "MemoryBank",
    "ModelConfig",
    "MultiViewCycle",
    "NefNet",
    "PanoramaSynthesizer",
    "PerturbationConfig",
    "TrainConfig",
    "ViewGroupSplit",
    "Viewpoint",
    "angular_encode",
    "build_bank",
    "decode_view",
    "encode_view",
    "evaluate",
    "fuse_views",
    "generate_dipole_dataset",
    "load_checkpoint",
    "load_dataset",
    "map_demarcations",
    "mix",
    "panorama",
    "psnr",
    "reverse_roi_align_1d",
    "roi_align_1d",
    "save_checkpoint",
    "save_dataset",
    "ssim_1d",
    "standin_loss",
    "synthesize_scratch",
    "total_loss",
    "train",
    "unit_vector",
]
