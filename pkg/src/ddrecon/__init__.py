"""Dual-domain cross-iteration squeeze-excitation MRI reconstruction."""

from .autograd import Tape, Tensor, add, backward, l2_loss
from .cascade import (
    CascadeConfig,
    CascadeOutputs,
    DCConfig,
    DualDomainCascade,
    data_consistency,
)
from .errors import DdreconError
from .estimator import CascadeReconstructor
from .fourier import ComplexImage, fft2c, fft2c_array, ifft2c, ifft2c_array
from .gradcheck import grad_check
from .metrics import ReconReport, nmse, psnr, ssim
from .mri import (
    DatasetSplit,
    KSpaceVolume,
    SamplingMask,
    apply_mask,
    generate_mask,
    generate_phantom,
    rss_reconstruct,
    simulate_coils,
    split_dataset,
    zero_fill_reconstruct,
)
from .optim import Adam
from .senet import SEModule, SENet, SENetConfig
from .training import LossWeights, TrainConfig, compute_loss, train

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "CascadeConfig",
    "CascadeOutputs",
    "CascadeReconstructor",
    "ComplexImage",
    "DCConfig",
    "DatasetSplit",
    "DdreconError",
    "DualDomainCascade",
    "KSpaceVolume",
    "LossWeights",
    "ReconReport",
    "SEModule",
    "SENet",
    "SENetConfig",
    "SamplingMask",
    "Tape",
    "Tensor",
    "TrainConfig",
    "add",
    "apply_mask",
    "backward",
    "compute_loss",
    "data_consistency",
    "fft2c",
    "fft2c_array",
    "generate_mask",
    "generate_phantom",
    "grad_check",
    "ifft2c",
    "ifft2c_array",
    "l2_loss",
    "nmse",
    "psnr",
    "rss_reconstruct",
    "simulate_coils",
    "split_dataset",
    "ssim",
    "train",
    "zero_fill_reconstruct",
]
