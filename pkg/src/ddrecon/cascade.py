"""Dual-domain cascade: image/k-space network pairs bridged by the FFT.

Each iteration runs an image-domain network on the inverse transform of
the previous k-space, then a k-space network wrapped by two data
consistency stages. Cross-iteration residual connections add the previous
iteration's image and k-space outputs to the next iteration's inputs.
"""

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor, add, add_const, mul_const
from .errors import ShapeMismatchError
from .fourier import (
    DOMAIN_IMAGE,
    DOMAIN_KSPACE,
    ComplexImage,
    fft2c,
    ifft2c,
    ifft2c_array,
    pairs_to_complex,
)
from .mri import KSpaceVolume, SamplingMask
from .nn import Module, ModuleList
from .senet import SENet, SENetConfig


@dataclass
class DCConfig:
    """Linear combination level for data consistency."""

    lam: float = 0.05

    def __post_init__(self):
        if self.lam < 0:
            raise ShapeMismatchError(f"dc lambda must be >= 0, got {self.lam}")


@dataclass
class CascadeConfig:
    n_iterations: int = 2
    use_cross_iteration_residual: bool = True
    inet: SENetConfig = None
    knet: SENetConfig = None
    dc: DCConfig = field(default_factory=DCConfig)
    ncoil: int = 4

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ShapeMismatchError(
                f"n_iterations must be >= 1, got {self.n_iterations}"
            )
        channels = 2 * self.ncoil
        if self.inet is None:
            self.inet = SENetConfig(channels, channels)
        if self.knet is None:
            self.knet = SENetConfig(channels, channels)
        for name, cfg in (("inet", self.inet), ("knet", self.knet)):
            if cfg.in_channels != channels or cfg.out_channels != channels:
                raise ShapeMismatchError(
                    f"{name} channels ({cfg.in_channels}->{cfg.out_channels}) must equal "
                    f"2*ncoil = {channels}"
                )


@dataclass
class CascadeOutputs:
    images: list  # ComplexImage[image] per iteration
    kspaces: list  # ComplexImage[kspace] per iteration
    final_image: Tensor  # (N, H, W), real, non-negative


def _mask_rows(mask, n, width):
    """Normalize mask input to a boolean (N, width) array."""
    if isinstance(mask, SamplingMask):
        rows = mask.lines[None, :]
    else:
        rows = np.asarray(mask, dtype=bool)
        if rows.ndim == 1:
            rows = rows[None, :]
    if rows.shape[1] != width:
        raise ShapeMismatchError(
            f"mask width {rows.shape[1]} does not match data width {width}"
        )
    if rows.shape[0] == 1 and n > 1:
        rows = np.broadcast_to(rows, (n, width))
    elif rows.shape[0] != n:
        raise ShapeMismatchError(
            f"mask batch {rows.shape[0]} does not match data batch {n}"
        )
    return rows


def data_consistency(k_pre: ComplexImage, k_s, mask, lam) -> ComplexImage:
    """Blend predicted k-space with measurements on sampled columns.

    Sampled columns become (lam*pred + measured) / (lam + 1); unsampled
    columns pass through unchanged. Only the prediction carries gradient,
    scaled by lam/(lam+1) on sampled columns and 1 elsewhere. Sampling is
    decided by the mask, not by testing measured values against zero, so
    genuinely zero-valued measured coefficients are still enforced.
    """
    ks_arr = k_s.data.tensor.data if isinstance(k_s, KSpaceVolume) else np.asarray(k_s)
    x = k_pre.tensor
    if ks_arr.shape != x.data.shape:
        raise ShapeMismatchError(
            f"data_consistency: prediction shape {x.data.shape} vs measured shape {ks_arr.shape}"
        )
    n, _, _, width = x.data.shape
    rows = _mask_rows(mask, n, width)
    cols = rows[:, None, None, :]
    lam = float(lam)
    scale = np.where(cols, lam / (lam + 1.0), 1.0)
    offset = np.where(cols, ks_arr / (lam + 1.0), 0.0)
    out = add_const(mul_const(x, scale), offset)
    return ComplexImage(out, DOMAIN_KSPACE)


class INet(Module):
    """Image-domain block: inverse transform, optional residual, network."""

    def __init__(self, config: SENetConfig, rng):
        super().__init__()
        self.net = SENet(config, rng)

    def forward(self, k_in: ComplexImage, residual_image=None) -> ComplexImage:
        x = ifft2c(k_in)
        if residual_image is not None:
            if residual_image.tensor.data.shape != x.tensor.data.shape:
                raise ShapeMismatchError(
                    f"image residual shape {residual_image.tensor.data.shape} vs "
                    f"{x.tensor.data.shape}"
                )
            x = ComplexImage(add(x.tensor, residual_image.tensor), DOMAIN_IMAGE)
        return ComplexImage(self.net(x.tensor), DOMAIN_IMAGE)


class KNet(Module):
    """K-space block: transform, optional residual, then DC -> network -> DC."""

    def __init__(self, config: SENetConfig, rng):
        super().__init__()
        self.net = SENet(config, rng)

    def forward(self, i_in: ComplexImage, residual_kspace, k_s, mask, lam) -> ComplexImage:
        k = fft2c(i_in)
        if residual_kspace is not None:
            if residual_kspace.tensor.data.shape != k.tensor.data.shape:
                raise ShapeMismatchError(
                    f"k-space residual shape {residual_kspace.tensor.data.shape} vs "
                    f"{k.tensor.data.shape}"
                )
            k = ComplexImage(add(k.tensor, residual_kspace.tensor), DOMAIN_KSPACE)
        k = data_consistency(k, k_s, mask, lam)
        k = ComplexImage(self.net(k.tensor), DOMAIN_KSPACE)
        return data_consistency(k, k_s, mask, lam)


class DualDomainCascade(Module):
    """The full reconstruction cascade over N iterations."""

    def __init__(self, config: CascadeConfig, seed=0):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(seed)
        self.inets = ModuleList(
            [INet(config.inet, rng) for _ in range(config.n_iterations)]
        )
        self.knets = ModuleList(
            [KNet(config.knet, rng) for _ in range(config.n_iterations)]
        )

    def forward(self, k_s: ComplexImage, mask) -> CascadeOutputs:
        if k_s.domain != DOMAIN_KSPACE:
            raise ShapeMismatchError("cascade input must be tagged as k-space")
        cfg = self.config
        ks_const = k_s.tensor.data
        lam = cfg.dc.lam
        images, kspaces = [], []
        prev_image = prev_kspace = None
        k_cur = k_s
        for m in range(cfg.n_iterations):
            use_res = cfg.use_cross_iteration_residual and m > 0
            image = self.inets[m](k_cur, prev_image if use_res else None)
            kspace = self.knets[m](
                image, prev_kspace if use_res else None, ks_const, mask, lam
            )
            images.append(image)
            kspaces.append(kspace)
            prev_image, prev_kspace = image, kspace
            k_cur = kspace
        final = _rss_from_pairs(kspaces[-1].tensor.data)
        return CascadeOutputs(images=images, kspaces=kspaces, final_image=final)


def _rss_from_pairs(kspace_pairs):
    """Detached RSS image of a (N, 2C, H, W) k-space array."""
    imgs = ifft2c_array(pairs_to_complex(kspace_pairs))
    return Tensor(np.sqrt((np.abs(imgs) ** 2).sum(axis=-3)))
