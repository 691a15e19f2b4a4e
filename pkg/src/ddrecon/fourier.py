"""Centered, orthonormal 2D Fourier transforms over paired real/imag channels.

Convention: ifftshift -> 2D DFT -> fftshift on the last two axes, scaled by
1/sqrt(H*W) in both directions, so the transform is unitary and the DC
coefficient sits at the array center. Both directions are linear, so their
tape gradients are the opposite transform applied to the upstream gradient.
"""

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, record
from .errors import DomainTagError, ShapeMismatchError

DOMAIN_IMAGE = "image"
DOMAIN_KSPACE = "kspace"


@dataclass
class ComplexImage:
    """Multi-coil complex field stored as interleaved real/imag channels.

    tensor has shape (N, 2*ncoil, H, W): channel 2k is the real part and
    channel 2k+1 the imaginary part of coil k. The domain tag flips under
    fft2c/ifft2c and under nothing else.
    """

    tensor: Tensor
    domain: str

    def __post_init__(self):
        if self.tensor.data.ndim != 4:
            raise ShapeMismatchError(
                f"ComplexImage expects a 4-d tensor, got shape {self.tensor.data.shape}"
            )
        if self.tensor.data.shape[1] % 2:
            raise ShapeMismatchError(
                f"ComplexImage channel count must be even, got {self.tensor.data.shape[1]}"
            )
        if self.domain not in (DOMAIN_IMAGE, DOMAIN_KSPACE):
            raise DomainTagError(f"unknown domain tag {self.domain!r}")

    @property
    def ncoil(self):
        return self.tensor.data.shape[1] // 2

    @property
    def height(self):
        return self.tensor.data.shape[2]

    @property
    def width(self):
        return self.tensor.data.shape[3]


def pairs_to_complex(arr):
    """(.., 2C, H, W) real pairs -> (.., C, H, W) complex."""
    return arr[..., 0::2, :, :] + 1j * arr[..., 1::2, :, :]


def complex_to_pairs(z):
    """(.., C, H, W) complex -> (.., 2C, H, W) real pairs."""
    shape = list(z.shape)
    shape[-3] *= 2
    out = np.empty(shape, dtype=np.float64)
    out[..., 0::2, :, :] = z.real
    out[..., 1::2, :, :] = z.imag
    return out


def fft2c_array(z):
    """Centered orthonormal 2D FFT over the last two axes of a complex array."""
    shifted = np.fft.ifftshift(z, axes=(-2, -1))
    spec = np.fft.fft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(spec, axes=(-2, -1))


def ifft2c_array(z):
    """Inverse of fft2c_array, same shift and scaling conventions."""
    shifted = np.fft.ifftshift(z, axes=(-2, -1))
    img = np.fft.ifft2(shifted, axes=(-2, -1), norm="ortho")
    return np.fft.fftshift(img, axes=(-2, -1))


def _fft_pairs(arr):
    return complex_to_pairs(fft2c_array(pairs_to_complex(arr)))


def _ifft_pairs(arr):
    return complex_to_pairs(ifft2c_array(pairs_to_complex(arr)))


def _check(x, expected_domain, opname):
    if x.domain != expected_domain:
        raise DomainTagError(f"{opname} expects domain '{expected_domain}', got '{x.domain}'")
    if x.tensor.data.shape[1] % 2:
        raise ShapeMismatchError(
            f"{opname}: odd channel count {x.tensor.data.shape[1]}"
        )


def fft2c(x: ComplexImage) -> ComplexImage:
    """Project a multi-coil image to k-space; unitary, so the gradient rule
    is the inverse transform."""
    _check(x, DOMAIN_IMAGE, "fft2c")

    def bwd(g):
        return (_ifft_pairs(g),)

    out = record(_fft_pairs(x.tensor.data), (x.tensor,), bwd)
    return ComplexImage(out, DOMAIN_KSPACE)


def ifft2c(x: ComplexImage) -> ComplexImage:
    """Reconstruct a multi-coil image from k-space."""
    _check(x, DOMAIN_KSPACE, "ifft2c")

    def bwd(g):
        return (_fft_pairs(g),)

    out = record(_ifft_pairs(x.tensor.data), (x.tensor,), bwd)
    return ComplexImage(out, DOMAIN_IMAGE)
