"""Input validation helpers for the public estimator API."""

import numpy as np

from .errors import NonFiniteValueError, ShapeMismatchError
from .mri import KSpaceVolume, SamplingMask


def check_finite(arr, name):
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr.view(np.float64) if np.iscomplexobj(arr) else arr)):
        raise NonFiniteValueError(f"{name} contains NaN or Inf values")
    return arr


def check_volume_mask_pairs(X, name="X"):
    """Validate a sequence of (KSpaceVolume, SamplingMask) pairs.

    All volumes must share one geometry; every mask must match the width.
    """
    pairs = list(X)
    if not pairs:
        raise ShapeMismatchError(f"{name} is empty")
    geometry = None
    for i, item in enumerate(pairs):
        try:
            volume, mask = item
        except (TypeError, ValueError) as exc:
            raise ShapeMismatchError(
                f"{name}[{i}] must be a (KSpaceVolume, SamplingMask) pair"
            ) from exc
        if not isinstance(volume, KSpaceVolume) or not isinstance(mask, SamplingMask):
            raise ShapeMismatchError(
                f"{name}[{i}] must be a (KSpaceVolume, SamplingMask) pair, "
                f"got ({type(volume).__name__}, {type(mask).__name__})"
            )
        geo = (volume.ncoil, volume.height, volume.width)
        if geometry is None:
            geometry = geo
        elif geo != geometry:
            raise ShapeMismatchError(
                f"{name}[{i}] geometry {geo} differs from {geometry}"
            )
        if mask.width != volume.width:
            raise ShapeMismatchError(
                f"{name}[{i}]: mask width {mask.width} vs volume width {volume.width}"
            )
        check_finite(volume.data.tensor.data, f"{name}[{i}] k-space")
    return pairs, geometry
