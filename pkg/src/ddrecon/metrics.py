"""Reconstruction quality metrics: NMSE, PSNR, SSIM, and report tables.

Complex inputs are handled per metric: NMSE runs over real and imaginary
parts jointly, while SSIM and PSNR compare magnitude images. NMSE is the
squared-norm ratio reported in percent.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .autograd import Tensor
from .errors import ShapeMismatchError, ZeroReferenceError


def _as_array(x):
    if isinstance(x, Tensor):
        return x.data
    return np.asarray(x)


def _check_shapes(pred, ref, name):
    if pred.shape != ref.shape:
        raise ShapeMismatchError(
            f"{name}: prediction shape {pred.shape} vs reference shape {ref.shape}"
        )


def nmse(pred, ref):
    """100 * ||pred - ref||^2 / ||ref||^2 over all voxels."""
    pred, ref = _as_array(pred), _as_array(ref)
    _check_shapes(pred, ref, "nmse")
    if np.iscomplexobj(pred) or np.iscomplexobj(ref):
        err = np.abs(pred - ref) ** 2
        denom = np.abs(ref) ** 2
    else:
        err = (pred - ref) ** 2
        denom = ref * ref
    denom_sum = denom.sum()
    if denom_sum == 0:
        raise ZeroReferenceError("nmse: reference has zero norm")
    return 100.0 * float(err.sum() / denom_sum)


def psnr(pred, ref):
    """10*log10(max(ref)^2 / MSE); inf when the error is exactly zero.

    Complex inputs are compared on magnitudes.
    """
    pred, ref = _as_array(pred), _as_array(ref)
    _check_shapes(pred, ref, "psnr")
    if np.iscomplexobj(pred) or np.iscomplexobj(ref):
        pred, ref = np.abs(pred), np.abs(ref)
    mse = float(np.mean((pred - ref) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(ref.max())
    return 10.0 * math.log10(peak * peak / mse)


def ssim(pred, ref, window=7, k1=0.01, k2=0.03, data_range=None):
    """Mean local SSIM with a uniform window over valid positions.

    Dynamic range defaults to max(ref) - min(ref); a constant reference
    compares as 1 when the images are equal, otherwise the range falls
    back to a tiny sentinel. Complex inputs are compared on magnitudes;
    multi-coil stacks (coil, H, W) average the per-coil values.
    """
    pred, ref = _as_array(pred), _as_array(ref)
    _check_shapes(pred, ref, "ssim")
    if np.iscomplexobj(pred) or np.iscomplexobj(ref):
        pred, ref = np.abs(pred), np.abs(ref)
    pred = pred.astype(np.float64)
    ref = ref.astype(np.float64)
    if pred.ndim == 3:
        if data_range is None:
            data_range = float(ref.max() - ref.min())
            if data_range == 0.0:
                data_range = 1.0 if np.array_equal(pred, ref) else 1e-12
        return float(np.mean([
            ssim(p, r, window, k1, k2, data_range) for p, r in zip(pred, ref)
        ]))
    if pred.ndim != 2:
        raise ShapeMismatchError(f"ssim expects 2-d or 3-d inputs, got {pred.ndim}-d")
    if min(pred.shape) < window:
        raise ShapeMismatchError(
            f"ssim: image dims {pred.shape} smaller than window {window}"
        )
    if data_range is None:
        data_range = float(ref.max() - ref.min())
        if data_range == 0.0:
            if np.array_equal(pred, ref):
                return 1.0
            data_range = 1e-12
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    def local_mean(a):
        return uniform_filter(a, size=window)

    mu_p = local_mean(pred)
    mu_r = local_mean(ref)
    var_p = local_mean(pred * pred) - mu_p * mu_p
    var_r = local_mean(ref * ref) - mu_r * mu_r
    cov = local_mean(pred * ref) - mu_p * mu_r
    num = (2 * mu_p * mu_r + c1) * (2 * cov + c2)
    den = (mu_p * mu_p + mu_r * mu_r + c1) * (var_p + var_r + c2)
    smap = num / den
    pad = window // 2
    valid = smap[pad:smap.shape[0] - pad, pad:smap.shape[1] - pad]
    return float(valid.mean())


@dataclass
class ReconReport:
    """Per-slice metric rows plus their mean and standard deviation."""

    per_slice: list  # (slice_id, nmse_percent, ssim, psnr_db)
    note: str = ""

    def aggregate(self):
        cols = np.array([[r[1], r[2], r[3]] for r in self.per_slice], dtype=np.float64)
        means = cols.mean(axis=0)
        stds = cols.std(axis=0)
        return {
            "nmse": (float(means[0]), float(stds[0])),
            "ssim": (float(means[1]), float(stds[1])),
            "psnr": (float(means[2]), float(stds[2])),
        }

    def to_text(self):
        lines = []
        if self.note:
            lines.append(f"# {self.note}")
        lines.append("slice_id\tnmse_percent\tssim\tpsnr_db")
        for sid, n, s, p in self.per_slice:
            lines.append(f"{sid}\t{n:.6g}\t{s:.6g}\t{p:.6g}")
        agg = self.aggregate()
        for key in ("nmse", "ssim", "psnr"):
            mean, std = agg[key]
            lines.append(f"# {key}: {mean:.4g} ± {std:.4g}")
        return "\n".join(lines) + "\n"
