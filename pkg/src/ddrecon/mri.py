"""Multi-coil k-space model: masks, RSS combination, phantom simulation.

Phase-encode undersampling keeps a centered block of low-frequency lines
plus uniformly drawn random lines so that the kept count hits the
acceleration target exactly. The synthetic dataset replaces scanner data
with randomized ellipse phantoms seen through smooth simulated coil
sensitivities whose root-sum-of-squares is normalized to one.
"""

from dataclasses import dataclass, field

import numpy as np

from .autograd import Tensor
from .errors import EmptySplitError, InfeasibleMaskError, ShapeMismatchError
from .fourier import (
    DOMAIN_KSPACE,
    ComplexImage,
    complex_to_pairs,
    fft2c_array,
    ifft2c_array,
    pairs_to_complex,
)


def _round_half_up(x):
    return int(np.floor(x + 0.5))


@dataclass
class SamplingMask:
    """Binary phase-encode line mask over the width axis."""

    lines: np.ndarray
    acceleration: float = 0.0
    center_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.lines = np.asarray(self.lines, dtype=bool)

    @property
    def width(self):
        return self.lines.shape[0]

    @property
    def n_kept(self):
        return int(self.lines.sum())


@dataclass
class KSpaceVolume:
    """Fully or partially sampled multi-coil k-space for one slice."""

    data: ComplexImage
    ncoil: int
    height: int
    width: int
    slice_id: str = ""

    @classmethod
    def from_complex(cls, z, slice_id=""):
        """Build from a complex (ncoil, H, W) array."""
        z = np.asarray(z, dtype=np.complex128)
        if z.ndim != 3:
            raise ShapeMismatchError(f"expected (ncoil, H, W) k-space, got shape {z.shape}")
        ncoil, h, w = z.shape
        tensor = Tensor(complex_to_pairs(z)[None])
        return cls(ComplexImage(tensor, DOMAIN_KSPACE), ncoil, h, w, slice_id)

    def complex(self):
        """Return the (ncoil, H, W) complex view of the sample."""
        return pairs_to_complex(self.data.tensor.data[0])


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    test: list = field(default_factory=list)

    def for_name(self, name):
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def generate_mask(width, acceleration, center_fraction, seed):
    """Draw a line mask keeping round(width/acceleration) lines total.

    The centered block of round(center_fraction*width) lines is always
    kept; the remaining budget is drawn uniformly without replacement
    from the other lines. Deterministic for a fixed seed.
    """
    if width < 8:
        raise InfeasibleMaskError(f"width must be >= 8, got {width}")
    if acceleration <= 1:
        raise InfeasibleMaskError(f"acceleration must be > 1, got {acceleration}")
    if not (0 <= center_fraction < 1):
        raise InfeasibleMaskError(
            f"center_fraction must be in [0, 1), got {center_fraction}"
        )
    n_center = _round_half_up(center_fraction * width)
    n_total = _round_half_up(width / acceleration)
    if n_center > n_total:
        raise InfeasibleMaskError(
            f"center block of {n_center} lines exceeds the kept-line budget "
            f"{n_total} at acceleration {acceleration}"
        )
    lines = np.zeros(width, dtype=bool)
    start = (width - n_center) // 2
    lines[start:start + n_center] = True
    candidates = np.flatnonzero(~lines)
    rng = np.random.default_rng(seed)
    extra = rng.choice(candidates, size=n_total - n_center, replace=False)
    lines[extra] = True
    return SamplingMask(lines, float(acceleration), float(center_fraction), int(seed))


def apply_mask(k: KSpaceVolume, mask: SamplingMask) -> KSpaceVolume:
    """Zero every coil's k-space columns where the mask is false."""
    if mask.width != k.width:
        raise ShapeMismatchError(
            f"mask length {mask.width} does not match k-space width {k.width}"
        )
    masked = k.data.tensor.data * mask.lines[None, None, None, :]
    vol = KSpaceVolume(
        ComplexImage(Tensor(masked), DOMAIN_KSPACE), k.ncoil, k.height, k.width, k.slice_id
    )
    return vol


def rss_reconstruct(k: KSpaceVolume) -> Tensor:
    """Root sum-of-squares coil combination of the inverse-transformed volume."""
    imgs = ifft2c_array(k.complex())
    return Tensor(np.sqrt((np.abs(imgs) ** 2).sum(axis=0)))


def zero_fill_reconstruct(k_sparse: KSpaceVolume) -> Tensor:
    """No-learning baseline: RSS of the masked k-space as-is."""
    return rss_reconstruct(k_sparse)


def generate_phantom(height, width, n_ellipses, seed):
    """Randomized ellipse phantom with values clipped to [0, 1].

    The first ellipse is a large head-like outline; later ellipses are
    smaller internal structures with signed intensities.
    """
    if height < 32 or width < 32:
        raise ShapeMismatchError(f"phantom dims must be >= 32, got {height}x{width}")
    rng = np.random.default_rng(seed)
    ys = np.linspace(-1.0, 1.0, height)[:, None]
    xs = np.linspace(-1.0, 1.0, width)[None, :]
    img = np.zeros((height, width))
    for e in range(n_ellipses):
        if e == 0:
            cx, cy = rng.uniform(-0.08, 0.08, size=2)
            a, b = rng.uniform(0.55, 0.8, size=2)
            intensity = rng.uniform(0.35, 0.65)
        else:
            cx, cy = rng.uniform(-0.45, 0.45, size=2)
            a, b = rng.uniform(0.08, 0.45, size=2)
            intensity = rng.uniform(-0.35, 0.75)
        theta = rng.uniform(0.0, np.pi)
        ct, st = np.cos(theta), np.sin(theta)
        xr = (xs - cx) * ct + (ys - cy) * st
        yr = -(xs - cx) * st + (ys - cy) * ct
        inside = (xr / a) ** 2 + (yr / b) ** 2 <= 1.0
        img += intensity * inside
    return Tensor(np.clip(img, 0.0, 1.0))


def sensitivity_maps(height, width, ncoil, seed):
    """Smooth complex coil sensitivities normalized so sum |s|^2 == 1.

    Gaussian magnitudes centered at evenly spaced angles around the field
    of view, with seeded linear phase ramps per coil.
    """
    rng = np.random.default_rng(seed)
    ys = np.arange(height)[:, None] - (height - 1) / 2.0
    xs = np.arange(width)[None, :] - (width - 1) / 2.0
    radius = 0.5 * max(height, width)
    sigma = 0.6 * min(height, width)
    maps = np.empty((ncoil, height, width), dtype=np.complex128)
    for c in range(ncoil):
        angle = 2.0 * np.pi * c / ncoil
        cy = radius * np.sin(angle)
        cx = radius * np.cos(angle)
        mag = np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * sigma ** 2))
        ramp = rng.uniform(-1.5, 1.5, size=2) * np.pi / max(height, width)
        phase = ramp[0] * xs + ramp[1] * ys + rng.uniform(0.0, 2.0 * np.pi)
        maps[c] = mag * np.exp(1j * phase)
    rss = np.sqrt((np.abs(maps) ** 2).sum(axis=0))
    return maps / rss


def simulate_coils(image, ncoil, seed, noise_sigma=0.0):
    """Fully sampled multi-coil k-space of a real image.

    The sensitivity normalization makes RSS of the noise-free simulation
    reproduce the input image.
    """
    if ncoil < 1:
        raise ShapeMismatchError(f"ncoil must be >= 1, got {ncoil}")
    img = image.data if isinstance(image, Tensor) else np.asarray(image, dtype=np.float64)
    h, w = img.shape
    maps = sensitivity_maps(h, w, ncoil, seed)
    coil_imgs = img[None, :, :] * maps
    kspace = fft2c_array(coil_imgs)
    if noise_sigma > 0:
        noise_rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5EED]))
        kspace = kspace + noise_sigma * (
            noise_rng.standard_normal(kspace.shape)
            + 1j * noise_rng.standard_normal(kspace.shape)
        )
    return KSpaceVolume.from_complex(kspace)


def split_dataset(ids, fractions, seed):
    """Seeded shuffle then contiguous partition into train/val/test.

    Sizes follow floor rounding for train and val; the remainder goes to
    test, so the parts are always disjoint and cover everything.
    """
    ids = list(ids)
    if len(ids) < 3:
        raise EmptySplitError(f"need at least 3 ids to split, got {len(ids)}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise EmptySplitError(f"split fractions must sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    order = list(ids)
    rng.shuffle(order)
    n = len(order)
    n_train = int(np.floor(fractions[0] * n))
    n_val = int(np.floor(fractions[1] * n))
    return DatasetSplit(
        train=order[:n_train],
        val=order[n_train:n_train + n_val],
        test=order[n_train + n_val:],
    )
