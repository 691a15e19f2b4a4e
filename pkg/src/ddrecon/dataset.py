"""On-disk dataset container and the synthetic dataset builder.

Binary layout (little-endian): magic "DDMK", version u32, slice count u64;
per slice: slice_id (u16 length + UTF-8), ncoil u16, height u32, width u32,
mask as width bytes (0/1), then the full k-space as f32 interleaved (re, im)
per coil, row-major. Values are f32 on disk and f64 in memory, so slices are
quantized through f32 at synthesis time to keep round-trips bit-exact.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    EmptySplitError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionMismatchError,
)
from .mri import (
    DatasetSplit,
    KSpaceVolume,
    SamplingMask,
    generate_mask,
    generate_phantom,
    simulate_coils,
    split_dataset,
)

MAGIC = b"DDMK"
VERSION = 1


@dataclass
class SliceRecord:
    """One dataset entry: full k-space plus the mask assigned to it."""

    slice_id: str
    kspace: np.ndarray  # complex128 (ncoil, H, W), f32-exact values
    mask: np.ndarray  # bool (width,)

    @property
    def ncoil(self):
        return self.kspace.shape[0]

    @property
    def height(self):
        return self.kspace.shape[1]

    @property
    def width(self):
        return self.kspace.shape[2]

    def volume(self):
        return KSpaceVolume.from_complex(self.kspace, self.slice_id)

    def sampling_mask(self):
        return SamplingMask(self.mask)


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"truncated dataset file while reading {what}")
    return buf


def write_dataset(records, path):
    """Write slice records to the binary container."""
    records = list(records)
    if not records:
        raise EmptySplitError("refusing to write an empty dataset")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(records)))
        for rec in records:
            sid = rec.slice_id.encode("utf-8")
            ncoil, h, w = rec.kspace.shape
            if rec.mask.shape != (w,):
                raise ShapeMismatchError(
                    f"slice {rec.slice_id}: mask length {rec.mask.shape} vs width {w}"
                )
            f.write(struct.pack("<H", len(sid)))
            f.write(sid)
            f.write(struct.pack("<HII", ncoil, h, w))
            f.write(rec.mask.astype(np.uint8).tobytes())
            pairs = np.empty((ncoil, h, w, 2), dtype="<f4")
            pairs[..., 0] = rec.kspace.real
            pairs[..., 1] = rec.kspace.imag
            f.write(pairs.tobytes())


def read_dataset(path):
    """Read slice records back; errors are typed for magic/version/truncation."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise BadMagicError(f"bad dataset magic {magic!r}, expected {MAGIC!r}")
        version, count = struct.unpack("<IQ", _read_exact(f, 12, "header"))
        if version != VERSION:
            raise VersionMismatchError(
                f"dataset version {version} unsupported, expected {VERSION}"
            )
        records = []
        for i in range(count):
            (sid_len,) = struct.unpack("<H", _read_exact(f, 2, f"slice {i} id length"))
            sid = _read_exact(f, sid_len, f"slice {i} id").decode("utf-8")
            ncoil, h, w = struct.unpack("<HII", _read_exact(f, 10, f"slice {i} dims"))
            mask = np.frombuffer(_read_exact(f, w, f"slice {i} mask"), dtype=np.uint8)
            nbytes = ncoil * h * w * 2 * 4
            pairs = np.frombuffer(
                _read_exact(f, nbytes, f"slice {i} k-space"), dtype="<f4"
            ).reshape(ncoil, h, w, 2)
            kspace = pairs[..., 0].astype(np.complex128) + 1j * pairs[..., 1].astype(
                np.complex128
            )
            records.append(SliceRecord(sid, kspace, mask.astype(bool)))
        return records


def write_split_manifest(split: DatasetSplit, path):
    with open(path, "w", encoding="utf-8") as f:
        for name in ("train", "val", "test"):
            for sid in split.for_name(name):
                f.write(f"{sid}\t{name}\n")


def read_split_manifest(path):
    split = DatasetSplit()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in ("train", "val", "test"):
                raise TruncatedFileError(f"malformed split manifest at line {lineno}")
            split.for_name(parts[1]).append(parts[0])
    return split


def slice_seeds(seed, index):
    """Stable per-slice seeds for phantom, coil, and mask randomness."""
    state = np.random.SeedSequence([int(seed), int(index)]).generate_state(3, dtype=np.uint64)
    return int(state[0]), int(state[1]), int(state[2])


def synthesize_dataset(
    height,
    width,
    ncoil,
    n_slices,
    acceleration,
    center_fraction,
    seed,
    n_ellipses=8,
    noise_sigma=0.0,
):
    """Generate phantom slices with per-slice masks, quantized to f32.

    Returns a list of SliceRecord ready for write_dataset.
    """
    if n_slices < 1:
        raise EmptySplitError(f"n_slices must be >= 1, got {n_slices}")
    records = []
    for i in range(n_slices):
        ph_seed, coil_seed, mask_seed = slice_seeds(seed, i)
        phantom = generate_phantom(height, width, n_ellipses, ph_seed)
        volume = simulate_coils(phantom, ncoil, coil_seed, noise_sigma=noise_sigma)
        mask = generate_mask(width, acceleration, center_fraction, mask_seed)
        kspace = volume.complex().astype(np.complex64).astype(np.complex128)
        records.append(SliceRecord(f"phantom-{i:04d}", kspace, mask.lines.copy()))
    return records
