"""Binary checkpoint container for named float64 arrays.

Layout (little-endian): magic "DDRK", format version u32, entry count u64;
per entry: name length u16, name bytes (UTF-8), shape rank u8, dims u64
each, then the f64 data row-major. Round-trips are bit-exact.
"""

import struct

import numpy as np

from .errors import BadMagicError, TruncatedFileError, VersionMismatchError

MAGIC = b"DDRK"
VERSION = 1


def save_arrays(arrays, path):
    """Write a name -> float64 array mapping."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype="<f8")  # tobytes serializes in C order
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<Q", dim))
            f.write(arr.tobytes())


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"truncated checkpoint while reading {what}")
    return buf


def load_arrays(path):
    """Read back a name -> float64 array mapping."""
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise BadMagicError(f"bad checkpoint magic {magic!r}, expected {MAGIC!r}")
        version, count = struct.unpack("<IQ", _read_exact(f, 12, "header"))
        if version != VERSION:
            raise VersionMismatchError(
                f"checkpoint version {version} unsupported, expected {VERSION}"
            )
        arrays = {}
        for i in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, f"entry {i} name length"))
            name = _read_exact(f, name_len, f"entry {i} name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(f, 1, f"entry {i} rank"))
            dims = [
                struct.unpack("<Q", _read_exact(f, 8, f"entry {i} dim"))[0]
                for _ in range(rank)
            ]
            n_elem = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(
                _read_exact(f, n_elem * 8, f"entry {i} data"), dtype="<f8"
            )
            arrays[name] = data.reshape(dims).astype(np.float64)
        return arrays
