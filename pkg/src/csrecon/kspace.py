"""Measurement model: centered unitary Fourier operators, mask application,
undersampling and zero-filling reconstruction.

All spectra use the centered convention (DC coefficient at ``(h // 2, w // 2)``)
with orthonormal scaling, so the adjoint of the forward transform is its
inverse and norms agree between the image and frequency domains.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, MalformedFileError, ShapeMismatchError

# 12-byte magic + uint32 LE version = 16-byte header
_GRID_MAGIC = b"CSRECON-KSP\x00"
_GRID_VERSION = 1


@dataclass(frozen=True)
class SamplingMask:
    """Binary selection of acquired k-space bins.

    bits is a 2D boolean array; pattern is one of radial / cartesian / random /
    spiral / full; nominal_rate is the requested sampling fraction and seed the
    integer that made the mask reproducible.
    """

    bits: np.ndarray
    pattern: str
    nominal_rate: float
    seed: int

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise InvalidInputError("mask bits must be a 2D array")
        object.__setattr__(self, "bits", bits)

    @property
    def shape(self):
        return self.bits.shape


@dataclass(frozen=True)
class KSpaceMeasurement:
    """Undersampled k-space data stored densely (zeros at unsampled bins)."""

    values: np.ndarray
    mask: SamplingMask

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.shape != self.mask.shape:
            raise ShapeMismatchError(
                f"measurement shape {values.shape} != mask shape {self.mask.shape}"
            )
        if np.any(values[~self.mask.bits] != 0):
            raise InvalidInputError("measurement has nonzero values at unsampled bins")
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape


def dc_bin(height, width):
    """Index of the DC coefficient under the centered convention."""
    return height // 2, width // 2


def _check_image(img, name="image"):
    img = np.asarray(img)
    if img.ndim != 2:
        raise InvalidInputError(f"{name} must be 2D, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return img.astype(np.complex128, copy=False)


def forward_fourier(img):
    """Centered orthonormal 2D DFT of an image (complex in, complex out)."""
    img = _check_image(img)
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(img), norm="ortho"))


def inverse_fourier(grid):
    """Exact inverse of :func:`forward_fourier` (the unitary adjoint)."""
    grid = _check_image(grid, name="grid")
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(grid), norm="ortho"))


def undersample(img, mask: SamplingMask) -> KSpaceMeasurement:
    """Apply the forward model R F: transform and keep only sampled bins."""
    img = _check_image(img)
    if img.shape != mask.shape:
        raise ShapeMismatchError(f"image shape {img.shape} != mask shape {mask.shape}")
    grid = forward_fourier(img)
    values = np.where(mask.bits, grid, 0.0 + 0.0j)
    return KSpaceMeasurement(values=values, mask=mask)


def zero_fill(m: KSpaceMeasurement):
    """Zero-filling reconstruction F^H R^H m (the aliased baseline image)."""
    return inverse_fourier(m.values)


def data_consistency_project(img, m: KSpaceMeasurement):
    """Replace the image's k-space values at sampled bins by the measured ones.

    Hard projection onto the measurement-consistent set; idempotent.
    """
    img = _check_image(img)
    if img.shape != m.shape:
        raise ShapeMismatchError(f"image shape {img.shape} != measurement shape {m.shape}")
    grid = forward_fourier(img)
    merged = np.where(m.mask.bits, m.values, grid)
    return inverse_fourier(merged)


def save_kspace_grid(grid, path):
    """Write a dense complex grid as the binary k-space format.

    Layout: 16-byte magic+version header, then height and width as uint32
    little-endian, then row-major interleaved real/imag float32 little-endian.
    """
    grid = _check_image(grid, name="grid")
    h, w = grid.shape
    interleaved = np.empty((h, w, 2), dtype="<f4")
    interleaved[..., 0] = grid.real
    interleaved[..., 1] = grid.imag
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_GRID_MAGIC)
        f.write(struct.pack("<I", _GRID_VERSION))
        f.write(struct.pack("<II", h, w))
        f.write(interleaved.tobytes())


def load_kspace_grid(path):
    """Read a dense complex grid written by :func:`save_kspace_grid`."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 24:
        raise MalformedFileError(f"{path}: truncated k-space file")
    if raw[:12] != _GRID_MAGIC:
        raise MalformedFileError(f"{path}: bad magic, not a k-space file")
    (version,) = struct.unpack("<I", raw[12:16])
    if version != _GRID_VERSION:
        raise MalformedFileError(f"{path}: unsupported k-space format version {version}")
    h, w = struct.unpack("<II", raw[16:24])
    expected = 24 + h * w * 2 * 4
    if len(raw) != expected:
        raise MalformedFileError(
            f"{path}: expected {expected} bytes for {h}x{w} grid, got {len(raw)}"
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=24).reshape(h, w, 2)
    return (flat[..., 0].astype(np.float64) + 1j * flat[..., 1].astype(np.float64))


def save_measurement(m: KSpaceMeasurement, path):
    """Write a measurement: the grid file plus the mask stored alongside.

    ``path`` names the grid file; the mask goes to ``<stem>.pgm`` and
    ``<stem>.json`` next to it.
    """
    from .masks import save_mask  # deferred: masks imports SamplingMask from here

    path = Path(path)
    save_kspace_grid(m.values, path)
    save_mask(m.mask, path.with_suffix(".pgm"))


def load_measurement(path) -> KSpaceMeasurement:
    """Read a measurement written by :func:`save_measurement`."""
    from .masks import load_mask

    path = Path(path)
    values = load_kspace_grid(path)
    mask = load_mask(path.with_suffix(".pgm"))
    if values.shape != mask.shape:
        raise MalformedFileError(f"{path}: grid shape {values.shape} != mask {mask.shape}")
    if np.any(values[~mask.bits] != 0):
        raise MalformedFileError(f"{path}: nonzero values at unsampled bins")
    return KSpaceMeasurement(values=values, mask=mask)
