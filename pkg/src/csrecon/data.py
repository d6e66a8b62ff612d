"""Dataset ingestion, normalization and deterministic batch sampling.

Images are held as complex arrays (magnitude inputs get a zero imaginary
channel) and normalized per image: complex data is first divided by its peak
magnitude, then each real channel is affinely mapped to [-1, 1]. The affine
parameters are recorded so evaluation can report metrics in original units.

Batch indices for measurements and references come from two independent
seeded streams; the sampler state is four small integers, so training can
resume mid-epoch without replaying history.
"""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, MalformedFileError, ShapeMismatchError
from .kspace import inverse_fourier, load_kspace_grid

IMAGE_SUFFIXES = (".png", ".pgm")


@dataclass(frozen=True)
class Normalization:
    """Invertible record of the per-image normalization."""

    magnitude_peak: float
    real_offset: float
    real_scale: float
    imag_offset: float
    imag_scale: float


@dataclass
class Dataset:
    """Equal-shape complex images plus their normalization records."""

    items: list
    names: list
    normalizations: list
    split: str = "train"

    def __post_init__(self):
        shapes = {item.shape for item in self.items}
        if len(shapes) > 1:
            raise ShapeMismatchError(f"dataset mixes shapes {sorted(shapes)}")

    def __len__(self):
        return len(self.items)

    @property
    def shape(self):
        return self.items[0].shape if self.items else None


def _affine_params(channel):
    lo, hi = float(channel.min()), float(channel.max())
    if hi - lo < 1e-12:
        # degenerate channel (e.g. all-zero imaginary part): shift to 0, keep scale
        return lo, 1.0
    return (hi + lo) / 2.0, (hi - lo) / 2.0


def normalize(img):
    """Map a complex image into [-1, 1] per channel.

    Returns the normalized image and the Normalization needed to invert it.
    """
    img = np.asarray(img, dtype=np.complex128)
    peak = float(np.abs(img).max())
    scaled = img / peak if peak > 0 else img
    r_off, r_scale = _affine_params(scaled.real)
    i_off, i_scale = _affine_params(scaled.imag)
    out = ((scaled.real - r_off) / r_scale) + 1j * ((scaled.imag - i_off) / i_scale)
    return out, Normalization(
        magnitude_peak=peak if peak > 0 else 1.0,
        real_offset=r_off,
        real_scale=r_scale,
        imag_offset=i_off,
        imag_scale=i_scale,
    )


def denormalize(img, norm: Normalization):
    """Exact inverse of :func:`normalize`."""
    img = np.asarray(img, dtype=np.complex128)
    real = img.real * norm.real_scale + norm.real_offset
    imag = img.imag * norm.imag_scale + norm.imag_offset
    return (real + 1j * imag) * norm.magnitude_peak


def complex_to_channels(img):
    """(H, W) complex -> (2, H, W) float stack of real and imaginary parts."""
    img = np.asarray(img, dtype=np.complex128)
    return np.stack([img.real, img.imag])


def channels_to_complex(arr):
    """(2, H, W) float stack -> (H, W) complex."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[0] != 2:
        raise ShapeMismatchError(f"expected (2, H, W) stack, got {arr.shape}")
    return arr[0] + 1j * arr[1]


def _read_grayscale(path):
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "I", "I;16"):
                im = im.convert("L")
            return np.asarray(im, dtype=np.float64)
    except (UnidentifiedImageError, OSError) as exc:
        raise MalformedFileError(f"{path}: unreadable image ({exc})") from None


def load_image_dir(path, split_fraction, seed):
    """Load a directory of grayscale images into a reproducible train/test split.

    Parameters
    ----------
    path : str or Path
        Directory of equal-shape PNG/PGM files.
    split_fraction : float
        Fraction of images assigned to the training split.
    seed : int
        Shuffle seed; the same directory and seed always split identically.

    Returns
    -------
    (Dataset, Dataset)
        Train and test datasets with disjoint items.
    """
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if len(files) < 2:
        raise InvalidInputError(f"{path}: need at least 2 images, found {len(files)}")
    if not 0.0 < split_fraction < 1.0:
        raise InvalidInputError(f"split fraction must be in (0, 1), got {split_fraction}")

    images = [_read_grayscale(f) for f in files]
    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"{path}: images mix shapes {sorted(shapes)}")

    order = np.random.default_rng(seed).permutation(len(files))
    n_train = max(1, min(len(files) - 1, round(split_fraction * len(files))))

    def build(idx, split):
        items, names, norms = [], [], []
        for i in idx:
            item, norm = normalize(images[i].astype(np.complex128))
            items.append(item)
            names.append(files[i].name)
            norms.append(norm)
        return Dataset(items=items, names=names, normalizations=norms, split=split)

    return build(order[:n_train], "train"), build(order[n_train:], "test")


def load_image_dataset(path, split="test"):
    """Load every image of a directory as one dataset (no splitting)."""
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not files:
        raise InvalidInputError(f"{path}: no images found")
    images = [_read_grayscale(f) for f in files]
    shapes = {img.shape for img in images}
    if len(shapes) > 1:
        raise ShapeMismatchError(f"{path}: images mix shapes {sorted(shapes)}")
    items, names, norms = [], [], []
    for f, img in zip(files, images):
        item, norm = normalize(img.astype(np.complex128))
        items.append(item)
        names.append(f.name)
        norms.append(norm)
    return Dataset(items=items, names=names, normalizations=norms, split=split)


def load_kspace_dataset(path, split="train"):
    """Load a directory of fully sampled k-space grids as complex images.

    Items are the inverse Fourier transforms of the stored grids, in
    lexicographic filename order, normalized like any other dataset.
    """
    path = Path(path)
    files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".ksp")
    if not files:
        raise InvalidInputError(f"{path}: no .ksp files found")
    items, names, norms = [], [], []
    shape = None
    for f in files:
        grid = load_kspace_grid(f)
        if shape is None:
            shape = grid.shape
        elif grid.shape != shape:
            raise ShapeMismatchError(f"{f}: shape {grid.shape} != dataset shape {shape}")
        item, norm = normalize(inverse_fourier(grid))
        items.append(item)
        names.append(f.name)
        norms.append(norm)
    return Dataset(items=items, names=names, normalizations=norms, split=split)


def write_split_manifest(train: Dataset, test: Dataset, path):
    """Emit the filenames of each split as structured text."""
    lines = ["[train]"]
    lines += train.names
    lines += ["", "[test]"]
    lines += test.names
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class BatchSampler:
    """Two independent deterministic index streams over one dataset.

    Stream 0 picks measurement images m[i], stream 1 picks reference images
    s[j]; each stream reshuffles per epoch from its own seeded generator.
    State is (epoch, position) per stream.
    """

    batch_size: int
    seed: int
    state: dict = field(
        default_factory=lambda: {"m": [0, 0], "s": [0, 0]}
    )

    def _permutation(self, stream, epoch, n):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(stream, epoch))
        return np.random.default_rng(ss).permutation(n)

    def _draw(self, stream, key, n):
        epoch, pos = self.state[key]
        out = []
        while len(out) < self.batch_size:
            perm = self._permutation(stream, epoch, n)
            take = min(self.batch_size - len(out), n - pos)
            out.extend(int(i) for i in perm[pos : pos + take])
            pos += take
            if pos >= n:
                epoch, pos = epoch + 1, 0
        self.state[key] = [epoch, pos]
        return out


def next_batch(sampler: BatchSampler, dataset: Dataset):
    """Draw one batch of (m-indices, s-indices) from the two streams."""
    if len(dataset) == 0:
        raise InvalidInputError("cannot sample from an empty dataset")
    m_idx = sampler._draw(0, "m", len(dataset))
    s_idx = sampler._draw(1, "s", len(dataset))
    return m_idx, s_idx
