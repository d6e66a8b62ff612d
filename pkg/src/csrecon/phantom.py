"""Synthetic grayscale phantoms for demos and end-to-end tests.

Each phantom is a seeded arrangement of smooth ellipses on a dark background,
loosely imitating anatomical magnitude images: piecewise-smooth regions with
sharp boundaries, values in [0, 1]. make_phantom draws one independent random
phantom; make_phantom_volume draws a stack of slices through one subject whose
structures drift smoothly from slice to slice, the way neighboring slices of a
real scan resemble each other.
"""

import numpy as np


def _render(xx, yy, blobs):
    img = 0.25 * ((xx / 0.92) ** 2 + (yy / 0.95) ** 2 <= 1.0)
    for cy, cx, ay, ax, angle, level in blobs:
        xr = (xx - cx) * np.cos(angle) + (yy - cy) * np.sin(angle)
        yr = -(xx - cx) * np.sin(angle) + (yy - cy) * np.cos(angle)
        img = img + level * ((xr / ax) ** 2 + (yr / ay) ** 2 <= 1.0)
    return np.clip(img, 0.0, 1.0)


def _grid(size):
    yy, xx = np.mgrid[0:size, 0:size]
    yy = (yy - size / 2.0) / (size / 2.0)
    xx = (xx - size / 2.0) / (size / 2.0)
    return xx, yy


def make_phantom(size, seed):
    """One size x size float64 phantom in [0, 1], deterministic per seed."""
    rng = np.random.default_rng(seed)
    xx, yy = _grid(size)
    n_blobs = rng.integers(4, 8)
    blobs = [
        (
            *rng.uniform(-0.55, 0.55, size=2),
            *rng.uniform(0.08, 0.45, size=2),
            rng.uniform(0.0, np.pi),
            rng.uniform(-0.35, 0.75),
        )
        for _ in range(n_blobs)
    ]
    return _render(xx, yy, blobs)


def make_phantom_volume(count, size, seed):
    """A list of ``count`` slices through one synthetic subject.

    Every ellipse's position, size, orientation and intensity drift linearly
    across the stack, so adjacent slices are strongly correlated while the
    ends of the stack differ substantially — the anatomy of a multi-slice
    acquisition rather than ``count`` unrelated subjects.
    """
    rng = np.random.default_rng(seed)
    n_blobs = 8
    base = np.column_stack(
        [
            rng.uniform(-0.5, 0.5, n_blobs),
            rng.uniform(-0.5, 0.5, n_blobs),
            rng.uniform(0.08, 0.4, n_blobs),
            rng.uniform(0.08, 0.4, n_blobs),
            rng.uniform(0.0, np.pi, n_blobs),
            rng.uniform(-0.35, 0.6, n_blobs),
        ]
    )
    drift = rng.uniform(-0.25, 0.25, base.shape) * [0.2, 0.2, 0.2, 0.2, 0.2, 0.3]
    xx, yy = _grid(size)
    slices = []
    for t in np.linspace(-1.0, 1.0, count):
        params = base + drift * t
        params[:, 2:4] = np.abs(params[:, 2:4]) + 0.02  # axes stay positive
        slices.append(_render(xx, yy, [tuple(row) for row in params]))
    return slices


def write_phantom_dir(out_dir, count, size, seed):
    """Write ``count`` phantoms as 8-bit grayscale PNGs named phantom_###.png."""
    from PIL import Image

    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        img = make_phantom(size, seed + i)
        pixels = np.round(img * 255.0).astype(np.uint8)
        path = out_dir / f"phantom_{i:03d}.png"
        Image.fromarray(pixels, mode="L").save(path)
        paths.append(path)
    return paths
