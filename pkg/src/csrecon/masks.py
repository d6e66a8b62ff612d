"""Undersampling mask generation and persistence.

Four pattern families: radial (spokes through the center), cartesian (full
phase-encode rows, denser near DC), random (uniform bins), spiral (single
Archimedean arm). Every generated mask samples the DC bin and lands within
0.02 absolute of the requested rate; generation is deterministic per seed.

Masks persist as binary P5 graymaps (255 = sampled, 0 = not) with a JSON
sidecar carrying pattern, nominal rate and seed.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, MalformedFileError
from .kspace import SamplingMask, dc_bin

PATTERNS = ("radial", "cartesian", "random", "spiral")
RATE_TOLERANCE = 0.02


@dataclass(frozen=True)
class MaskSpec:
    """Parameters that fully determine one undersampling mask."""

    pattern: str
    nominal_rate: float
    height: int
    width: int
    seed: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise InvalidInputError(
                f"unknown pattern {self.pattern!r}, expected one of {PATTERNS}"
            )
        if not 0.0 < self.nominal_rate <= 1.0:
            raise InvalidInputError(f"rate must be in (0, 1], got {self.nominal_rate}")
        if self.height < 8 or self.width < 8:
            raise InvalidInputError(
                f"mask shape must be at least 8x8, got {self.height}x{self.width}"
            )


def mask_rate(mask: SamplingMask) -> float:
    """Fraction of sampled bins, in [0, 1]."""
    return float(np.count_nonzero(mask.bits)) / mask.bits.size


def full_mask(height, width) -> SamplingMask:
    """All-bins-sampled mask (no undersampling)."""
    return SamplingMask(
        bits=np.ones((height, width), dtype=bool),
        pattern="full",
        nominal_rate=1.0,
        seed=0,
    )


def generate_mask(spec: MaskSpec) -> SamplingMask:
    """Generate the mask described by ``spec``.

    Parameters
    ----------
    spec : MaskSpec
        Pattern, nominal rate, shape and seed.

    Returns
    -------
    SamplingMask
        Deterministic for a fixed spec; achieved rate within 0.02 of
        nominal; DC bin always sampled.
    """
    h, w = spec.height, spec.width
    if spec.nominal_rate == 1.0:
        bits = np.ones((h, w), dtype=bool)
    else:
        rng = np.random.default_rng(spec.seed)
        target = spec.nominal_rate * h * w
        if spec.pattern == "radial":
            bits = _radial_bits(h, w, target, rng)
        elif spec.pattern == "cartesian":
            bits = _cartesian_bits(h, w, spec.nominal_rate, rng)
        elif spec.pattern == "random":
            bits = _random_bits(h, w, target, rng)
        else:
            bits = _spiral_bits(h, w, target, rng)
    bits[dc_bin(h, w)] = True
    achieved = np.count_nonzero(bits) / bits.size
    if abs(achieved - spec.nominal_rate) > RATE_TOLERANCE:
        raise InvalidInputError(
            f"{spec.pattern} mask reached rate {achieved:.4f}, "
            f"outside {RATE_TOLERANCE} of nominal {spec.nominal_rate}"
        )
    return SamplingMask(
        bits=bits, pattern=spec.pattern, nominal_rate=spec.nominal_rate, seed=spec.seed
    )


def _half_spoke(h, w, theta):
    """In-bounds bins of a ray from the center bin at angle theta.

    One rounded bin per unit step along the dominant axis, which keeps the
    rasterized line one bin thick.
    """
    cy, cx = dc_bin(h, w)
    dy, dx = np.sin(theta), np.cos(theta)
    if abs(dx) >= abs(dy):
        steps = np.arange(h + w)
        xs = cx + np.sign(dx).astype(int) * steps
        ys = np.rint(cy + steps * np.sign(dx) * dy / dx).astype(int)
    else:
        steps = np.arange(h + w)
        ys = cy + np.sign(dy).astype(int) * steps
        xs = np.rint(cx + steps * np.sign(dy) * dx / dy).astype(int)
    keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    return ys[keep], xs[keep]


def _radial_count(h, w, n_spokes, offset):
    cy, cx = dc_bin(h, w)
    bits = np.zeros((h, w), dtype=bool)
    for i in range(n_spokes):
        theta = offset + np.pi * i / n_spokes
        ys, xs = _half_spoke(h, w, theta)
        bits[ys, xs] = True
        # mirror through the center so each spoke is a full diameter
        ym, xm = 2 * cy - ys, 2 * cx - xs
        keep = (ym >= 0) & (ym < h) & (xm >= 0) & (xm < w)
        bits[ym[keep], xm[keep]] = True
    return bits


def _radial_bits(h, w, target, rng):
    """Equally-angled spokes; spoke count found by binary search on rate."""
    offset = rng.uniform(0.0, np.pi)
    n_max = 4 * (h + w)
    lo, hi = 1, n_max
    while lo < hi:
        mid = (lo + hi) // 2
        if np.count_nonzero(_radial_count(h, w, mid, offset)) < target:
            lo = mid + 1
        else:
            hi = mid
    best_bits, best_err = None, np.inf
    for n in range(max(1, lo - 2), min(n_max, lo + 2) + 1):
        bits = _radial_count(h, w, n, offset)
        err = abs(np.count_nonzero(bits) - target)
        if err < best_err:
            best_bits, best_err = bits, err
    return best_bits


def _cartesian_bits(h, w, rate, rng):
    """Whole rows, Gaussian-weighted toward the center row, center included."""
    cy = h // 2
    n_rows = max(1, round(rate * h))
    rows = [cy]
    if n_rows > 1:
        pool = np.array([r for r in range(h) if r != cy])
        weights = np.exp(-((pool - cy) ** 2) / (2.0 * (h / 6.0) ** 2))
        weights /= weights.sum()
        rows.extend(rng.choice(pool, size=n_rows - 1, replace=False, p=weights))
    bits = np.zeros((h, w), dtype=bool)
    bits[np.array(rows)] = True
    return bits


def _random_bits(h, w, target, rng):
    """Uniform bins at the exact rounded count, DC forced."""
    n = max(1, round(target))
    flat_dc = dc_bin(h, w)[0] * w + dc_bin(h, w)[1]
    pool = np.delete(np.arange(h * w), flat_dc)
    chosen = rng.choice(pool, size=n - 1, replace=False) if n > 1 else np.array([], int)
    bits = np.zeros(h * w, dtype=bool)
    bits[flat_dc] = True
    bits[chosen] = True
    return bits.reshape(h, w)


def _spiral_count(h, w, a, phase):
    cy, cx = dc_bin(h, w)
    r_max = np.hypot(h / 2.0, w / 2.0)
    # arc-length parametrization s ~ a*theta^2/2 keeps sample spacing uniform
    total_len = r_max**2 / (2.0 * a) + r_max
    s = np.arange(0.0, total_len, 0.4)
    theta = np.sqrt(2.0 * s / a)
    r = a * theta
    ys = np.rint(cy + r * np.sin(theta + phase)).astype(int)
    xs = np.rint(cx + r * np.cos(theta + phase)).astype(int)
    keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
    bits = np.zeros((h, w), dtype=bool)
    bits[ys[keep], xs[keep]] = True
    return bits


def _spiral_bits(h, w, target, rng):
    """Single Archimedean arm r = a*theta; a found by binary search on rate."""
    phase = rng.uniform(0.0, 2.0 * np.pi)
    lo, hi = 0.05, np.hypot(h / 2.0, w / 2.0)
    best_bits, best_err = None, np.inf
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        bits = _spiral_count(h, w, mid, phase)
        err = abs(np.count_nonzero(bits) - target)
        if err < best_err:
            best_bits, best_err = bits, err
        # coverage decreases as the arm spacing a grows
        if np.count_nonzero(bits) > target:
            lo = mid
        else:
            hi = mid
    return best_bits


def save_mask(mask: SamplingMask, path):
    """Write ``path`` as a binary P5 graymap and ``path`` with a .json suffix
    as the metadata sidecar."""
    path = Path(path)
    h, w = mask.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    body = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()
    path.write_bytes(header + body)
    sidecar = {
        "pattern": mask.pattern,
        "nominal_rate": mask.nominal_rate,
        "seed": mask.seed,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")


def _parse_p5(raw, path):
    """Strict P5 parse: magic, three header tokens, one separator byte, body."""
    if raw[:2] != b"P5":
        raise MalformedFileError(f"{path}: not a P5 graymap")
    pos, tokens = 2, []
    while len(tokens) < 3:
        if pos >= len(raw):
            raise MalformedFileError(f"{path}: truncated P5 header")
        c = raw[pos : pos + 1]
        if c == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            start = pos
            while pos < len(raw) and not raw[pos : pos + 1].isspace():
                pos += 1
            tokens.append(raw[start:pos])
    if pos >= len(raw) or not raw[pos : pos + 1].isspace():
        raise MalformedFileError(f"{path}: missing separator after P5 header")
    pos += 1
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise MalformedFileError(f"{path}: non-numeric P5 header") from None
    if maxval != 255:
        raise MalformedFileError(f"{path}: P5 maxval must be 255, got {maxval}")
    body = raw[pos:]
    if len(body) != h * w:
        raise MalformedFileError(
            f"{path}: expected {h * w} pixel bytes, got {len(body)}"
        )
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(h, w)
    bad = np.isin(pixels, (0, 255), invert=True)
    if bad.any():
        raise MalformedFileError(
            f"{path}: mask pixels must be 0 or 255, found {int(pixels[bad][0])}"
        )
    return pixels == 255


def load_mask(path) -> SamplingMask:
    """Read a mask written by :func:`save_mask` (graymap plus sidecar)."""
    path = Path(path)
    bits = _parse_p5(path.read_bytes(), path)
    sidecar_path = path.with_suffix(".json")
    if not sidecar_path.exists():
        raise MalformedFileError(f"{sidecar_path}: missing mask metadata sidecar")
    try:
        meta = json.loads(sidecar_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{sidecar_path}: invalid JSON ({exc})") from None
    for key in ("pattern", "nominal_rate", "seed"):
        if key not in meta:
            raise MalformedFileError(f"{sidecar_path}: missing key {key!r}")
    if meta["pattern"] not in PATTERNS + ("full",):
        raise MalformedFileError(f"{sidecar_path}: unknown pattern {meta['pattern']!r}")
    return SamplingMask(
        bits=bits,
        pattern=meta["pattern"],
        nominal_rate=float(meta["nominal_rate"]),
        seed=int(meta["seed"]),
    )
