"""Image quality metrics (PSNR, SSIM, NRMSE) and evaluation reports.

Metrics operate on real-valued 2D arrays. Evaluation of complex-valued
datasets scores magnitude images, and additionally phase images when the
dataset has a nonzero imaginary part.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, ShapeMismatchError, UndefinedMetricError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(ref, test, name):
    ref, test = np.asarray(ref), np.asarray(test)
    if np.iscomplexobj(ref) or np.iscomplexobj(test):
        raise InvalidInputError(f"{name} takes real arrays; pass magnitude or phase")
    if ref.ndim != 2:
        raise InvalidInputError(f"{name} takes 2D arrays, got {ref.ndim}D")
    if ref.shape != test.shape:
        raise ShapeMismatchError(f"{name} shapes differ: {ref.shape} vs {test.shape}")
    return ref.astype(np.float64), test.astype(np.float64)


def psnr(ref, test):
    """Peak signal-to-noise ratio in dB; peak is the dynamic range of ref.

    Identical inputs give the +infinity sentinel; a constant reference has no
    dynamic range and raises UndefinedMetricError.
    """
    ref, test = _check_pair(ref, test, "psnr")
    peak = float(ref.max() - ref.min())
    if peak == 0.0:
        raise UndefinedMetricError("psnr undefined for a zero-dynamic-range reference")
    mse = float(np.mean((test - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(peak / math.sqrt(mse))


def _gaussian_kernel():
    half = SSIM_WINDOW // 2
    ax = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * SSIM_SIGMA**2))
    return g / g.sum()


def ssim(ref, test):
    """Mean local SSIM over valid 11x11 Gaussian windows (sigma 1.5)."""
    ref, test = _check_pair(ref, test, "ssim")
    if min(ref.shape) < SSIM_WINDOW:
        raise InvalidInputError(
            f"ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {ref.shape}"
        )
    peak = float(ref.max() - ref.min())
    if peak == 0.0:
        raise UndefinedMetricError("ssim undefined for a zero-dynamic-range reference")
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    kernel = _gaussian_kernel()

    win = (SSIM_WINDOW, SSIM_WINDOW)
    wx = np.lib.stride_tricks.sliding_window_view(ref, win)
    wy = np.lib.stride_tricks.sliding_window_view(test, win)
    mu_x = np.einsum("ijkl,kl->ij", wx, kernel)
    mu_y = np.einsum("ijkl,kl->ij", wy, kernel)
    xx = np.einsum("ijkl,kl->ij", wx * wx, kernel)
    yy = np.einsum("ijkl,kl->ij", wy * wy, kernel)
    xy = np.einsum("ijkl,kl->ij", wx * wy, kernel)
    var_x = xx - mu_x**2
    var_y = yy - mu_y**2
    cov = xy - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def nrmse(ref, test):
    """Euclidean error normalized by the Euclidean norm of the reference."""
    ref, test = _check_pair(ref, test, "nrmse")
    ref_norm = float(np.linalg.norm(ref))
    if ref_norm == 0.0:
        raise UndefinedMetricError("nrmse undefined for a zero-norm reference")
    return float(np.linalg.norm(test - ref)) / ref_norm


@dataclass
class EvaluationReport:
    """Per-image metric rows plus aggregate statistics and run metadata."""

    rows: list
    aggregates: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates and self.rows:
            metrics = [k for k in self.rows[0] if k != "id"]
            self.aggregates = {
                m: {
                    "mean": float(np.mean([r[m] for r in self.rows])),
                    "std": float(np.std([r[m] for r in self.rows])),
                }
                for m in metrics
            }


def evaluate(state, test_set, mask_spec, fold=None):
    """Score every test image: undersample, reconstruct, measure.

    Parameters
    ----------
    state : TrainState, checkpoint path, or None
        None scores the zero-filling baseline instead of a model.
    test_set : Dataset
    mask_spec : MaskSpec
        One mask is generated and shared by all images.
    fold : int or None
        1-based generator checkpoint to score; None means the final fold.

    Returns
    -------
    EvaluationReport
    """
    from .data import denormalize
    from .kspace import undersample, zero_fill
    from .masks import generate_mask
    from .training import load_checkpoint, reconstruct

    if isinstance(state, (str, Path)):
        state = load_checkpoint(state)
    mask = generate_mask(mask_spec)
    if test_set.shape != mask.shape:
        raise ShapeMismatchError(
            f"dataset shape {test_set.shape} != mask shape {mask.shape}"
        )

    is_complex = any(np.abs(item.imag).max() > 1e-12 for item in test_set.items)
    rows = []
    for item, name, norm in zip(test_set.items, test_set.names, test_set.normalizations):
        truth = denormalize(item, norm)
        m = undersample(truth, mask)
        recon = zero_fill(m) if state is None else reconstruct(state, m, fold=fold)
        row = {
            "id": name,
            "psnr": psnr(np.abs(truth), np.abs(recon)),
            "ssim": ssim(np.abs(truth), np.abs(recon)),
            "nrmse": nrmse(np.abs(truth), np.abs(recon)),
        }
        if is_complex:
            row["phase_psnr"] = psnr(np.angle(truth), np.angle(recon))
            row["phase_ssim"] = ssim(np.angle(truth), np.angle(recon))
            row["phase_nrmse"] = nrmse(np.angle(truth), np.angle(recon))
        rows.append(row)

    metadata = {
        "pattern": mask_spec.pattern,
        "nominal_rate": mask_spec.nominal_rate,
        "mask_seed": mask_spec.seed,
        "checkpoint": "zero-fill baseline" if state is None else f"step {state.step}",
        "fold": fold if fold is not None else "final",
        "images": len(rows),
    }
    return EvaluationReport(rows=rows, metadata=metadata)


def save_report(report: EvaluationReport, csv_path, summary_path=None):
    """Write per-image rows as CSV and aggregates as structured text."""
    csv_path = Path(csv_path)
    fields = list(report.rows[0].keys()) if report.rows else ["id"]
    with open(csv_path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        writer.writerows(report.rows)
    if summary_path is not None:
        lines = ["[metadata]"]
        lines += [f"{k} = {v}" for k, v in report.metadata.items()]
        lines.append("")
        lines.append("[aggregates]")
        for metric, stats in report.aggregates.items():
            lines.append(f"{metric}_mean = {stats['mean']!r}")
            lines.append(f"{metric}_std = {stats['std']!r}")
        Path(summary_path).write_text("\n".join(lines) + "\n")


def load_report_rows(csv_path):
    """Read back the rows of a report CSV with numeric fields parsed."""
    with open(csv_path, newline="") as f:
        rows = []
        for raw in csv.DictReader(f):
            row = {"id": raw["id"]}
            row.update({k: float(v) for k, v in raw.items() if k != "id"})
            rows.append(row)
    return rows
