"""Training objectives: Wasserstein adversarial losses with gradient penalty
and the cyclic data-consistency pair (frequency loss and image loss).

The total objective is adv_g + sum over folds of (alpha * freq + gamma * imag),
with the adversarial term applied to the final checkpoint only. Frequency and
image losses use a plain pixel-wise distance (MSE by default, MAE optional)
treating complex data as two real channels.
"""

from dataclasses import dataclass

import numpy as np
import torch

from .exceptions import InvalidInputError, ShapeMismatchError
from .kspace import KSpaceMeasurement, undersample

DISTANCES = ("mse", "mae")
HISTORY_FIELDS = ("epoch", "step", "adv_g", "adv_d", "freq", "imag", "total", "lr")


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total objective."""

    alpha: float = 1.0
    gamma: float = 10.0
    gp_lambda: float = 10.0
    distance: str = "mse"

    def __post_init__(self):
        if min(self.alpha, self.gamma, self.gp_lambda) < 0:
            raise InvalidInputError("loss weights must be >= 0")
        if self.distance not in DISTANCES:
            raise InvalidInputError(
                f"distance must be one of {DISTANCES}, got {self.distance!r}"
            )


@dataclass(frozen=True)
class LossBreakdown:
    """Per-step loss record; freq and imag are summed over folds."""

    adv_g: float
    adv_d: float
    freq: float
    imag: float
    total: float


def _as_real_channels(x):
    if isinstance(x, np.ndarray):
        x = torch.as_tensor(x)
    if x.is_complex():
        x = torch.view_as_real(x.resolve_conj().contiguous())
    return x


def distance(a, b, metric="mse"):
    """Mean element-wise distance, complex data counted as two real channels.

    Returns a differentiable scalar tensor when given tensors; accepts numpy
    arrays as well.
    """
    if metric not in DISTANCES:
        raise InvalidInputError(f"distance must be one of {DISTANCES}, got {metric!r}")
    a, b = _as_real_channels(a), _as_real_channels(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"distance shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    diff = a - b
    return diff.square().mean() if metric == "mse" else diff.abs().mean()


def fourier_torch(x):
    """Centered orthonormal 2D FFT of a (B, 2, H, W) real batch -> (B, H, W) complex."""
    if x.dim() != 4 or x.shape[1] != 2:
        raise ShapeMismatchError(f"expected (B, 2, H, W), got {tuple(x.shape)}")
    z = torch.complex(x[:, 0], x[:, 1])
    z = torch.fft.ifftshift(z, dim=(-2, -1))
    z = torch.fft.fft2(z, norm="ortho")
    return torch.fft.fftshift(z, dim=(-2, -1))


def freq_loss_t(s_bar, measured_values, mask_bits, metric="mse"):
    """Frequency-domain consistency on a batch, differentiable w.r.t. s_bar.

    s_bar: (B, 2, H, W) real tensor; measured_values: (B, H, W) complex with
    zeros off support; mask_bits: (H, W) bool tensor.
    """
    grid = fourier_torch(s_bar) * mask_bits
    return distance(grid, measured_values, metric)


def freq_loss(m: KSpaceMeasurement, s_bar, metric="mse"):
    """Frequency-domain consistency for one complex image against one measurement."""
    s_bar = np.asarray(s_bar)
    if s_bar.shape != m.shape:
        raise ShapeMismatchError(f"image shape {s_bar.shape} != measurement {m.shape}")
    resampled = undersample(s_bar, m.mask)
    return float(distance(resampled.values, m.values, metric))


def imag_loss(s, s_bar, metric="mse"):
    """Image-domain reconstruction loss: plain distance between s and s_bar."""
    return distance(s, s_bar, metric)


def adversarial_losses(real_scores, fake_scores, gp_term=0.0, gp_lambda=10.0):
    """Wasserstein losses: (adv_g, adv_d) from per-item critic scores."""
    real = torch.as_tensor(real_scores, dtype=torch.float64) \
        if not isinstance(real_scores, torch.Tensor) else real_scores
    fake = torch.as_tensor(fake_scores, dtype=torch.float64) \
        if not isinstance(fake_scores, torch.Tensor) else fake_scores
    if not (torch.isfinite(real).all() and torch.isfinite(fake).all()):
        raise InvalidInputError("critic scores must be finite")
    adv_d = fake.mean() - real.mean() + gp_lambda * gp_term
    adv_g = -fake.mean()
    return adv_g, adv_d


def gradient_penalty(critic, real, fake, rng: torch.Generator):
    """Two-sided gradient penalty on random interpolates between batches."""
    if real.shape != fake.shape:
        raise ShapeMismatchError(
            f"real/fake shapes differ: {tuple(real.shape)} vs {tuple(fake.shape)}"
        )
    eps = torch.rand(
        (real.shape[0], 1, 1, 1), generator=rng, dtype=real.dtype, device=real.device
    )
    mixed = (eps * real + (1.0 - eps) * fake).requires_grad_(True)
    scores = critic(mixed)
    grads = torch.autograd.grad(scores.sum(), mixed, create_graph=True)[0]
    norms = grads.flatten(1).norm(dim=1)
    return (norms - 1.0).square().mean()


def total_loss(fold_losses, adv_g, weights: LossWeights):
    """adv_g + sum over checkpoints of alpha * freq + gamma * imag."""
    if not fold_losses:
        raise InvalidInputError("need at least one fold")
    total = adv_g
    for freq, imag in fold_losses:
        total = total + weights.alpha * freq + weights.gamma * imag
    return total
