"""Generator and critic architectures.

The generator is a chain of identical residual autoencoder folds. Each fold
downsamples with stride-2 convolutions, runs residual bottlenecks at every
scale, upsamples with transposed convolutions, and merges encoder features
into the decoder by addition. A fold emits a tanh-bounded residual that is
added to its input, so fold k refines the reconstruction of fold k-1 and an
all-zero fold is exactly the identity.

The critic reuses the fold's encoding path and pools the last feature map to
one unbounded scalar per item.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn

from .exceptions import InvalidInputError, ShapeMismatchError


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters shared by the generator and the critic."""

    levels: int = 4
    base_filters: int = 32
    residual_blocks_per_level: int = 1
    folds: int = 2
    input_channels: int = 2
    negative_slope: float = 0.2

    def __post_init__(self):
        if self.levels < 1:
            raise InvalidInputError(f"levels must be >= 1, got {self.levels}")
        if self.base_filters < 2 or self.base_filters % 2:
            raise InvalidInputError(
                f"base_filters must be even and >= 2, got {self.base_filters}"
            )
        if self.residual_blocks_per_level < 0:
            raise InvalidInputError("residual_blocks_per_level must be >= 0")
        if self.folds < 1:
            raise InvalidInputError(f"folds must be >= 1, got {self.folds}")

    def level_filters(self, level):
        """Channel count after encoder level ``level`` (1-based)."""
        return self.base_filters * 2 ** (level - 1)


class EncoderBlock(nn.Module):
    """3x3 stride-2 convolution halving the spatial dims, leaky activation."""

    def __init__(self, in_channels, filters, negative_slope=0.2):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, filters, 3, stride=2, padding=1)
        self.act = nn.LeakyReLU(negative_slope)

    def forward(self, x):
        if x.shape[-1] % 2 or x.shape[-2] % 2:
            raise InvalidInputError(
                f"encoder needs even spatial dims, got {tuple(x.shape[-2:])}"
            )
        return self.act(self.conv(x))


class DecoderBlock(nn.Module):
    """3x3 stride-2 transposed convolution doubling the spatial dims."""

    def __init__(self, in_channels, filters, negative_slope=0.2, activation=True):
        super().__init__()
        self.conv = nn.ConvTranspose2d(
            in_channels, filters, 3, stride=2, padding=1, output_padding=1
        )
        self.act = nn.LeakyReLU(negative_slope) if activation else nn.Identity()

    def forward(self, x):
        return self.act(self.conv(x))


class ResidualBlock(nn.Module):
    """Bottleneck of widths (C/2, C/2, C) with an identity shortcut.

    No activation follows the addition, so zero weights give an exact
    identity map.
    """

    def __init__(self, channels, negative_slope=0.2):
        super().__init__()
        if channels % 2:
            raise InvalidInputError(f"residual block needs even channels, got {channels}")
        half = channels // 2
        self.conv_i = nn.Conv2d(channels, half, 3, padding=1)
        self.conv_m = nn.Conv2d(half, half, 3, padding=1)
        self.conv_o = nn.Conv2d(half, channels, 3, padding=1)
        self.act = nn.LeakyReLU(negative_slope)

    def forward(self, x):
        z = self.act(self.conv_i(x))
        z = self.act(self.conv_m(z))
        return x + self.conv_o(z)


def _residual_stack(channels, config):
    return nn.ModuleList(
        ResidualBlock(channels, config.negative_slope)
        for _ in range(config.residual_blocks_per_level)
    )


class _EncoderPath(nn.Module):
    """Shared encoding trunk: per level, one stride-2 conv then residuals."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        self.blocks = nn.ModuleList()
        self.residuals = nn.ModuleList()
        in_ch = config.input_channels
        for level in range(1, config.levels + 1):
            out_ch = config.level_filters(level)
            self.blocks.append(EncoderBlock(in_ch, out_ch, config.negative_slope))
            self.residuals.append(_residual_stack(out_ch, config))
            in_ch = out_ch

    def forward(self, x):
        feats = []
        for block, stack in zip(self.blocks, self.residuals):
            x = block(x)
            for res in stack:
                x = res(x)
            feats.append(x)
        return feats


class Fold(nn.Module):
    """One residual autoencoder; outputs a tanh-bounded residual image."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        self.encoder = _EncoderPath(config)
        self.decoder_blocks = nn.ModuleList()
        self.decoder_residuals = nn.ModuleList()
        for level in range(config.levels, 1, -1):
            in_ch = config.level_filters(level)
            out_ch = config.level_filters(level - 1)
            self.decoder_blocks.append(
                DecoderBlock(in_ch, out_ch, config.negative_slope)
            )
            self.decoder_residuals.append(_residual_stack(out_ch, config))
        self.final = DecoderBlock(
            config.level_filters(1), config.input_channels, activation=False
        )

    def forward(self, x):
        feats = self.encoder(x)
        z = feats[-1]
        for i, (block, stack) in enumerate(
            zip(self.decoder_blocks, self.decoder_residuals)
        ):
            z = block(z)
            z = z + feats[-(i + 2)]  # addition skip from the same resolution
            for res in stack:
                z = res(z)
        return torch.tanh(self.final(z))


class Generator(nn.Module):
    """Chain of folds; fold k refines the output of fold k-1."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        self.folds = nn.ModuleList(Fold(config) for _ in range(config.folds))

    def _check_input(self, x):
        if x.dim() != 4 or x.shape[1] != self.config.input_channels:
            raise ShapeMismatchError(
                f"expected (B, {self.config.input_channels}, H, W), got {tuple(x.shape)}"
            )
        div = 2**self.config.levels
        if x.shape[-2] % div or x.shape[-1] % div:
            raise ShapeMismatchError(
                f"spatial dims {tuple(x.shape[-2:])} not divisible by 2^levels = {div}"
            )

    def forward(self, s0):
        """Return the reconstruction checkpoint of every fold, last is final."""
        self._check_input(s0)
        checkpoints = []
        x = s0
        for fold in self.folds:
            x = x + fold(x)
            checkpoints.append(x)
        return checkpoints


class Discriminator(nn.Module):
    """Encoding path plus global average pooling to one score per item."""

    def __init__(self, config: NetworkConfig):
        super().__init__()
        self.config = config
        self.encoder = _EncoderPath(config)

    def forward(self, img):
        if img.dim() != 4 or img.shape[1] != self.config.input_channels:
            raise ShapeMismatchError(
                f"expected (B, {self.config.input_channels}, H, W), got {tuple(img.shape)}"
            )
        feats = self.encoder(img)
        return feats[-1].mean(dim=(1, 2, 3))


def init_weights(module: nn.Module, seed):
    """Seeded fan-in-scaled normal init for every conv; biases start at zero.

    The output convolution of each fold additionally starts at zero, so a
    freshly built generator is the identity map and training begins from the
    zero-filling reconstruction rather than from noise.
    """
    gen = torch.Generator().manual_seed(seed)
    gain = math.sqrt(2.0 / (1.0 + 0.2**2))
    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
                fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
                m.weight.normal_(0.0, gain / math.sqrt(fan_in), generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        for m in module.modules():
            if isinstance(m, Fold):
                m.final.conv.weight.zero_()
                m.final.conv.bias.zero_()
    return module


def zero_weights(module: nn.Module):
    """Zero every parameter (turns the generator into the identity map)."""
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def build_generator(config: NetworkConfig, seed=0) -> Generator:
    return init_weights(Generator(config), seed)


def build_discriminator(config: NetworkConfig, seed=0) -> Discriminator:
    # offset keeps G and D inits decorrelated for the same run seed
    return init_weights(Discriminator(config), seed + 1)
