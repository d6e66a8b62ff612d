"""Compressed-sensing MRI reconstruction with adversarially trained chained
residual autoencoders: measurement model, mask generation, datasets, networks,
losses, training, metrics and a command-line surface."""

__version__ = "0.1.0"

from .data import (
    BatchSampler,
    Dataset,
    Normalization,
    denormalize,
    load_image_dataset,
    load_image_dir,
    load_kspace_dataset,
    next_batch,
    normalize,
)
from .exceptions import (
    CheckpointError,
    InvalidInputError,
    MalformedFileError,
    ShapeMismatchError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .kspace import (
    KSpaceMeasurement,
    SamplingMask,
    data_consistency_project,
    dc_bin,
    forward_fourier,
    inverse_fourier,
    load_kspace_grid,
    load_measurement,
    save_kspace_grid,
    save_measurement,
    undersample,
    zero_fill,
)
from .losses import (
    LossBreakdown,
    LossWeights,
    adversarial_losses,
    distance,
    freq_loss,
    gradient_penalty,
    imag_loss,
    total_loss,
)
from .masks import MaskSpec, full_mask, generate_mask, load_mask, mask_rate, save_mask
from .metrics import EvaluationReport, evaluate, nrmse, psnr, save_report, ssim
from .phantom import make_phantom, make_phantom_volume, write_phantom_dir
from .networks import (
    DecoderBlock,
    Discriminator,
    EncoderBlock,
    Fold,
    Generator,
    NetworkConfig,
    ResidualBlock,
    build_discriminator,
    build_generator,
    zero_weights,
)
from .training import (
    TrainConfig,
    TrainState,
    load_checkpoint,
    reconstruct,
    save_checkpoint,
    train,
)

__all__ = [
    "BatchSampler",
    "CheckpointError",
    "Dataset",
    "DecoderBlock",
    "Discriminator",
    "EncoderBlock",
    "EvaluationReport",
    "Fold",
    "Generator",
    "InvalidInputError",
    "KSpaceMeasurement",
    "LossBreakdown",
    "LossWeights",
    "MalformedFileError",
    "MaskSpec",
    "NetworkConfig",
    "Normalization",
    "ResidualBlock",
    "SamplingMask",
    "ShapeMismatchError",
    "TrainConfig",
    "TrainState",
    "TrainingDivergedError",
    "UndefinedMetricError",
    "adversarial_losses",
    "build_discriminator",
    "build_generator",
    "data_consistency_project",
    "dc_bin",
    "denormalize",
    "distance",
    "evaluate",
    "forward_fourier",
    "freq_loss",
    "full_mask",
    "generate_mask",
    "gradient_penalty",
    "imag_loss",
    "inverse_fourier",
    "load_checkpoint",
    "load_image_dataset",
    "load_image_dir",
    "load_kspace_dataset",
    "load_kspace_grid",
    "load_mask",
    "load_measurement",
    "make_phantom",
    "make_phantom_volume",
    "mask_rate",
    "next_batch",
    "normalize",
    "nrmse",
    "psnr",
    "reconstruct",
    "save_checkpoint",
    "save_kspace_grid",
    "save_mask",
    "save_measurement",
    "save_report",
    "ssim",
    "total_loss",
    "train",
    "undersample",
    "write_phantom_dir",
    "zero_fill",
    "zero_weights",
]
