"""Adversarial training loop, checkpointing and inference.

Training alternates critic and generator updates with Adam, a linearly
decaying learning rate and a fixed undersampling mask. All training math runs
in float32; inference upcasts the generator to float64 and adds its residual
to the zero-filling reconstruction in original units, so an all-zero
generator reproduces zero-filling bit for bit.

Checkpoints are .npz containers: versioned, with canonical parameter names,
little-endian float32 arrays, the full config as embedded JSON, optimizer
moments, sampler position and the penalty RNG state, which makes resumed
training continue exactly where it stopped.
"""

import copy
import csv
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .data import BatchSampler, Dataset, complex_to_channels, next_batch, normalize
from .exceptions import (
    CheckpointError,
    InvalidInputError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .kspace import KSpaceMeasurement, undersample, zero_fill
from .losses import (
    HISTORY_FIELDS,
    LossWeights,
    distance,
    freq_loss_t,
    gradient_penalty,
    total_loss,
)
from .masks import MaskSpec, generate_mask
from .networks import NetworkConfig, build_discriminator, build_generator

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    """Everything that determines a training run."""

    mask_spec: MaskSpec
    net_config: NetworkConfig = NetworkConfig()
    loss_weights: LossWeights = LossWeights()
    epochs: int = 500
    lr0: float = 1e-4
    batch_size: int = 4
    critic_steps: int = 5
    seed: int = 0
    checkpoint_interval: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise InvalidInputError(f"epochs must be >= 1, got {self.epochs}")
        # lr0 == 0 is allowed so a frozen-optimizer run stays expressible
        if self.lr0 < 0:
            raise InvalidInputError(f"lr0 must be >= 0, got {self.lr0}")
        if self.batch_size < 1 or self.critic_steps < 1:
            raise InvalidInputError("batch_size and critic_steps must be >= 1")


@dataclass
class TrainState:
    """Mutable snapshot of a run: networks, optimizers, counters, history."""

    config: TrainConfig
    generator: torch.nn.Module
    discriminator: torch.nn.Module
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    sampler: BatchSampler
    gp_rng: torch.Generator
    epoch: int = 0
    step: int = 0
    history: list = field(default_factory=list)


def lr_at_epoch(config: TrainConfig, epoch):
    """Linear decay from lr0 toward zero; strictly decreasing per epoch."""
    return config.lr0 * (1.0 - epoch / config.epochs)


def init_state(config: TrainConfig) -> TrainState:
    """Fresh seeded state: networks, Adam optimizers, sampler, penalty RNG."""
    gen = build_generator(config.net_config, seed=config.seed)
    disc = build_discriminator(config.net_config, seed=config.seed)

    def adam(params):
        return torch.optim.Adam(params, lr=config.lr0, betas=(0.9, 0.999), eps=1e-8)

    gp_rng = torch.Generator().manual_seed(config.seed + 2)
    return TrainState(
        config=config,
        generator=gen,
        discriminator=disc,
        opt_g=adam(gen.parameters()),
        opt_d=adam(disc.parameters()),
        sampler=BatchSampler(batch_size=config.batch_size, seed=config.seed),
        gp_rng=gp_rng,
    )


def _set_lr(optimizer, lr):
    for group in optimizer.param_groups:
        group["lr"] = lr


def _prepare_tensors(config: TrainConfig, train_set: Dataset):
    """Per-item training tensors, all float32.

    For each item: the reference, its dense measured grid, the zero-filling
    s0, the generator input x (s0 normalized by its own statistics, exactly as
    reconstruct() feeds it) and the per-channel factors that map generator
    residuals x' - x back into item units: s_bar = s0 + (x' - x) * rescale.
    """
    mask = generate_mask(config.mask_spec)
    if train_set.shape != mask.shape:
        raise ShapeMismatchError(
            f"dataset shape {train_set.shape} != mask shape {mask.shape}"
        )
    refs, xs, s0s, grids, rescales = [], [], [], [], []
    for item in train_set.items:
        m = undersample(item, mask)
        s0 = zero_fill(m)
        normed, norm = normalize(s0)
        refs.append(complex_to_channels(item))
        xs.append(complex_to_channels(normed))
        s0s.append(complex_to_channels(s0))
        grids.append(m.values)
        rescales.append(
            [norm.real_scale * norm.magnitude_peak, norm.imag_scale * norm.magnitude_peak]
        )

    def stack32(arrs):
        return torch.from_numpy(np.stack(arrs)).to(torch.float32)

    measured = torch.from_numpy(np.stack(grids)).to(torch.complex64)
    rescale = torch.tensor(rescales, dtype=torch.float32).reshape(-1, 2, 1, 1)
    mask_t = torch.from_numpy(mask.bits)
    return stack32(refs), stack32(xs), stack32(s0s), measured, rescale, mask_t


def train(config: TrainConfig, train_set: Dataset, state=None, on_epoch_end=None):
    """Run (or continue) training and return the final TrainState.

    Raises TrainingDivergedError as soon as any loss value stops being finite.
    """
    if len(train_set) == 0:
        raise InvalidInputError("training set is empty")
    div = 2**config.net_config.levels
    h, w = train_set.shape
    if h % div or w % div:
        raise ShapeMismatchError(
            f"image side {h}x{w} not divisible by 2^levels = {div}"
        )
    if state is None:
        state = init_state(config)
    elif state.config != config:
        raise InvalidInputError("resumed state was built with a different config")
    refs_all, x_all, s0_all, measured_all, rescale_all, mask_t = _prepare_tensors(
        config, train_set
    )
    weights = config.loss_weights
    steps_per_epoch = max(1, len(train_set) // config.batch_size)
    G, D = state.generator, state.discriminator

    for epoch in range(state.epoch, config.epochs):
        lr = lr_at_epoch(config, epoch)
        _set_lr(state.opt_g, lr)
        _set_lr(state.opt_d, lr)
        for _ in range(steps_per_epoch):
            m_idx, s_idx = next_batch(state.sampler, train_set)
            x_m, s0_m = x_all[m_idx], s0_all[m_idx]
            measured_m, resc_m = measured_all[m_idx], rescale_all[m_idx]
            refs_s, x_s = refs_all[s_idx], x_all[s_idx]
            s0_s, resc_s = s0_all[s_idx], rescale_all[s_idx]

            # critic updates on the final checkpoint only, in item units
            with torch.no_grad():
                fake = s0_m + (G(x_m)[-1] - x_m) * resc_m
            for _ in range(config.critic_steps):
                gp = gradient_penalty(D, refs_s, fake, state.gp_rng)
                score_fake = D(fake).mean()
                score_real = D(refs_s).mean()
                adv_d = score_fake - score_real + weights.gp_lambda * gp
                if not torch.isfinite(adv_d):
                    raise TrainingDivergedError(
                        f"critic loss non-finite at epoch {epoch + 1} step {state.step}"
                    )
                state.opt_d.zero_grad()
                adv_d.backward()
                state.opt_d.step()

            # generator update: freq on the m-batch, imag on the s-batch
            sbar_m = [s0_m + (cp - x_m) * resc_m for cp in G(x_m)]
            sbar_s = [s0_s + (cp - x_s) * resc_s for cp in G(x_s)]
            fold_losses = [
                (
                    freq_loss_t(sm, measured_m, mask_t, weights.distance),
                    distance(refs_s, ss, weights.distance),
                )
                for sm, ss in zip(sbar_m, sbar_s)
            ]
            adv_g = -D(sbar_m[-1]).mean()
            ltotal = total_loss(fold_losses, adv_g, weights)
            if not torch.isfinite(ltotal):
                raise TrainingDivergedError(
                    f"generator loss non-finite at epoch {epoch + 1} step {state.step}"
                )
            state.opt_g.zero_grad()
            ltotal.backward()
            state.opt_g.step()

            state.history.append(
                {
                    "epoch": epoch + 1,
                    "step": state.step,
                    "adv_g": float(adv_g.detach()),
                    "adv_d": float(adv_d.detach()),
                    "freq": float(sum(f.detach() for f, _ in fold_losses)),
                    "imag": float(sum(i.detach() for _, i in fold_losses)),
                    "total": float(ltotal.detach()),
                    "lr": lr,
                }
            )
            state.step += 1
        state.epoch = epoch + 1
        if on_epoch_end is not None:
            on_epoch_end(state)
    return state


def reconstruct(state, m: KSpaceMeasurement, fold=None):
    """Reconstruct one measurement with the trained generator, in float64.

    The generator's residual (in the normalized domain) is rescaled to
    original units and added to the zero-filling reconstruction, so zero
    weights return zero_fill(m) exactly.
    """
    if isinstance(state, (str, Path)):
        state = load_checkpoint(state)
    config = state.config.net_config
    div = 2**config.levels
    h, w = m.shape
    if h % div or w % div:
        raise ShapeMismatchError(f"measurement {h}x{w} not divisible by 2^levels = {div}")
    n_folds = config.folds
    if fold is not None and not 1 <= fold <= n_folds:
        raise InvalidInputError(f"fold must be in [1, {n_folds}], got {fold}")

    s0 = zero_fill(m)
    normed, norm = normalize(s0)
    g64 = copy.deepcopy(state.generator).double().eval()
    x = torch.from_numpy(complex_to_channels(normed)).unsqueeze(0)
    with torch.no_grad():
        checkpoints = g64(x)
    out = checkpoints[(fold or n_folds) - 1]
    residual = (out - x)[0].numpy()
    delta = (
        residual[0] * norm.real_scale + 1j * residual[1] * norm.imag_scale
    ) * norm.magnitude_peak
    return s0 + delta


def _config_to_dict(config: TrainConfig):
    return dataclasses.asdict(config)


def _config_from_dict(d):
    return TrainConfig(
        mask_spec=MaskSpec(**d["mask_spec"]),
        net_config=NetworkConfig(**d["net_config"]),
        loss_weights=LossWeights(**d["loss_weights"]),
        **{
            k: d[k]
            for k in (
                "epochs",
                "lr0",
                "batch_size",
                "critic_steps",
                "seed",
                "checkpoint_interval",
            )
        },
    )


def _optimizer_arrays(prefix, optimizer):
    out = {}
    for idx, st in optimizer.state_dict()["state"].items():
        for key, value in st.items():
            arr = value.detach().numpy() if isinstance(value, torch.Tensor) else value
            out[f"{prefix}.{idx}.{key}"] = np.asarray(arr, dtype=np.float32)
    return out


def save_checkpoint(state: TrainState, path):
    """Write the full training state as a versioned .npz container."""
    arrays = {
        "format_version": np.int64(CHECKPOINT_VERSION),
        "config_json": np.frombuffer(
            json.dumps(_config_to_dict(state.config)).encode(), dtype=np.uint8
        ),
        "epoch": np.int64(state.epoch),
        "step": np.int64(state.step),
        "sampler_state": np.array(
            state.sampler.state["m"] + state.sampler.state["s"], dtype=np.int64
        ),
        "gp_rng": state.gp_rng.get_state().numpy(),
    }
    for net, prefix in ((state.generator, "G"), (state.discriminator, "D")):
        for key, tensor in net.state_dict().items():
            arrays[f"{prefix}.{key}"] = tensor.detach().numpy().astype("<f4")
    arrays.update(_optimizer_arrays("optG", state.opt_g))
    arrays.update(_optimizer_arrays("optD", state.opt_d))
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def _load_net(net, prefix, data, path):
    current = net.state_dict()
    loaded = {}
    for key, tensor in current.items():
        full = f"{prefix}.{key}"
        if full not in data:
            raise CheckpointError(f"{path}: missing parameter {full}")
        arr = data[full]
        if tuple(arr.shape) != tuple(tensor.shape):
            raise CheckpointError(
                f"{path}: parameter {full} has shape {arr.shape}, expected "
                f"{tuple(tensor.shape)}"
            )
        loaded[key] = torch.from_numpy(arr.copy())
    net.load_state_dict(loaded)


def _load_optimizer(optimizer, prefix, data, n_params, lr):
    state = {}
    for idx in range(n_params):
        entry = {}
        for key in ("step", "exp_avg", "exp_avg_sq"):
            full = f"{prefix}.{idx}.{key}"
            if full in data:
                entry[key] = torch.from_numpy(np.asarray(data[full]).copy())
        if entry:
            state[idx] = entry
    if state:
        sd = optimizer.state_dict()
        sd["state"] = state
        for group in sd["param_groups"]:
            group["lr"] = lr
        optimizer.load_state_dict(sd)


def load_checkpoint(path, net_config: NetworkConfig = None) -> TrainState:
    """Rebuild a TrainState from a checkpoint file.

    A net_config argument, when given, must match the one embedded in the
    file; a mismatch raises ShapeMismatchError before any weights load.
    """
    path = Path(path)
    try:
        with np.load(path) as data:
            data = dict(data)
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from None
    if "format_version" not in data:
        raise CheckpointError(f"{path}: not a checkpoint (missing format_version)")
    version = int(data["format_version"])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        config = _config_from_dict(json.loads(bytes(data["config_json"]).decode()))
    except (KeyError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: bad embedded config ({exc})") from None
    if net_config is not None and net_config != config.net_config:
        raise ShapeMismatchError(
            f"{path}: checkpoint built for {config.net_config}, requested {net_config}"
        )

    state = init_state(config)
    state.epoch = int(data["epoch"])
    state.step = int(data["step"])
    _load_net(state.generator, "G", data, path)
    _load_net(state.discriminator, "D", data, path)
    lr = lr_at_epoch(config, min(state.epoch, config.epochs - 1))
    _load_optimizer(
        state.opt_g, "optG", data, len(list(state.generator.parameters())), lr
    )
    _load_optimizer(
        state.opt_d, "optD", data, len(list(state.discriminator.parameters())), lr
    )
    sampler_state = data["sampler_state"]
    state.sampler.state = {
        "m": [int(sampler_state[0]), int(sampler_state[1])],
        "s": [int(sampler_state[2]), int(sampler_state[3])],
    }
    state.gp_rng.set_state(torch.from_numpy(data["gp_rng"].copy()))
    return state


def write_history(rows, path):
    """Write LossBreakdown rows as CSV with the canonical column order."""
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        writer.writerows(rows)


def read_history(path):
    with open(path, newline="") as f:
        rows = []
        for raw in csv.DictReader(f):
            row = {k: float(raw[k]) for k in HISTORY_FIELDS}
            row["epoch"] = int(row["epoch"])
            row["step"] = int(row["step"])
            rows.append(row)
    return rows
