"""Acceptance suite: one test per shipped guarantee.

Each test carries the `acceptance` marker; the terminal summary prints one
PASS/FAIL line per criterion after the run.
"""

import hashlib
import json
import subprocess
import sys
import time

import numpy as np
import pytest
import torch

from csrecon import (
    KSpaceMeasurement,
    LossWeights,
    MaskSpec,
    NetworkConfig,
    TrainConfig,
    evaluate,
    forward_fourier,
    generate_mask,
    inverse_fourier,
    load_checkpoint,
    normalize,
    nrmse,
    psnr,
    reconstruct,
    save_checkpoint,
    ssim,
    train,
    undersample,
    zero_fill,
)
from csrecon.data import Dataset
from csrecon.losses import distance, freq_loss, freq_loss_t, imag_loss
from csrecon.masks import PATTERNS, dc_bin, mask_rate
from csrecon.networks import zero_weights
from csrecon.phantom import make_phantom
from csrecon.training import init_state

from conftest import phantom_dataset, volume_datasets

DESK_NET = NetworkConfig(levels=3, base_filters=16, folds=2)
DESK_LOSS = LossWeights(alpha=100.0, gamma=1000.0)


def random_complex(rng, shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


@pytest.mark.acceptance(1, "k-space operator suite")
def test_criterion_01_operator_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(101)

    for _ in range(100):  # roundtrip and unitarity on random even shapes
        h, w = 2 * rng.integers(4, 33), 2 * rng.integers(4, 33)
        x = random_complex(rng, (h, w))
        y = random_complex(rng, (h, w))
        k = forward_fourier(x)
        assert np.abs(inverse_fourier(k) - x).max() <= 1e-6
        assert np.abs(forward_fourier(inverse_fourier(k)) - k).max() <= 1e-6
        ip_image = np.vdot(y, x)
        ip_freq = np.vdot(forward_fourier(y), k)
        assert abs(ip_freq - ip_image) <= 1e-6 * max(1.0, abs(ip_image))

    for trial in range(100):  # adjointness and interpolation of the masked map
        h, w = 2 * rng.integers(4, 33), 2 * rng.integers(4, 33)
        mask = generate_mask(MaskSpec("random", 0.4, int(h), int(w), seed=trial))
        x = random_complex(rng, (h, w))
        m = undersample(x, mask)

        y = random_complex(rng, (h, w)) * mask.bits
        lhs = np.vdot(y, m.values)
        rhs = np.vdot(zero_fill(KSpaceMeasurement(values=y, mask=mask)), x)
        assert abs(lhs - rhs) <= 1e-5 * max(1.0, abs(lhs))

        k0 = forward_fourier(zero_fill(m))  # zero-filling interpolates the data exactly
        assert np.abs(k0[mask.bits] - m.values[mask.bits]).max() <= 1e-6
        assert np.abs(k0[~mask.bits]).max() <= 1e-6

    assert time.perf_counter() - start < 10.0


RATES = (0.1, 0.2, 0.3, 0.4)

_DIGEST_SNIPPET = """
import hashlib, json
import numpy as np
from csrecon import MaskSpec, generate_mask

digests = {}
for pattern in ("radial", "cartesian", "random", "spiral"):
    for rate in (0.1, 0.2, 0.3, 0.4):
        mask = generate_mask(MaskSpec(pattern, rate, 256, 256, seed=5))
        key = f"{pattern}-{rate}"
        digests[key] = hashlib.sha256(np.packbits(mask.bits)).hexdigest()
print(json.dumps(digests))
"""


@pytest.mark.acceptance(2, "mask rates, determinism and DC coverage")
def test_criterion_02_mask_suite():
    digests = {}
    for pattern in PATTERNS:
        for rate in RATES:
            mask = generate_mask(MaskSpec(pattern, rate, 256, 256, seed=5))
            assert abs(mask_rate(mask) - rate) <= 0.02, (pattern, rate)
            assert mask.bits[dc_bin(256, 256)], (pattern, rate)
            digests[f"{pattern}-{rate}"] = hashlib.sha256(
                np.packbits(mask.bits)
            ).hexdigest()

    child = subprocess.run(
        [sys.executable, "-c", _DIGEST_SNIPPET],
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(child.stdout) == digests


@pytest.mark.acceptance(3, "metric oracle equivalence")
def test_criterion_03_metric_oracles():
    from test_metrics import nrmse_brute, psnr_brute, ssim_brute

    start = time.perf_counter()
    rng = np.random.default_rng(303)
    for trial in range(50):
        ref = rng.random((32, 32))
        if trial % 2:
            test = np.clip(ref + rng.normal(scale=0.1, size=(32, 32)), 0.0, 1.0)
        else:
            test = rng.random((32, 32))
        assert abs(psnr(ref, test) - psnr_brute(ref, test)) <= 1e-9
        assert abs(ssim(ref, test) - ssim_brute(ref, test)) <= 1e-6
        assert abs(nrmse(ref, test) - nrmse_brute(ref, test)) <= 1e-6
    assert time.perf_counter() - start < 30.0


@pytest.mark.acceptance(4, "total loss matches finite differences everywhere")
def test_criterion_04_gradient_checks():
    start = time.perf_counter()
    torch.manual_seed(99)
    rng = np.random.default_rng(17)

    spec = MaskSpec("random", 0.4, 8, 8, seed=2)
    mask = generate_mask(spec)
    weights = LossWeights(alpha=1.0, gamma=10.0)

    refs, xs, s0s, vals, rescales = [], [], [], [], []
    for _ in range(2):
        item, _ = normalize(random_complex(rng, (8, 8)))
        m = undersample(item, mask)
        s0 = zero_fill(m)
        x, norm = normalize(s0)
        refs.append(np.stack([item.real, item.imag]))
        xs.append(np.stack([x.real, x.imag]))
        s0s.append(np.stack([s0.real, s0.imag]))
        vals.append(m.values)
        rescales.append(
            [norm.real_scale * norm.magnitude_peak, norm.imag_scale * norm.magnitude_peak]
        )

    refs = torch.tensor(np.array(refs), dtype=torch.float64)
    xs = torch.tensor(np.array(xs), dtype=torch.float64)
    s0s = torch.tensor(np.array(s0s), dtype=torch.float64)
    vals = torch.tensor(np.array(vals), dtype=torch.complex128)
    resc = torch.tensor(np.array(rescales), dtype=torch.float64).reshape(-1, 2, 1, 1)
    mask_t = torch.tensor(mask.bits)

    config = TrainConfig(
        mask_spec=spec,
        net_config=NetworkConfig(levels=2, base_filters=8, folds=2),
        epochs=1,
        seed=0,
    )
    state = init_state(config)
    gen = state.generator.double()
    critic = state.discriminator.double()
    params = list(gen.parameters()) + list(critic.parameters())
    with torch.no_grad():  # move off the identity-start point before checking
        for p in params:
            p.add_(torch.empty_like(p).uniform_(-0.2, 0.2))

    x_m, s0_m, resc_m, vals_m = xs[:1], s0s[:1], resc[:1], vals[:1]
    ref_s, x_s, s0_s, resc_s = refs[1:], xs[1:], s0s[1:], resc[1:]

    def total_loss_value():
        sbar_m = [s0_m + (cp - x_m) * resc_m for cp in gen(x_m)]
        sbar_s = [s0_s + (cp - x_s) * resc_s for cp in gen(x_s)]
        freq = sum(freq_loss_t(sm, vals_m, mask_t, weights.distance) for sm in sbar_m)
        imag = sum(distance(ref_s, ss, weights.distance) for ss in sbar_s)
        adv_g = -critic(sbar_m[-1]).mean()
        return adv_g + weights.alpha * freq + weights.gamma * imag

    loss = total_loss_value()
    loss.backward()
    analytic = [p.grad.detach().clone().flatten() for p in params]

    step = 1e-4
    worst = 0.0
    with torch.no_grad():
        for p, grads in zip(params, analytic):
            flat = p.view(-1)
            for i in range(flat.numel()):
                origin = flat[i].item()
                flat[i] = origin + step
                up = total_loss_value().item()
                flat[i] = origin - step
                down = total_loss_value().item()
                flat[i] = origin
                fd = (up - down) / (2 * step)
                ag = grads[i].item()
                worst = max(worst, abs(fd - ag) / max(abs(fd), abs(ag), 1e-4))

    assert worst <= 1e-3
    assert time.perf_counter() - start < 300.0


@pytest.mark.acceptance(5, "zero network reproduces the zero-filling baseline")
def test_criterion_05_zero_network_identity():
    spec = MaskSpec("random", 0.4, 32, 32, seed=9)
    config = TrainConfig(
        mask_spec=spec,
        net_config=NetworkConfig(levels=2, base_filters=8, folds=2),
        epochs=1,
        seed=0,
    )
    state = init_state(config)
    zero_weights(state.generator)

    dataset = phantom_dataset(4, 32, first_seed=40, split="test")
    mask = generate_mask(spec)
    for item in dataset.items:
        m = undersample(item, mask)
        assert np.array_equal(reconstruct(state, m), zero_fill(m))

    report_net = evaluate(state, dataset, spec)
    report_base = evaluate(None, dataset, spec)
    assert report_net.rows == report_base.rows
    assert report_net.aggregates == report_base.aggregates


@pytest.mark.acceptance(6, "cyclic loss vanishes at the ground truth")
def test_criterion_06_cyclic_loss_optimum():
    spec = MaskSpec("radial", 0.3, 64, 64, seed=11)
    mask = generate_mask(spec)
    for seed in range(5):
        truth, _ = normalize(make_phantom(64, seed).astype(complex))
        m = undersample(truth, mask)
        checkpoints = [truth, truth]  # oracle: every fold returns the truth
        freq_terms = [freq_loss(m, cp) for cp in checkpoints]
        imag_terms = [imag_loss(truth, cp) for cp in checkpoints]
        assert freq_terms == [0.0, 0.0]
        assert imag_terms == [0.0, 0.0]


@pytest.fixture(scope="module")
def desk_data():
    return volume_datasets()


@pytest.fixture(scope="module")
def desk_run(desk_data):
    train_set, _ = desk_data
    spec = MaskSpec("radial", 0.3, 64, 64, seed=11)
    config = TrainConfig(
        mask_spec=spec,
        net_config=DESK_NET,
        loss_weights=DESK_LOSS,
        epochs=200,
        lr0=1e-3,
        batch_size=4,
        critic_steps=1,
        seed=7,
    )
    start = time.perf_counter()
    state = train(config, train_set)
    return {"state": state, "spec": spec, "elapsed": time.perf_counter() - start}


@pytest.mark.acceptance(7, "desk-scale training beats zero-filling")
def test_criterion_07_desk_scale_training(desk_data, desk_run):
    _, test_set = desk_data
    state, spec = desk_run["state"], desk_run["spec"]

    baseline = evaluate(None, test_set, spec).aggregates["psnr"]["mean"]
    final = evaluate(state, test_set, spec).aggregates["psnr"]["mean"]
    first_fold = evaluate(state, test_set, spec, fold=1).aggregates["psnr"]["mean"]

    assert final >= baseline + 3.0
    assert final >= first_fold - 0.1

    def epoch_total(epoch):
        return np.mean([r["total"] for r in state.history if r["epoch"] == epoch])

    assert epoch_total(200) < epoch_total(1)
    assert desk_run["elapsed"] < 1800.0


@pytest.mark.acceptance(8, "radial is not the worst pattern at 20%")
def test_criterion_08_pattern_sweep(desk_data):
    train_set, test_set = desk_data
    scores = {}
    for pattern in PATTERNS:
        spec = MaskSpec(pattern, 0.2, 64, 64, seed=21)
        config = TrainConfig(
            mask_spec=spec,
            net_config=DESK_NET,
            loss_weights=DESK_LOSS,
            epochs=100,
            lr0=1e-3,
            batch_size=4,
            critic_steps=1,
            seed=7,
        )
        state = train(config, train_set)
        scores[pattern] = evaluate(state, test_set, spec).aggregates["nrmse"]["mean"]

    assert all(np.isfinite(v) for v in scores.values()), scores
    worst = max(scores, key=scores.get)
    assert worst != "radial", scores


@pytest.mark.acceptance(9, "single 256x256 reconstruction in under a second")
def test_criterion_09_inference_latency():
    spec = MaskSpec("radial", 0.3, 256, 256, seed=13)
    config = TrainConfig(mask_spec=spec, net_config=NetworkConfig(), epochs=1, seed=0)
    state = init_state(config)
    image, _ = normalize(make_phantom(256, seed=21).astype(complex))
    m = undersample(image, generate_mask(spec))

    start = time.perf_counter()
    recon = reconstruct(state, m)
    elapsed = time.perf_counter() - start

    assert recon.shape == (256, 256)
    assert elapsed < 1.0


@pytest.mark.acceptance(10, "checkpoints roundtrip and resume seamlessly")
def test_criterion_10_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    items, names, norms = [], [], []
    for k in range(4):
        item, norm = normalize(random_complex(rng, (16, 16)))
        items.append(item)
        names.append(f"img{k}")
        norms.append(norm)
    dataset = Dataset(items=items, names=names, normalizations=norms, split="train")

    config = TrainConfig(
        mask_spec=MaskSpec("random", 0.4, 16, 16, seed=3),
        net_config=NetworkConfig(levels=2, base_filters=8, folds=2),
        epochs=5,
        lr0=1e-3,
        batch_size=2,
        critic_steps=1,
        seed=5,
    )

    def keep_midpoint(state):
        if state.epoch == 2:
            save_checkpoint(state, tmp_path / "mid.npz")

    straight = train(config, dataset, on_epoch_end=keep_midpoint)

    save_checkpoint(straight, tmp_path / "final.npz")
    again = load_checkpoint(tmp_path / "final.npz")
    for name in ("generator", "discriminator"):
        for pa, pb in zip(
            getattr(straight, name).parameters(), getattr(again, name).parameters()
        ):
            assert torch.equal(pa, pb)  # bit-for-bit

    resumed = train(config, dataset, state=load_checkpoint(tmp_path / "mid.npz"))
    tail = [r for r in straight.history if r["epoch"] > 2]
    assert len(resumed.history) == len(tail)
    for row_a, row_b in zip(tail, resumed.history):
        for key in ("adv_d", "adv_g", "freq", "imag", "total"):
            assert abs(row_b[key] - row_a[key]) <= 1e-4, (row_a, row_b)
