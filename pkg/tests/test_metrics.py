"""Metric oracle and evaluation report tests."""

import math

import numpy as np
import pytest

from csrecon import (
    Dataset,
    EvaluationReport,
    InvalidInputError,
    MaskSpec,
    NetworkConfig,
    ShapeMismatchError,
    TrainConfig,
    UndefinedMetricError,
    evaluate,
    make_phantom,
    normalize,
    nrmse,
    psnr,
    save_report,
    ssim,
)
from csrecon.metrics import load_report_rows
from csrecon.networks import zero_weights
from csrecon.training import init_state

SSIM_WINDOW, SSIM_SIGMA, K1, K2 = 11, 1.5, 0.01, 0.03


def psnr_brute(ref, test):
    peak = ref.max() - ref.min()
    mse = np.mean((test - ref) ** 2)
    return 20.0 * math.log10(peak / math.sqrt(mse))


def ssim_brute(ref, test):
    """Literal per-window SSIM with an explicitly built Gaussian kernel."""
    half = SSIM_WINDOW // 2
    kernel = np.zeros((SSIM_WINDOW, SSIM_WINDOW))
    for i in range(SSIM_WINDOW):
        for j in range(SSIM_WINDOW):
            kernel[i, j] = math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * SSIM_SIGMA**2))
    kernel /= kernel.sum()
    peak = ref.max() - ref.min()
    c1, c2 = (K1 * peak) ** 2, (K2 * peak) ** 2
    h, w = ref.shape
    values = []
    for y in range(h - SSIM_WINDOW + 1):
        for x in range(w - SSIM_WINDOW + 1):
            wx = ref[y : y + SSIM_WINDOW, x : x + SSIM_WINDOW]
            wy = test[y : y + SSIM_WINDOW, x : x + SSIM_WINDOW]
            mx, my = (kernel * wx).sum(), (kernel * wy).sum()
            vx = (kernel * wx * wx).sum() - mx**2
            vy = (kernel * wy * wy).sum() - my**2
            cov = (kernel * wx * wy).sum() - mx * my
            values.append(
                ((2 * mx * my + c1) * (2 * cov + c2))
                / ((mx**2 + my**2 + c1) * (vx + vy + c2))
            )
    return float(np.mean(values))


def nrmse_brute(ref, test):
    return math.sqrt(((test - ref) ** 2).sum()) / math.sqrt((ref**2).sum())


class TestPsnr:
    def test_analytic_twenty_db(self):
        ref = np.linspace(0.0, 1.0, 64).reshape(8, 8)  # dynamic range exactly 1
        assert psnr(ref, ref + 0.1) == pytest.approx(20.0, abs=1e-9)

    def test_matches_brute_force(self, rng):
        for _ in range(5):
            ref, test = rng.normal(size=(32, 32)), rng.normal(size=(32, 32))
            assert psnr(ref, test) == pytest.approx(psnr_brute(ref, test), abs=1e-9)

    def test_identical_is_infinite(self, rng):
        ref = rng.normal(size=(8, 8))
        assert psnr(ref, ref.copy()) == math.inf

    def test_constant_reference_undefined(self):
        with pytest.raises(UndefinedMetricError):
            psnr(np.ones((8, 8)), np.zeros((8, 8)))

    def test_constant_identical_still_undefined(self):
        with pytest.raises(UndefinedMetricError):
            psnr(np.ones((8, 8)), np.ones((8, 8)))

    def test_complex_rejected(self):
        with pytest.raises(InvalidInputError):
            psnr(np.ones((8, 8), complex), np.zeros((8, 8), complex))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            psnr(np.zeros((8, 8)), np.zeros((8, 9)))


class TestSsim:
    def test_identical_is_one(self, rng):
        ref = rng.normal(size=(16, 16))
        assert ssim(ref, ref.copy()) == pytest.approx(1.0, abs=1e-12)

    def test_matches_brute_force(self, rng):
        for _ in range(3):
            ref = rng.normal(size=(32, 32))
            test = ref + 0.3 * rng.normal(size=(32, 32))
            assert ssim(ref, test) == pytest.approx(ssim_brute(ref, test), abs=1e-6)

    def test_anticorrelated_structure_is_negative(self):
        # high-frequency sinusoid: local means vanish, so negating the image
        # flips only the covariance term and the index goes negative
        yy, xx = np.mgrid[0:32, 0:32]
        ref = np.sin(2 * np.pi * (xx + yy) / 4.0)
        assert ssim(ref, -ref) < 0.0

    def test_too_small_image(self):
        with pytest.raises(InvalidInputError):
            ssim(np.zeros((8, 8)), np.zeros((8, 8)))

    def test_constant_reference_undefined(self):
        with pytest.raises(UndefinedMetricError):
            ssim(np.ones((16, 16)), np.zeros((16, 16)))


class TestNrmse:
    def test_doubled_reference_is_one(self, rng):
        ref = rng.normal(size=(8, 8))
        assert nrmse(ref, 2.0 * ref) == pytest.approx(1.0, abs=1e-12)

    def test_matches_brute_force(self, rng):
        for _ in range(5):
            ref, test = rng.normal(size=(32, 32)), rng.normal(size=(32, 32))
            assert nrmse(ref, test) == pytest.approx(nrmse_brute(ref, test), rel=1e-9)

    def test_zero_reference_undefined(self):
        with pytest.raises(UndefinedMetricError):
            nrmse(np.zeros((8, 8)), np.ones((8, 8)))

    def test_identical_is_zero(self, rng):
        ref = rng.normal(size=(8, 8))
        assert nrmse(ref, ref.copy()) == 0.0


class TestEvaluationReport:
    def test_aggregates_match_brute_force(self):
        rows = [
            {"id": "a", "psnr": 20.0, "ssim": 0.8},
            {"id": "b", "psnr": 24.0, "ssim": 0.9},
            {"id": "c", "psnr": 28.0, "ssim": 1.0},
        ]
        report = EvaluationReport(rows=rows)
        assert report.aggregates["psnr"]["mean"] == pytest.approx(24.0, abs=1e-9)
        assert report.aggregates["psnr"]["std"] == pytest.approx(
            math.sqrt(((16 + 0 + 16) / 3)), abs=1e-9
        )
        assert report.aggregates["ssim"]["mean"] == pytest.approx(0.9, abs=1e-9)

    def test_roundtrip_through_csv(self, tmp_path):
        rows = [{"id": "x", "psnr": 21.5, "ssim": 0.75, "nrmse": 0.2}]
        save_report(EvaluationReport(rows=rows), tmp_path / "r.csv", tmp_path / "r.txt")
        again = load_report_rows(tmp_path / "r.csv")
        assert again == rows
        summary = (tmp_path / "r.txt").read_text()
        assert "psnr_mean = 21.5" in summary


class TestEvaluate:
    def _dataset(self, count=3, size=32):
        items, names, norms = [], [], []
        for k in range(count):
            item, norm = normalize(make_phantom(size, seed=50 + k).astype(np.complex128))
            items.append(item)
            names.append(f"p{k}")
            norms.append(norm)
        return Dataset(items=items, names=names, normalizations=norms, split="test")

    def test_baseline_report(self):
        ds = self._dataset()
        spec = MaskSpec("random", 0.4, 32, 32, seed=3)
        report = evaluate(None, ds, spec)
        assert len(report.rows) == 3
        assert report.metadata["checkpoint"] == "zero-fill baseline"
        assert all(np.isfinite(r["psnr"]) for r in report.rows)
        assert set(report.rows[0]) == {"id", "psnr", "ssim", "nrmse"}

    def test_zero_network_equals_baseline(self):
        ds = self._dataset()
        spec = MaskSpec("random", 0.4, 32, 32, seed=3)
        config = TrainConfig(
            mask_spec=spec, net_config=NetworkConfig(levels=2, base_filters=8, folds=2)
        )
        state = init_state(config)
        zero_weights(state.generator)
        baseline = evaluate(None, ds, spec)
        scored = evaluate(state, ds, spec)
        assert scored.rows == baseline.rows

    def test_fold_selection(self):
        ds = self._dataset()
        spec = MaskSpec("random", 0.4, 32, 32, seed=3)
        config = TrainConfig(
            mask_spec=spec, net_config=NetworkConfig(levels=2, base_filters=8, folds=2)
        )
        state = init_state(config)
        r1 = evaluate(state, ds, spec, fold=1)
        r2 = evaluate(state, ds, spec, fold=2)
        assert r1.metadata["fold"] == 1 and r2.metadata["fold"] == 2

    def test_complex_dataset_gets_phase_metrics(self, rng):
        raw = [
            rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32)) for _ in range(2)
        ]
        items, norms = zip(*(normalize(z) for z in raw))
        ds = Dataset(items=list(items), names=["a", "b"], normalizations=list(norms))
        spec = MaskSpec("random", 0.4, 32, 32, seed=3)
        report = evaluate(None, ds, spec)
        assert "phase_psnr" in report.rows[0]

    def test_shape_mismatch(self):
        ds = self._dataset(size=32)
        with pytest.raises(ShapeMismatchError):
            evaluate(None, ds, MaskSpec("random", 0.4, 64, 64, seed=3))
