"""Shared fixtures and the acceptance-summary reporting hook."""

import numpy as np
import pytest

from csrecon.data import Dataset, normalize
from csrecon.phantom import make_phantom, make_phantom_volume

ACCEPTANCE_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, title): acceptance criterion covered by this test",
    )


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker = getattr(report, "_acceptance", None)
    if marker:
        num, title = marker
        ACCEPTANCE_RESULTS[num] = (title, report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker:
        report._acceptance = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        title, outcome = ACCEPTANCE_RESULTS[num]
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[criterion {num:2d}] {status}  {title}")


def phantom_dataset(count, size, first_seed, split="train"):
    """Dataset of normalized synthetic phantoms with sequential seeds."""
    items, names, norms = [], [], []
    for i in range(count):
        item, norm = normalize(make_phantom(size, first_seed + i).astype(complex))
        items.append(item)
        names.append(f"phantom_{first_seed + i:03d}")
        norms.append(norm)
    return Dataset(items=items, names=names, normalizations=norms, split=split)


def volume_datasets(count=25, size=64, seed=42, test_stride=5):
    """Train/test datasets drawn as interleaved slices of one phantom volume.

    Every ``test_stride``-th slice (starting at index 2) is held out, the way
    neighbouring slices of a single acquisition are split in practice.
    """
    volume = make_phantom_volume(count, size, seed)
    test_idx = set(range(2, count, test_stride))
    splits = {"train": ([], []), "test": ([], [])}
    for i, img in enumerate(volume):
        split = "test" if i in test_idx else "train"
        item, norm = normalize(img.astype(complex))
        splits[split][0].append((item, norm))
        splits[split][1].append(f"slice_{i:03d}")
    out = []
    for split in ("train", "test"):
        pairs, names = splits[split]
        out.append(
            Dataset(
                items=[p[0] for p in pairs],
                names=names,
                normalizations=[p[1] for p in pairs],
                split=split,
            )
        )
    return tuple(out)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_dataset():
    return phantom_dataset(4, 32, first_seed=10)
