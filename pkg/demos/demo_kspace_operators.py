"""Walk through the measurement model on a synthetic phantom.

Shows the centered k-space spectrum, what undersampling removes, and how the
zero-filling reconstruction degrades as the sampling rate drops.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from csrecon import MaskSpec, forward_fourier, generate_mask, undersample, zero_fill
from csrecon.phantom import make_phantom

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)

size = 128
img = make_phantom(size, seed=42).astype(complex)

# the spectrum is centered: DC sits at (size//2, size//2)
spectrum = forward_fourier(img)
print(f"image energy  {np.linalg.norm(img):.6f}")
print(f"k-space energy {np.linalg.norm(spectrum):.6f}  (unitary transform)")

rates = (0.1, 0.2, 0.3, 0.4)
fig, axes = plt.subplots(3, len(rates) + 1, figsize=(3 * (len(rates) + 1), 9))
axes[0, 0].imshow(np.abs(img), cmap="gray")
axes[0, 0].set_title("ground truth")
axes[1, 0].imshow(np.log1p(np.abs(spectrum)), cmap="viridis")
axes[1, 0].set_title("log |k-space|")
axes[2, 0].axis("off")

for col, rate in enumerate(rates, start=1):
    mask = generate_mask(MaskSpec("radial", rate, size, size, seed=1))
    m = undersample(img, mask)
    s0 = zero_fill(m)
    err = np.linalg.norm(s0 - img) / np.linalg.norm(img)
    print(f"rate {rate:.1f}: zero-fill relative error {err:.4f}")
    axes[0, col].imshow(mask.bits, cmap="gray")
    axes[0, col].set_title(f"radial {int(rate * 100)}%")
    axes[1, col].imshow(np.log1p(np.abs(m.values)), cmap="viridis")
    axes[1, col].set_title("measured k-space")
    axes[2, col].imshow(np.abs(s0), cmap="gray")
    axes[2, col].set_title(f"zero-fill, err {err:.3f}")

for ax in axes.flat:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "kspace_operators.png", dpi=110)
print(f"figure written to {out_dir / 'kspace_operators.png'}")
