"""What the two frequency condition extractors actually see.

Builds a signal that switches period halfway through, then inspects:

1. the one-sided amplitude spectrum of a window from each regime (the
   global extractor's input) showing the dominant bin move;
2. the attention weights the local extractor puts on each small window
   when the window straddles the regime change: the latest small
   window is the query, so even with untrained projections the small
   windows that share its spectrum get visibly more weight, and
   training sharpens that further;
3. the last-point masking property: the scored point is zeroed before
   either extractor runs, so replacing it changes no condition bit.
   That is what stops an anomalous value from contaminating the
   reconstruction expectations used to judge it.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from fcvae.model import FCVAE, FCVAEConfig
from fcvae.spectral import amplitude_features

rng = np.random.default_rng(0)
n = 600
t = np.arange(n, dtype=np.float64)
values = np.where(t < 300,
                  3.0 * np.sin(2 * np.pi * t / 20.0),
                  3.0 * np.sin(2 * np.pi * t / 8.0))
values += rng.normal(0, 0.05, n)

W = 120
config = FCVAEConfig(window=W, small_window=30, small_window_stride=10,
                     cond_dim=16, latent_dim=4, hidden=[32])
model = FCVAE(config, seed=0)

# 1. global spectra: the dominant bin is W/period
for name, end in [("period-20 regime", 200), ("period-8 regime", 550)]:
    window = values[end - W : end]
    amps = amplitude_features(window).amplitudes
    top = np.argsort(amps[1:])[::-1][:3] + 1
    print(f"{name}: strongest bins {top.tolist()} "
          f"(expected near {W / 20:.0f} or {W / 8:.0f}), "
          f"amplitudes {np.round(amps[top], 3).tolist()}")

# 2. attention across the regime boundary: the window covers points
# 240..360, so its early small windows are period-20 and its late ones
# period-8; the query is the latest small window
window = values[240:360]
weights = model.attention_weights(window)
print("attention over small windows (oldest -> newest):")
print("  " + " ".join(f"{w:.3f}" for w in weights))
late = weights[len(weights) // 2 :].sum()
print(f"  weight on the second half: {late:.3f}")

# 3. replacing the scored point moves no condition bit
window = values[-W:]
base = model.condition_vector(window)
for replacement in [0.0, 5.0, -17.0, 1e6]:
    probe = window.copy()
    probe[-1] = replacement
    got = model.condition_vector(probe)
    same = (np.array_equal(base.f_local, got.f_local)
            and np.array_equal(base.f_global, got.f_global))
    print(f"last value -> {replacement:>8}: conditions identical = {same}")
