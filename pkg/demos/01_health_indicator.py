"""From raw vibration to RUL labels on a synthetic run-to-failure record.

A bearing is simulated for 300 snapshots with a fault that starts at
snapshot 180. We compute the 2 x 14 feature matrix per snapshot, track
horizontal RMS, locate the first prediction time with the 3-sigma rule
and build both kinds of labels.

    python demos/01_health_indicator.py
"""
import numpy as np

from bearing_rul.data import SynthConfig, synthesize_degradation
from bearing_rul.features import FEATURE_NAMES, CwtConfig, cwt_scalogram, feature_vector
from bearing_rul.labeling import detect_fpt, label_hi_fpt, label_hi_pca

rec, onset = synthesize_degradation(SynthConfig(n_snapshots=300, fault_onset=180, seed=7))
print(f"{rec.bearing_id}: {len(rec)} snapshots of {rec.block_len} samples, "
      f"lifetime {rec.lifetime_s:.0f} s, true onset {onset}")

feats = np.stack([feature_vector(b.as_array())[0] for b in rec.snapshots])  # (n, 2, 14)
early, late = feats[:50, 0].mean(axis=0), feats[-20:, 0].mean(axis=0)
print("\nhorizontal channel, healthy vs. end of life")
for name, a, b in zip(FEATURE_NAMES, early, late):
    print(f"  {name:<17s}{a:12.4g}{b:12.4g}")

# the detector only sees the RMS curve
rms = feats[:, 0, 0]
fpt = detect_fpt(rms)
print(f"\nhealthy window {fpt.healthy_window}: mu {fpt.mu:.4f}, sigma {fpt.sigma:.5f}")
print(f"first prediction time: snapshot {fpt.fpt_index} (true onset {onset})")

lab = label_hi_fpt(fpt.fpt_index, len(rec) - 1)
print(f"HI-FPT: {lab.mask.sum()} labeled snapshots, RUL {lab.labeled()[0]:.2f} -> {lab.labeled()[-1]:.2f}")

pca = label_hi_pca(feats.reshape(len(rec), -1))
q = len(rec) // 4
print("HI-PCA quartile means:", np.round([pca.values[i * q:(i + 1) * q].mean() for i in range(4)], 3))

# one scalogram per channel feeds the 2-D branch
scal = cwt_scalogram(rec.snapshots[-1].horizontal, CwtConfig())
print(f"\nscalogram {scal.values.shape} over scales {scal.scales[0]:.0f}..{scal.scales[-1]:.0f}; "
      f"peak row {int(scal.values.mean(axis=1).argmax())}")
