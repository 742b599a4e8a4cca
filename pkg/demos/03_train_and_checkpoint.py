"""Training the multi-branch network on a handful of labeled snapshots.

Three synthetic operating conditions contribute a few snapshots each.
The desk-scale network learns RUL and condition jointly; afterwards the
weights go through a checkpoint file and predictions are compared.

    python demos/03_train_and_checkpoint.py     (about 30 s)
"""
import tempfile
from pathlib import Path

import numpy as np

from bearing_rul.checkpoint import load_checkpoint, save_checkpoint
from bearing_rul.data import SynthConfig, synthesize_degradation
from bearing_rul.features import extract_all
from bearing_rul.model import DESK, Batch, LabeledData, MultiBranchNet, TrainConfig, evaluate, train

sets, rul, oc, bearing = [], [], [], []
for c in (1, 2, 3):
    rec, _ = synthesize_degradation(SynthConfig(n_snapshots=20, fault_onset=5, seed=c,
                                                shaft_hz=20 + 10 * c, condition_id=c,
                                                bearing_id=f"Synth{c}_1"))
    for t in (0, 7, 13, 19):
        sets.append(extract_all(rec.snapshots[t]))
        rul.append((19 - t) / 19)
        oc.append(c - 1)
        bearing.append(rec.bearing_id)
n = len(sets)
data = LabeledData(Batch.from_feature_sets(sets), np.array(rul), np.ones(n, bool), np.array(oc),
                   np.array(bearing, dtype=object), np.array([s.index for s in sets]))

net = MultiBranchNet(DESK, seed=0)
res = train(net, data, TrainConfig(epochs=150, seed=0),
            log=lambda r: print(f"epoch {r['epoch']:3d}  total {r['loss_total']:.4f}  "
                                f"rul {r['loss_rul']:.5f}  acc {r['oc_acc']:.2f}")
            if r["epoch"] % 25 == 0 else None)

metrics, rows = evaluate(net, data)
for bid, m in metrics.items():
    print(f"{bid}: RMSE {m['RMSE']:.4f}  MAE {m['MAE']:.4f}  Acc {100 * m['Acc']:.0f}%")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "model.ckpt"
    save_checkpoint(path, net, res.optimizer, {"note": "demo"})
    clone = MultiBranchNet(DESK, seed=123)
    load_checkpoint(path, clone)
    clone.eval()
    same = np.array_equal(clone.predict(data.batch)[0], net.predict(data.batch)[0])
    print(f"\ncheckpoint {path.stat().st_size / 1e6:.1f} MB, reloaded predictions identical: {same}")
