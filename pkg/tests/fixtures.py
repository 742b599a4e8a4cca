"""Shared synthetic fixtures."""
import numpy as np

from bearing_rul.data import SynthConfig, synthesize_degradation
from bearing_rul.features import extract_all
from bearing_rul.model import Batch, LabeledData


def overfit_fixture():
    """8 labeled snapshots from three synthetic conditions (shaft 30/40/50 Hz).

    Each record has 20 snapshots with onset 5; labels are RUL = (19 - t) / 19.
    """
    sets, rul, oc, bearing = [], [], [], []
    for c in (1, 2, 3):
        rec, _ = synthesize_degradation(SynthConfig(
            n_snapshots=20, fault_onset=5, seed=c, shaft_hz=20 + 10 * c, condition_id=c,
            bearing_id=f"Synth{c}_1"))
        for t in ([0, 10, 19] if c < 3 else [5, 15]):
            sets.append(extract_all(rec.snapshots[t]))
            rul.append((19 - t) / 19)
            oc.append(c - 1)
            bearing.append(rec.bearing_id)
    n = len(sets)
    return LabeledData(Batch.from_feature_sets(sets), np.array(rul), np.ones(n, bool),
                       np.array(oc), np.array(bearing, dtype=object),
                       np.array([s.index for s in sets]))
