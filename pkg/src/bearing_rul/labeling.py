"""Health-indicator labels: 3-sigma first prediction time, linear RUL, PCA distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NoDegradationError(RuntimeError):
    pass


@dataclass(frozen=True)
class FptResult:
    fpt_index: int
    mu: float
    sigma: float
    healthy_window: tuple  # (start, stop), half-open


@dataclass(frozen=True)
class RulLabel:
    """Per-snapshot targets over the whole record.

    ``mask`` marks snapshots that carry a RUL target (t >= fpt for HI-FPT,
    every snapshot for HI-PCA); unmasked entries hold NaN.
    """

    values: np.ndarray
    mask: np.ndarray
    fpt_index: int
    method: str
    degenerate: bool = False

    @property
    def t_N(self):
        return len(self.values) - 1

    def labeled(self):
        return self.values[self.mask]


def default_healthy_window(n, fraction=0.1, minimum=3):
    stop = max(minimum, int(round(n * fraction)))
    return (0, min(stop, n))


def detect_fpt(indicator, healthy_window=None):
    """First prediction time by the 3-sigma rule.

    mu and sigma (population form) come from ``indicator[start:stop]``.
    Scanning forward from ``stop``, the first pair of consecutive points
    both outside ``[mu - 3 sigma, mu + 3 sigma]`` gives the FPT as the
    second point of the pair.
    """
    x = np.asarray(indicator, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("indicator must be a 1-D series of length >= 2")
    if healthy_window is None:
        healthy_window = default_healthy_window(x.size)
    if isinstance(healthy_window, range):
        healthy_window = (healthy_window.start, healthy_window.stop)
    start, stop = (int(v) for v in healthy_window)
    if not 0 <= start < stop <= x.size:
        raise ValueError(f"healthy window {healthy_window} empty or outside the series")
    ref = x[start:stop]
    mu = float(ref.mean())
    sigma = float(np.sqrt(np.mean((ref - mu) ** 2)))
    outside = np.abs(x - mu) > 3.0 * sigma
    for t in range(max(stop, 1), x.size):
        if outside[t] and outside[t - 1] and t - 1 >= stop:
            return FptResult(t, mu, sigma, (start, stop))
    raise NoDegradationError("no degradation detected")


def label_hi_fpt(fpt_index, t_N):
    """RUL_t = (t_N - t) / (t_N - fpt) on [fpt, t_N]; NaN before the FPT."""
    fpt_index, t_N = int(fpt_index), int(t_N)
    if not 0 <= fpt_index < t_N:
        raise ValueError(f"need 0 <= fpt_index < t_N, got fpt={fpt_index}, t_N={t_N}")
    t = np.arange(t_N + 1, dtype=np.float64)
    vals = (t_N - t) / (t_N - fpt_index)
    mask = t >= fpt_index
    vals[~mask] = np.nan
    return RulLabel(vals, mask, fpt_index, "FPT")


def neighbor_distance(V):
    """Mean Euclidean distance of each row to its previous and next rows.

    Endpoints use their single neighbour.
    """
    V = np.asarray(V, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    if len(V) < 2:
        raise ValueError("need at least 2 points")
    step = np.linalg.norm(np.diff(V, axis=0), axis=1)  # step[t] = |V_{t+1} - V_t|
    out = np.empty(len(V))
    out[0] = step[0]
    out[-1] = step[-1]
    out[1:-1] = 0.5 * (step[1:] + step[:-1])
    return out


def pca_projection(features, k=2):
    """Scores on the top-k principal components of column-standardised features.

    Constant columns are dropped; ``k`` is capped by the remaining rank.
    Returns an empty (n, 0) array when every column is constant.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("feature matrix must be 2-D (snapshots x features)")
    sd = X.std(axis=0)
    keep = sd > 0
    Z = (X[:, keep] - X[:, keep].mean(axis=0)) / sd[keep]
    if Z.shape[1] == 0:
        return np.zeros((len(X), 0))
    _, s, vt = np.linalg.svd(Z, full_matrices=False)
    k = min(k, int(np.sum(s > s[0] * 1e-12)))
    return Z @ vt[:k].T


def label_hi_pca(feature_matrix, k=2):
    """Neighbour-distance health indicator on PCA scores, min-max scaled to [0, 1].

    An all-constant feature matrix gives all-zero labels with
    ``degenerate=True``.
    """
    X = np.asarray(feature_matrix, dtype=np.float64)
    if X.ndim != 2 or len(X) < 3:
        raise ValueError("HI-PCA needs a (snapshots x features) matrix with >= 3 rows")
    V = pca_projection(X, k)
    mask = np.ones(len(X), dtype=bool)
    if V.shape[1] == 0:
        return RulLabel(np.zeros(len(X)), mask, 0, "PCA", degenerate=True)
    raw = neighbor_distance(V)
    span = raw.max() - raw.min()
    if span <= 0:
        return RulLabel(np.zeros(len(X)), mask, 0, "PCA", degenerate=True)
    return RulLabel((raw - raw.min()) / span, mask, 0, "PCA")
