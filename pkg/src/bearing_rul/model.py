"""Three-branch network for joint RUL regression and operating-condition
classification, with its losses, training loop and metrics.

Branches
    * 1-D features (2 x 14): three conv1d stages over the two axes, 14 -> 28
      -> 56 -> 56 channels, giving a 2 x 56 map.
    * Scalograms (2 x S x T): 7x7/2 stem, 2x2 average pool, then four groups
      of convolutional building blocks (conv -> BN -> ReLU -> dropout), stride
      2 at the start of each group.
    * Denoised waveform (2 x L): the same groups with 1-D convolutions
      (stem k=15 stride 4) and a window-4 average pool after every block.

Every branch feeds a global-average-pool path (condition classifier) and an
attention Bi-LSTM head (RUL regressor).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import nn
from .errors import NumericalError
from .nn import Tensor, concat


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    widths: tuple = (64, 128, 256, 512)
    cbb_groups: tuple = (3, 3, 5, 2)
    feature_widths: tuple = (28, 56, 56)
    d_model: int = 512
    heads: int = 16
    head_dim: int = 32
    bilstm_hidden: int = 128
    n_classes: int = 3
    dropout: float = 0.2
    stem_pool: int = 2
    wave_pool: int = 4
    n_features: int = 14
    n_channels: int = 2

    def __post_init__(self):
        if len(self.widths) != len(self.cbb_groups):
            raise ValueError("widths and cbb_groups must have equal length")
        if self.heads * self.head_dim != self.d_model:
            raise ValueError(f"heads*head_dim ({self.heads}x{self.head_dim}) != d_model {self.d_model}")


FULL = ModelConfig()
# Halved channel widths, one block per group; heads stay at 16.
DESK = ModelConfig(widths=(32, 64, 128, 256), cbb_groups=(1, 1, 1, 1), d_model=256,
                   heads=16, head_dim=16, bilstm_hidden=64)
PRESETS = {"FULL": FULL, "DESK": DESK}


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.6

    def __post_init__(self):
        if not 0 <= self.lam <= 1:
            raise ValueError("lambda must lie in [0, 1]")


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

class CBB(nn.Module):
    """conv (k=3, pad 1, stride s) -> batch norm -> ReLU -> dropout."""

    def __init__(self, cin, cout, stride, rng, dims=2, dropout=0.2):
        super().__init__()
        conv = nn.Conv2d if dims == 2 else nn.Conv1d
        self.conv = conv(cin, cout, 3, rng, stride=stride, padding=1)
        self.bn = nn.BatchNorm(cout)
        self.drop = nn.Dropout(dropout)

    def forward(self, x):
        return self.drop(self.bn(self.conv(x)).relu())


class FeatureBranch(nn.Module):
    """(B, 2, 14) -> (B, 56, 2): the 14 features are channels, the axes the length."""

    def __init__(self, cfg, rng):
        super().__init__()
        widths = (cfg.n_features, *cfg.feature_widths)
        self.convs = [nn.Conv1d(a, b, 3, rng, padding=1) for a, b in zip(widths[:-1], widths[1:])]
        self.bns = [nn.BatchNorm(b) for b in widths[1:]]
        self.drops = [nn.Dropout(cfg.dropout) for _ in widths[1:]]
        self.out_channels = widths[-1]

    def forward(self, x):
        h = x.transpose(0, 2, 1)
        for conv, bn, drop in zip(self.convs, self.bns, self.drops):
            h = drop(bn(conv(h)).relu())
        return h


class ScalogramBranch(nn.Module):
    def __init__(self, cfg, rng):
        super().__init__()
        self.stem = nn.Conv2d(cfg.n_channels, cfg.widths[0], 7, rng, stride=2, padding=3)
        self.stem_bn = nn.BatchNorm(cfg.widths[0])
        self.stem_pool = cfg.stem_pool
        blocks, cin = [], cfg.widths[0]
        for width, count in zip(cfg.widths, cfg.cbb_groups):
            for j in range(count):
                blocks.append(CBB(cin, width, 2 if j == 0 else 1, rng, 2, cfg.dropout))
                cin = width
        self.blocks = blocks
        self.out_channels = cin

    def forward(self, x):
        h = self.stem_bn(self.stem(x)).relu()
        h = nn.avg_pool2d(h, self.stem_pool, ceil_mode=True)
        for blk in self.blocks:
            h = blk(h)
        return h


class WaveformBranch(nn.Module):
    def __init__(self, cfg, rng):
        super().__init__()
        self.stem = nn.Conv1d(cfg.n_channels, cfg.widths[0], 15, rng, stride=4, padding=7)
        self.stem_bn = nn.BatchNorm(cfg.widths[0])
        self.stem_pool = cfg.stem_pool
        self.pool = cfg.wave_pool
        blocks, cin = [], cfg.widths[0]
        for width, count in zip(cfg.widths, cfg.cbb_groups):
            for j in range(count):
                blocks.append(CBB(cin, width, 2 if j == 0 else 1, rng, 1, cfg.dropout))
                cin = width
        self.blocks = blocks
        self.out_channels = cin

    def forward(self, x):
        h = self.stem_bn(self.stem(x)).relu()
        h = nn.avg_pool1d(h, self.stem_pool, ceil_mode=True)
        for blk in self.blocks:
            h = nn.avg_pool1d(blk(h), self.pool, ceil_mode=True)
        return h


def to_sequence(h):
    """(B, C, *spatial) -> (B, prod(spatial), C)."""
    B, C = h.shape[:2]
    return h.reshape(B, C, -1).transpose(0, 2, 1)


class ABLSTMHead(nn.Module):
    """linear-dropout-ReLU x2, self-attention + dropout, Bi-LSTM-dropout-ReLU.

    Returns the Bi-LSTM output at the last step, (B, bilstm_hidden).
    """

    def __init__(self, in_features, cfg, rng):
        super().__init__()
        self.lin1 = nn.Linear(in_features, cfg.d_model, rng)
        self.lin2 = nn.Linear(cfg.d_model, cfg.d_model, rng)
        self.attn = nn.MultiHeadAttention(cfg.d_model, cfg.heads, rng, d_head=cfg.head_dim)
        self.bilstm = nn.BiLSTM(cfg.d_model, cfg.bilstm_hidden, cfg.bilstm_hidden, rng)
        self.drops = [nn.Dropout(cfg.dropout) for _ in range(4)]

    def forward(self, seq):
        d = self.drops
        h = d[0](self.lin1(seq)).relu()
        h = d[1](self.lin2(h)).relu()
        h = d[2](self.attn(h))
        h = d[3](self.bilstm(h)).relu()
        return h[:, -1, :]


@dataclass
class Batch:
    """Network inputs for B snapshots."""

    features: np.ndarray    # (B, 2, 14)
    scalograms: np.ndarray  # (B, 2, S, T)
    waveform: np.ndarray    # (B, 2, L)

    def __len__(self):
        return len(self.features)

    def take(self, idx):
        return Batch(self.features[idx], self.scalograms[idx], self.waveform[idx])

    @classmethod
    def from_feature_sets(cls, sets):
        sets = list(sets)
        return cls(np.stack([s.features for s in sets]),
                   np.stack([s.scalograms for s in sets]),
                   np.stack([s.waveform for s in sets]))


def _check_finite(t, where):
    if not np.all(np.isfinite(t.data)):
        raise NumericalError(f"non-finite activation in {where}", {"layer": where})
    return t


class MultiBranchNet(nn.Module):
    def __init__(self, cfg=DESK, seed=0):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.seed = seed
        self.feature_branch = FeatureBranch(cfg, rng)
        self.scalogram_branch = ScalogramBranch(cfg, rng)
        self.waveform_branch = WaveformBranch(cfg, rng)
        self.feature_head = ABLSTMHead(self.feature_branch.out_channels, cfg, rng)
        self.scalogram_head = ABLSTMHead(self.scalogram_branch.out_channels, cfg, rng)
        self.waveform_head = ABLSTMHead(self.waveform_branch.out_channels, cfg, rng)
        self.rul_out = nn.Linear(3 * cfg.bilstm_hidden, 1, rng)
        n_gap = (self.feature_branch.out_channels + self.scalogram_branch.out_channels
                 + self.waveform_branch.out_channels)
        self.oc_out = nn.Linear(n_gap, cfg.n_classes, rng)
        # input standardisation, fitted on training data
        self.register_buffer("feat_mean", np.zeros((cfg.n_channels, cfg.n_features)))
        self.register_buffer("feat_std", np.ones((cfg.n_channels, cfg.n_features)))
        self.register_buffer("scal_stats", np.array([0.0, 1.0]))
        self.register_buffer("wave_stats", np.array([0.0, 1.0]))
        nn.assign_dropout_keys(self, seed)

    def rul_parameters(self):
        """Parameters that only the RUL path reaches."""
        return [p for name, p in self.named_parameters()
                if name.split(".")[0] in ("feature_head", "scalogram_head", "waveform_head", "rul_out")]

    def fit_normalizer(self, batch):
        """Set input standardisation from a training batch."""
        f = np.asarray(batch.features)
        sd = f.std(axis=0)
        self._buffers["feat_mean"][...] = f.mean(axis=0)
        self._buffers["feat_std"][...] = np.where(sd > 0, sd, 1.0)
        for key, arr in (("scal_stats", batch.scalograms), ("wave_stats", batch.waveform)):
            s = float(np.std(arr))
            self._buffers[key][...] = [float(np.mean(arr)), s if s > 0 else 1.0]

    def _inputs(self, batch):
        b = self._buffers
        f = (np.asarray(batch.features) - b["feat_mean"]) / b["feat_std"]
        s = (np.asarray(batch.scalograms) - b["scal_stats"][0]) / b["scal_stats"][1]
        w = (np.asarray(batch.waveform) - b["wave_stats"][0]) / b["wave_stats"][1]
        return Tensor(f), Tensor(s), Tensor(w)

    def branch_outputs(self, batch):
        f, s, w = self._inputs(batch)
        return (_check_finite(self.feature_branch(f), "feature_branch"),
                _check_finite(self.scalogram_branch(s), "scalogram_branch"),
                _check_finite(self.waveform_branch(w), "waveform_branch"))

    def forward(self, batch):
        """Returns (rul (B,) in (0,1), oc_probs (B, n_classes))."""
        outs = self.branch_outputs(batch)
        heads = (self.feature_head, self.scalogram_head, self.waveform_head)
        names = ("feature_head", "scalogram_head", "waveform_head")
        reps = [_check_finite(h(to_sequence(o)), n) for h, o, n in zip(heads, outs, names)]
        rul = self.rul_out(concat(reps, axis=1)).sigmoid().reshape(-1)
        gap = concat([nn.global_avg_pool(o) for o in outs], axis=1)
        oc = self.oc_out(gap).softmax(axis=-1)
        return _check_finite(rul, "rul_out"), _check_finite(oc, "oc_out")

    def predict(self, batch, batch_size=64):
        was = self.training
        self.eval()
        try:
            rul, oc = [], []
            for i in range(0, len(batch), batch_size):
                r, o = self(batch.take(slice(i, i + batch_size)))
                rul.append(r.data)
                oc.append(o.data)
        finally:
            self.train(was)
        return np.concatenate(rul), np.concatenate(oc)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def loss_rul(pred, target, mask=None):
    """Mean squared logarithmic error over the masked (labeled) items."""
    target = np.asarray(target, dtype=np.float64)
    mask = np.ones(target.shape, bool) if mask is None else np.asarray(mask, bool)
    if not mask.any():
        raise ValueError("loss_rul: empty mask")
    idx = np.flatnonzero(mask)
    p = pred[idx] if isinstance(pred, Tensor) else Tensor(np.asarray(pred, float)[idx])
    diff = Tensor(np.log1p(target[idx])) - (p + 1.0).log()
    return (diff * diff).mean()


def one_hot(labels, n_classes):
    labels = np.asarray(labels, dtype=int)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= n_classes:
        raise ValueError(f"class labels outside [0, {n_classes})")
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


def loss_oc(probs, target_one_hot):
    """Categorical cross-entropy, mean over the batch; log clamped at 1e-12."""
    y = np.asarray(target_one_hot, dtype=np.float64)
    if y.ndim != 2 or not np.all((y == 0) | (y == 1)) or not np.all(y.sum(axis=1) == 1):
        raise ValueError("loss_oc: target must be one-hot rows")
    p = probs if isinstance(probs, Tensor) else Tensor(probs)
    return -(Tensor(y) * p.clamp_min(1e-12).log()).sum(axis=1).mean()


def loss_total(l_oc, l_rul, lam=0.6):
    if not 0 <= lam <= 1:
        raise ValueError("lambda must lie in [0, 1]")
    return l_oc * lam + l_rul * (1.0 - lam)


# ---------------------------------------------------------------------------
# labeled data
# ---------------------------------------------------------------------------

@dataclass
class LabeledData:
    """Snapshot-level training/evaluation table across bearings."""

    batch: Batch
    rul: np.ndarray        # (N,), NaN where unlabeled
    mask: np.ndarray       # (N,) bool
    oc: np.ndarray         # (N,) class index (condition_id - 1)
    bearing: np.ndarray    # (N,) bearing ids
    t: np.ndarray          # (N,) snapshot ordinal

    def __len__(self):
        return len(self.rul)

    def select(self, idx):
        return LabeledData(self.batch.take(idx), self.rul[idx], self.mask[idx], self.oc[idx],
                           self.bearing[idx], self.t[idx])

    def for_bearings(self, ids):
        return self.select(np.flatnonzero(np.isin(self.bearing, list(ids))))

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        return cls(Batch(np.concatenate([p.batch.features for p in parts]),
                         np.concatenate([p.batch.scalograms for p in parts]),
                         np.concatenate([p.batch.waveform for p in parts])),
                   np.concatenate([p.rul for p in parts]),
                   np.concatenate([p.mask for p in parts]),
                   np.concatenate([p.oc for p in parts]),
                   np.concatenate([p.bearing for p in parts]),
                   np.concatenate([p.t for p in parts]))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "rmsprop"
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 1000
    lam: float = 0.6
    seed: int = 0
    patience: int | None = None
    checkpoint_every: int | None = None


@dataclass
class TrainResult:
    model: MultiBranchNet
    history: list = field(default_factory=list)
    optimizer: object = None
    stopped_early: bool = False


def _batch_losses(model, data, idx, lam):
    rul, oc = model(data.batch.take(idx))
    l_oc = loss_oc(oc, one_hot(data.oc[idx], model.cfg.n_classes))
    mask = data.mask[idx]
    if mask.any():
        l_rul = loss_rul(rul, np.nan_to_num(data.rul[idx]), mask)
    else:
        l_rul = Tensor(0.0)
    correct = int(np.sum(oc.data.argmax(axis=1) == data.oc[idx]))
    return loss_total(l_oc, l_rul, lam), l_rul, l_oc, correct


def train(model, data, config=TrainConfig(), split=None, on_checkpoint=None, log=None):
    """Minimise lam*L_OC + (1-lam)*L_RUL with mini-batches in seeded order.

    History rows hold the epoch means of loss_total, loss_rul, loss_oc and
    the training OC accuracy. A non-finite loss raises NumericalError
    carrying the parameters from the end of the last finite epoch.
    """
    if split is not None:
        data = data.for_bearings(split.train_bearings)
    if len(data) == 0:
        raise ValueError("no training snapshots")
    if len(data) < 2:
        raise ValueError("batch norm needs at least 2 training snapshots")
    model.fit_normalizer(data.batch)
    model.train()
    opt = nn.make_optimizer(config.optimizer, list(model.named_parameters()), config.lr)
    rng = np.random.default_rng(config.seed)
    history, best, stale = [], math.inf, 0
    last_good = {k: v.copy() for k, v in model.state_dict().items()}
    n = len(data)
    result = TrainResult(model, history, opt)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        sums = np.zeros(3)
        correct = 0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:  # batch norm cannot train on a single item
                idx = order[max(0, start - 1):start + 1]
            opt.zero_grad()
            try:
                total, l_rul, l_oc, c = _batch_losses(model, data, idx, config.lam)
            except NumericalError as exc:
                exc.diagnostics.update(epoch=epoch, batch=bi)
                exc.last_good_state = last_good
                raise
            values = [float(total.data), float(l_rul.data), float(l_oc.data)]
            if not np.all(np.isfinite(values)):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {bi}",
                                     {"epoch": epoch, "batch": bi, "losses": values,
                                      "grad_norm": opt.grad_norm()}, last_good)
            total.backward()
            opt.step()
            sums += np.array(values) * len(idx)
            correct += c
        means = sums / n
        row = {"epoch": epoch + 1, "loss_total": means[0], "loss_rul": means[1],
               "loss_oc": means[2], "oc_acc": correct / n}
        history.append(row)
        last_good = {k: v.copy() for k, v in model.state_dict().items()}
        if log is not None:
            log(row)
        if on_checkpoint is not None and config.checkpoint_every and \
                (epoch + 1) % config.checkpoint_every == 0:
            on_checkpoint(epoch + 1, model, opt)
        if config.patience:
            if means[0] < best - 1e-12:
                best, stale = means[0], 0
            else:
                stale += 1
                if stale >= config.patience:
                    result.stopped_early = True
                    break
    model.eval()
    return result


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def rul_metrics(true, pred):
    """RMSE and MAE with the (t_N - FPT) denominator, i.e. n_labeled - 1."""
    true = np.asarray(true, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if true.size < 2:
        raise ValueError("need at least 2 labeled snapshots (t_N > FPT)")
    denom = true.size - 1
    err = true - pred
    return math.sqrt(float(np.sum(err * err)) / denom), float(np.sum(np.abs(err))) / denom


def accuracy(true, pred):
    true = np.asarray(true)
    return float(np.mean(true == np.asarray(pred))) if true.size else float("nan")


@dataclass(frozen=True)
class PredictionRow:
    bearing_id: str
    t: int
    true_rul: float
    pred_rul: float
    true_oc: int
    pred_oc: int


def predict_rows(model, data):
    rul, oc = model.predict(data.batch)
    pred_oc = oc.argmax(axis=1)
    return [PredictionRow(str(b), int(t), float(r), float(p), int(c) + 1, int(q) + 1)
            for b, t, r, p, c, q in zip(data.bearing, data.t, data.rul, rul, data.oc, pred_oc)]


def metrics_from_rows(rows):
    """Per-bearing {RMSE, MAE, Acc} from prediction rows (NaN true RUL = unlabeled)."""
    by = {}
    for r in rows:
        by.setdefault(r.bearing_id, []).append(r)
    out = {}
    for bid in sorted(by):
        rs = sorted(by[bid], key=lambda r: r.t)
        lab = [r for r in rs if not math.isnan(r.true_rul)]
        if not lab:
            raise ValueError(f"bearing {bid} has no labeled snapshots")
        rmse, mae = rul_metrics([r.true_rul for r in lab], [r.pred_rul for r in lab])
        acc = accuracy([r.true_oc for r in rs], [r.pred_oc for r in rs])
        out[bid] = {"RMSE": rmse, "MAE": mae, "Acc": acc}
    return out


def evaluate(model, data, bearings=None):
    if bearings is not None:
        data = data.for_bearings(bearings)
    rows = predict_rows(model, data)
    return metrics_from_rows(rows), rows


def write_predictions_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bearing_id", "t", "true_rul", "pred_rul", "true_oc", "pred_oc"])
        for r in rows:
            w.writerow([r.bearing_id, r.t, repr(r.true_rul), repr(r.pred_rul), r.true_oc, r.pred_oc])


def read_predictions_csv(path):
    with open(path, newline="") as fh:
        return [PredictionRow(d["bearing_id"], int(d["t"]), float(d["true_rul"]),
                              float(d["pred_rul"]), int(d["true_oc"]), int(d["pred_oc"]))
                for d in csv.DictReader(fh)]


def write_metrics_csv(metrics, path):
    """One row per test bearing: RMSE, MAE, Acc(%)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["Test bearing", "RMSE", "MAE", "Acc(%)"])
        for bid, m in metrics.items():
            w.writerow([bid, f"{m['RMSE']:.6f}", f"{m['MAE']:.6f}", f"{100 * m['Acc']:.2f}"])


def tiny_config(**overrides):
    """Small architecture for gradient checks and smoke runs."""
    base = ModelConfig(widths=(4, 8, 8, 8), cbb_groups=(1, 1, 1, 1), feature_widths=(6, 8, 8),
                       d_model=8, heads=2, head_dim=4, bilstm_hidden=4, dropout=0.0)
    return replace(base, **overrides)
