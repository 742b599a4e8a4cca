"""LSTM autoencoder noise filter for vibration snapshots.

Each channel of a block is standardised, cut into ``block_len / window_len``
steps of ``window_len`` samples, encoded by two stacked LSTMs to the last
hidden state of the second one, repeated across the step count, decoded by
two mirrored LSTMs and mapped back to ``window_len`` samples per step by a
shared (time-distributed) linear layer. Both channels go through the same
model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import NumericalError
from .nn import Tensor


@dataclass(frozen=True)
class AutoencoderConfig:
    enc_units: tuple = (512, 64)
    dec_units: tuple = (64, 512)
    dropout_rate: float = 0.2
    window_len: int = 256
    out_units: int | None = None
    relu: bool = True

    def __post_init__(self):
        enc, dec = tuple(self.enc_units), tuple(self.dec_units)
        if enc != dec[::-1]:
            raise ValueError(f"decoder units {dec} must mirror encoder units {enc}")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.window_len < 1:
            raise ValueError("window_len must be positive")
        object.__setattr__(self, "enc_units", enc)
        object.__setattr__(self, "dec_units", dec)

    @property
    def latent_size(self):
        return self.enc_units[-1]

    @property
    def out_width(self):
        return self.window_len if self.out_units is None else self.out_units


# XJTU blocks (32768) use 512-sample windows; PRONOSTIA (2560) uses 256.
XJTU_CONFIG = AutoencoderConfig(window_len=512)
PRONOSTIA_CONFIG = AutoencoderConfig(window_len=256)


@dataclass(frozen=True)
class TrainParams:
    optimizer: str = "rmsprop"
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 300
    seed: int = 0


@dataclass(frozen=True)
class DenoisedBlock:
    horizontal: np.ndarray
    vertical: np.ndarray
    reconstruction_error: float
    index: int = 0


class LSTMAutoencoder(nn.Module):
    def __init__(self, config=AutoencoderConfig(), seed=0):
        super().__init__()
        if config.out_width != config.window_len:
            raise ValueError("out_units must equal window_len to rebuild the waveform")
        rng = np.random.default_rng(seed)
        self.config = config
        sizes = [config.window_len, *config.enc_units]
        self.encoder = [nn.LSTM(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:])]
        dsizes = [config.latent_size, *config.dec_units]
        self.decoder = [nn.LSTM(a, b, rng) for a, b in zip(dsizes[:-1], dsizes[1:])]
        self.drops = [nn.Dropout(config.dropout_rate) for _ in range(len(sizes) + len(dsizes) - 2)]
        self.head = nn.Linear(config.dec_units[-1], config.out_width, rng)
        nn.assign_dropout_keys(self, seed)

    def _stack(self, layers, drops, h):
        for layer, drop in zip(layers, drops):
            h = layer(h)
            if self.config.relu:
                h = h.relu()
            h = drop(h)
        return h

    def encode(self, x):
        """x: (B, T, window_len) -> latent (B, latent_size)."""
        n_enc = len(self.encoder)
        h = self._stack(self.encoder, self.drops[:n_enc], x)
        return h[:, -1, :]

    def forward(self, x):
        B, T, _ = x.shape
        z = self.encode(x)
        rep = z.reshape(B, 1, -1) * Tensor(np.ones((1, T, 1)))
        h = self._stack(self.decoder, self.drops[len(self.encoder):], rep)
        return self.head(h)


def _frame(signals, window_len):
    """(N, n) standardised signals -> (N, n / window_len, window_len) plus stats."""
    signals = np.asarray(signals, dtype=np.float64)
    n = signals.shape[-1]
    if n % window_len:
        raise ValueError(f"block length {n} is not a multiple of window_len {window_len}")
    mean = signals.mean(axis=-1, keepdims=True)
    std = signals.std(axis=-1, keepdims=True)
    std = np.where(std > 0, std, 1.0)
    z = (signals - mean) / std
    return z.reshape(len(signals), n // window_len, window_len), mean, std


def encoder_loss(reconstruction, target):
    """Sum of squared reconstruction errors (differentiable)."""
    diff = reconstruction - target
    return (diff * diff).sum()


def _channels(blocks):
    rows = []
    for b in blocks:
        rows.append(np.asarray(b.horizontal, float))
        rows.append(np.asarray(b.vertical, float))
    return np.stack(rows)


@dataclass
class AutoencoderModel:
    net: LSTMAutoencoder
    history: list = field(default_factory=list)

    @property
    def config(self):
        return self.net.config


def train_autoencoder(blocks, config=AutoencoderConfig(), params=TrainParams(), log=None):
    """Fit the autoencoder to reconstruct its (standardised) input.

    The per-batch objective is the mean squared error; ``history`` records
    the mean per-sample squared error of each epoch.
    """
    blocks = list(blocks)
    if not blocks:
        raise ValueError("train_autoencoder needs at least one block")
    frames, _, _ = _frame(_channels(blocks), config.window_len)
    net = LSTMAutoencoder(config, seed=params.seed)
    net.train()
    opt = nn.make_optimizer(params.optimizer, list(net.named_parameters()), params.lr)
    rng = np.random.default_rng(params.seed)
    history = []
    n = len(frames)
    for epoch in range(params.epochs):
        order = rng.permutation(n)
        total = 0.0
        for bi, start in enumerate(range(0, n, params.batch_size)):
            idx = order[start:start + params.batch_size]
            x = Tensor(frames[idx])
            opt.zero_grad()
            loss = encoder_loss(net(x), x) * (1.0 / x.size)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericalError(
                    f"non-finite autoencoder loss at epoch {epoch}, batch {bi}",
                    {"epoch": epoch, "batch": bi, "loss": value,
                     "grad_norms": {k: float(np.linalg.norm(p.grad))
                                    for k, p in net.named_parameters() if p.grad is not None}})
            loss.backward()
            opt.step()
            total += value * len(idx)
        history.append(total / n)
        if log is not None:
            log(epoch, history[-1])
    net.eval()
    return AutoencoderModel(net, history)


def reconstruct(model, signals):
    """Denoise a (N, n) array of single-channel signals in eval mode."""
    net = model.net if isinstance(model, AutoencoderModel) else model
    cfg = net.config
    frames, mean, std = _frame(signals, cfg.window_len)
    was_training = net.training
    net.eval()
    try:
        out = net(Tensor(frames)).data
    finally:
        net.train(was_training)
    return out.reshape(len(frames), -1) * std + mean


def denoise(model, block):
    """Pass both channels of ``block`` through the autoencoder."""
    net = model.net if isinstance(model, AutoencoderModel) else model
    src = np.stack([np.asarray(block.horizontal, float), np.asarray(block.vertical, float)])
    if src.shape[1] % net.config.window_len:
        raise ValueError(f"block length {src.shape[1]} incompatible with window_len "
                         f"{net.config.window_len}")
    out = reconstruct(net, src)
    err = float(np.mean((out - src) ** 2))
    return DenoisedBlock(out[0], out[1], err, int(getattr(block, "index", 0)))
