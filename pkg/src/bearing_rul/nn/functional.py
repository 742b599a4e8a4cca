"""Differentiable layer primitives built on :class:`Tensor`.

Convolutions are cross-correlations (no kernel flip), computed by unfolding
strided windows into a column matrix. Pooling is written as multiplication
by a fixed averaging matrix, which makes partial (ceil-mode) windows exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor, concat, stack


# ---------------------------------------------------------------------------
# activations
# ---------------------------------------------------------------------------

def relu(x):
    return as_tensor(x).relu()


def sigmoid(x):
    return as_tensor(x).sigmoid()


def tanh(x):
    return as_tensor(x).tanh()


def softmax(x, axis=-1):
    return as_tensor(x).softmax(axis)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` with ``weight`` shaped (out, in)."""
    out = x @ weight.transpose()
    return out + bias if bias is not None else out


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------

def _out_len(n, k, s, p):
    out = (n + 2 * p - k) // s + 1
    if s < 1 or k < 1 or out < 1 or n + 2 * p < k:
        raise ValueError(f"invalid conv geometry: n={n}, kernel={k}, stride={s}, padding={p}")
    return out


def conv1d(x, weight, bias=None, stride=1, padding=0):
    """x: (B, C, L), weight: (O, C, K) -> (B, O, L_out)."""
    x = as_tensor(x)
    B, C, L = x.shape
    O, Cw, K = weight.shape
    if Cw != C:
        raise ValueError(f"conv1d channel mismatch: input {C}, kernel {Cw}")
    s, p = stride, padding
    Lout = _out_len(L, K, s, p)
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p)))
    win = sliding_window_view(xp, K, axis=2)[:, :, ::s][:, :, :Lout]  # B,C,Lout,K
    cols = win.transpose(0, 2, 1, 3).reshape(B * Lout, C * K)
    w2 = weight.data.reshape(O, C * K)
    out = (cols @ w2.T).reshape(B, Lout, O).transpose(0, 2, 1)

    def bw(g):
        gcol = g.transpose(0, 2, 1).reshape(B * Lout, O)
        gw = (gcol.T @ cols).reshape(O, C, K)
        gcols = (gcol @ w2).reshape(B, Lout, C, K)
        gxp = np.zeros_like(xp)
        span = s * (Lout - 1) + 1
        for k in range(K):
            gxp[:, :, k:k + span:s] += gcols[:, :, :, k].transpose(0, 2, 1)
        gx = gxp[:, :, p:p + L]
        return gx, gw

    y = Tensor._make(np.ascontiguousarray(out), (x, weight), bw)
    if bias is not None:
        y = y + bias.reshape(1, O, 1)
    return y


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """x: (B, C, H, W), weight: (O, C, KH, KW) -> (B, O, H_out, W_out)."""
    x = as_tensor(x)
    B, C, H, W = x.shape
    O, Cw, KH, KW = weight.shape
    if Cw != C:
        raise ValueError(f"conv2d channel mismatch: input {C}, kernel {Cw}")
    s, p = stride, padding
    Ho = _out_len(H, KH, s, p)
    Wo = _out_len(W, KW, s, p)
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (KH, KW), axis=(2, 3))[:, :, ::s, ::s][:, :, :Ho, :Wo]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * KH * KW)
    w2 = weight.data.reshape(O, C * KH * KW)
    out = (cols @ w2.T).reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2)

    def bw(g):
        gcol = g.transpose(0, 2, 3, 1).reshape(B * Ho * Wo, O)
        gw = (gcol.T @ cols).reshape(O, C, KH, KW)
        gcols = (gcol @ w2).reshape(B, Ho, Wo, C, KH, KW)
        gxp = np.zeros_like(xp)
        sh = s * (Ho - 1) + 1
        sw = s * (Wo - 1) + 1
        for i in range(KH):
            for j in range(KW):
                gxp[:, :, i:i + sh:s, j:j + sw:s] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return gxp[:, :, p:p + H, p:p + W], gw

    y = Tensor._make(np.ascontiguousarray(out), (x, weight), bw)
    if bias is not None:
        y = y + bias.reshape(1, O, 1, 1)
    return y


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

@lru_cache(maxsize=256)
def pool_matrix(n, window, stride, ceil_mode=False):
    """Averaging matrix P of shape (n, n_out) so that ``x @ P`` pools the last axis.

    With ``ceil_mode`` a trailing partial window is kept and averaged over
    the samples it actually covers; an input shorter than the window gives a
    single output equal to its mean.
    """
    if window < 1 or stride < 1:
        raise ValueError("pool window and stride must be positive")
    if window > n and not ceil_mode:
        raise ValueError(f"pool window {window} larger than input length {n}")
    if ceil_mode:
        n_out = max(1, -(-(n - window) // stride) + 1) if n > window else 1
    else:
        n_out = (n - window) // stride + 1
    P = np.zeros((n, n_out))
    for j in range(n_out):
        lo = j * stride
        hi = min(lo + window, n)
        P[lo:hi, j] = 1.0 / (hi - lo)
    P.setflags(write=False)
    return P


def avg_pool1d(x, window, stride=None, ceil_mode=False):
    stride = window if stride is None else stride
    P = pool_matrix(x.shape[-1], window, stride, ceil_mode)
    return x @ Tensor(P)


def avg_pool2d(x, window, stride=None, ceil_mode=False):
    stride = window if stride is None else stride
    Ph = pool_matrix(x.shape[-2], window, stride, ceil_mode)
    Pw = pool_matrix(x.shape[-1], window, stride, ceil_mode)
    return Tensor(Ph.T) @ x @ Tensor(Pw)


def global_avg_pool(x):
    """Mean over every axis after the channel axis: (B, C, ...) -> (B, C)."""
    axes = tuple(range(2, x.ndim))
    return x.mean(axis=axes) if axes else x


# ---------------------------------------------------------------------------
# normalisation and regularisation
# ---------------------------------------------------------------------------

def batch_norm(x, gamma, beta, running_mean, running_var, training,
               momentum=0.9, eps=1e-5):
    """Per-channel batch normalisation over axis 1.

    In training mode the batch statistics are used and the running buffers
    (plain numpy arrays) are updated in place as
    ``running = momentum * running + (1 - momentum) * batch``; the running
    variance uses the unbiased batch estimate.
    """
    x = as_tensor(x)
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = [1] * x.ndim
    bshape[1] = x.shape[1]
    g_ = gamma.data.reshape(bshape)
    if training:
        if x.shape[0] < 2:
            raise ValueError("batch_norm in training mode needs a batch of at least 2")
        m = x.data.size // x.shape[1]
        mu = x.data.mean(axis=axes, keepdims=True)
        var = x.data.var(axis=axes, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv
        running_mean *= momentum
        running_mean += (1 - momentum) * mu.reshape(-1)
        running_var *= momentum
        running_var += (1 - momentum) * var.reshape(-1) * m / (m - 1)

        def bw(gr):
            dxhat = gr * g_
            dx = inv * (dxhat - dxhat.mean(axis=axes, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True))
            return dx, (gr * xhat).sum(axis=axes), gr.sum(axis=axes)
    else:
        inv = 1.0 / np.sqrt(running_var.reshape(bshape) + eps)
        xhat = (x.data - running_mean.reshape(bshape)) * inv

        def bw(gr):
            return gr * g_ * inv, (gr * xhat).sum(axis=axes), gr.sum(axis=axes)

    out = xhat * g_ + beta.data.reshape(bshape)
    return Tensor._make(out, (x, gamma, beta), bw)


def dropout_mask(shape, rate, key):
    """Keep-mask drawn from a counter-based Philox stream keyed by ``key``."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))
    return rng.random(shape) >= rate


def dropout(x, rate, training, key=(0,)):
    """Inverted dropout; identity in eval mode or when ``rate == 0``."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0:
        return x
    keep = dropout_mask(x.shape, rate, key) / (1.0 - rate)
    return x * Tensor(keep)


# ---------------------------------------------------------------------------
# recurrent layers
# ---------------------------------------------------------------------------

@dataclass
class LstmParams:
    """Gate weights act on the concatenation ``[h_prev, x_t]``."""

    W_i: Tensor
    W_f: Tensor
    W_c: Tensor
    W_o: Tensor
    b_i: Tensor
    b_f: Tensor
    b_v: Tensor
    b_o: Tensor

    @property
    def hidden_size(self):
        return self.W_i.shape[0]

    @property
    def input_size(self):
        return self.W_i.shape[1] - self.hidden_size

    def stacked(self):
        """(W, b) with gate blocks in the order i, f, c, o."""
        W = concat([self.W_i, self.W_f, self.W_c, self.W_o], axis=0)
        b = concat([self.b_i, self.b_f, self.b_v, self.b_o], axis=0)
        return W, b


def lstm_cell(x_t, h_prev, c_prev, params):
    """One LSTM step; returns ``(h_t, c_t)``."""
    H = params.hidden_size
    if h_prev.shape[-1] != H or x_t.shape[-1] != params.input_size:
        raise ValueError("lstm_cell: shapes inconsistent with params")
    W, b = params.stacked()
    z = concat([h_prev, x_t], axis=-1) @ W.transpose() + b
    i = z[..., 0:H].sigmoid()
    f = z[..., H:2 * H].sigmoid()
    c_tilde = z[..., 2 * H:3 * H].tanh()
    o = z[..., 3 * H:4 * H].sigmoid()
    c_t = f * c_prev + i * c_tilde
    h_t = o * c_t.tanh()
    return h_t, c_t


def lstm_sequence(x, params, reverse=False, h0=None, c0=None):
    """Run an LSTM over x: (B, T, I); returns the hidden states (B, T, H).

    The input projection for all steps is computed in one product; only the
    recurrent term is evaluated per step.
    """
    B, T, I = x.shape
    H = params.hidden_size
    if I != params.input_size:
        raise ValueError(f"lstm input size {I} != params input size {params.input_size}")
    W, b = params.stacked()
    Wh = W[:, :H].transpose()
    Wx = W[:, H:].transpose()
    xz = x @ Wx + b  # B,T,4H
    h = h0 if h0 is not None else Tensor(np.zeros((B, H)))
    c = c0 if c0 is not None else Tensor(np.zeros((B, H)))
    outs = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        z = xz[:, t, :] + h @ Wh
        i = z[:, 0:H].sigmoid()
        f = z[:, H:2 * H].sigmoid()
        g = z[:, 2 * H:3 * H].tanh()
        o = z[:, 3 * H:4 * H].sigmoid()
        c = f * c + i * g
        h = o * c.tanh()
        outs[t] = h
    return stack(outs, axis=1)


def bilstm(x, fwd_params, bwd_params, W_fy, W_by, b_y):
    """Bidirectional LSTM: y_t = W_fy h_fwd_t + W_by h_bwd_t + b_y.

    x: (B, T, I); W_fy: (out, H_f); W_by: (out, H_b). Returns (B, T, out).
    """
    if x.shape[1] < 1:
        raise ValueError("bilstm needs a sequence of length >= 1")
    hf = lstm_sequence(x, fwd_params)
    hb = lstm_sequence(x, bwd_params, reverse=True)
    return hf @ W_fy.transpose() + hb @ W_by.transpose() + b_y


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def multi_head_attention(X, W_q, W_k, W_v, W_o, heads, return_weights=False):
    """Scaled dot-product self-attention with ``heads`` parallel heads.

    X: (B, T, d_model); W_q, W_k: (d_model, heads * d_k); W_v: (d_model,
    heads * d_v); W_o: (heads * d_v, d_model). Head i uses columns
    ``i*d : (i+1)*d`` of each projection.
    """
    B, T, D = X.shape
    if heads < 1 or D % heads:
        raise ValueError(f"model dim {D} not divisible by head count {heads}")
    dk = W_q.shape[1] // heads
    dv = W_v.shape[1] // heads
    if W_k.shape[1] != heads * dk or W_o.shape[0] != heads * dv:
        raise ValueError("attention projection shapes disagree with head count")
    Q = (X @ W_q).reshape(B, T, heads, dk).transpose(0, 2, 1, 3)
    K = (X @ W_k).reshape(B, T, heads, dk).transpose(0, 2, 1, 3)
    V = (X @ W_v).reshape(B, T, heads, dv).transpose(0, 2, 1, 3)
    scores = (Q @ K.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(dk))
    A = scores.softmax(axis=-1)
    Hd = (A @ V).transpose(0, 2, 1, 3).reshape(B, T, heads * dv)
    out = Hd @ W_o
    return (out, A) if return_weights else out
