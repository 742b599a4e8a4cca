"""Independent reference implementations used by the tests.

Written from the formulas with plain loops and the ``math`` module, so
they share no code with the package.
"""
import cmath
import math

import numpy as np


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def brute_time_features(x):
    x = [float(v) for v in x]
    n = len(x)
    mean = sum(x) / n
    rms = math.sqrt(sum(v * v for v in x) / n)
    var = sum((v - mean) ** 2 for v in x) / n
    peak = max(abs(v) for v in x)
    mean_abs = sum(abs(v) for v in x) / n
    mean_sqrt = sum(math.sqrt(abs(v)) for v in x) / n
    kurt = sum((v - mean) ** 4 for v in x) / (n * var * var)
    skew = (sum((v - mean) ** 3 for v in x) / n) / var ** 1.5
    line = sum(abs(x[i + 1] - x[i]) for i in range(n - 1))
    return [
        rms, var, peak, peak / rms, kurt, peak / mean_sqrt ** 2, rms / mean_abs,
        line, max(x) - min(x), skew, peak / mean_abs,
    ]


def naive_dft(x):
    n = len(x)
    return [sum(x[t] * cmath.exp(-2j * math.pi * k * t / n) for t in range(n)) for k in range(n)]


def brute_freq_features(x):
    mags = [abs(c) for c in naive_dft(x)]
    energy = sum(m * m for m in mags)
    return [max(mags) - min(mags), energy, energy / len(x)]


def cwt_quadrature(x, a, b, omega0, beta):
    """CWT coefficient at (a, b) from the defining integral.

    Sums over every sample, with no kernel truncation.
    """
    c_psi = math.sqrt(math.pi / beta)
    acc = 0j
    for t, v in enumerate(x):
        u = (t - b) / a
        acc += v * math.exp(-beta * u * u / 2) * cmath.exp(1j * omega0 * u)
    return acc / math.sqrt(c_psi * a)


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------

def loop_conv1d(x, w, b, stride, padding):
    B, C, L = x.shape
    O, _, K = w.shape
    xp = np.zeros((B, C, L + 2 * padding))
    xp[:, :, padding:padding + L] = x
    Lo = (L + 2 * padding - K) // stride + 1
    out = np.zeros((B, O, Lo))
    for n in range(B):
        for o in range(O):
            for i in range(Lo):
                s = 0.0 if b is None else b[o]
                for c in range(C):
                    for k in range(K):
                        s += xp[n, c, i * stride + k] * w[o, c, k]
                out[n, o, i] = s
    return out


def loop_conv2d(x, w, b, stride, padding):
    B, C, H, W = x.shape
    O, _, KH, KW = w.shape
    xp = np.zeros((B, C, H + 2 * padding, W + 2 * padding))
    xp[:, :, padding:padding + H, padding:padding + W] = x
    Ho = (H + 2 * padding - KH) // stride + 1
    Wo = (W + 2 * padding - KW) // stride + 1
    out = np.zeros((B, O, Ho, Wo))
    for n in range(B):
        for o in range(O):
            for i in range(Ho):
                for j in range(Wo):
                    s = 0.0 if b is None else b[o]
                    for c in range(C):
                        for p in range(KH):
                            for q in range(KW):
                                s += xp[n, c, i * stride + p, j * stride + q] * w[o, c, p, q]
                    out[n, o, i, j] = s
    return out


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def scalar_lstm_cell(x, h, c, W_i, W_f, W_c, W_o, b_i, b_f, b_v, b_o):
    """One step with explicit sums over [h, x] for each hidden unit."""
    hx = list(h) + list(x)
    H = len(h)
    h_new, c_new = [], []
    for j in range(H):
        zi = sum(W_i[j][k] * hx[k] for k in range(len(hx))) + b_i[j]
        zf = sum(W_f[j][k] * hx[k] for k in range(len(hx))) + b_f[j]
        zc = sum(W_c[j][k] * hx[k] for k in range(len(hx))) + b_v[j]
        zo = sum(W_o[j][k] * hx[k] for k in range(len(hx))) + b_o[j]
        ct = _sig(zf) * c[j] + _sig(zi) * math.tanh(zc)
        c_new.append(ct)
        h_new.append(_sig(zo) * math.tanh(ct))
    return h_new, c_new


def stepwise_attention(X, W_q, W_k, W_v, W_o, heads):
    """Scaled dot-product attention computed one head and one row at a time."""
    T, D = X.shape
    dk = W_q.shape[1] // heads
    dv = W_v.shape[1] // heads
    concat = np.zeros((T, heads * dv))
    for hd in range(heads):
        q = X @ W_q[:, hd * dk:(hd + 1) * dk]
        k = X @ W_k[:, hd * dk:(hd + 1) * dk]
        v = X @ W_v[:, hd * dv:(hd + 1) * dv]
        for i in range(T):
            scores = [sum(q[i, m] * k[j, m] for m in range(dk)) / math.sqrt(dk) for j in range(T)]
            top = max(scores)
            e = [math.exp(s - top) for s in scores]
            z = sum(e)
            for m in range(dv):
                concat[i, hd * dv + m] = sum(e[j] / z * v[j, m] for j in range(T))
    return concat @ W_o


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def metrics_from_csv(path):
    """Per-bearing RMSE/MAE/Acc recomputed from a prediction dump."""
    import csv
    rows = {}
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            rows.setdefault(d["bearing_id"], []).append(d)
    out = {}
    for bid, rs in rows.items():
        lab = [(float(r["true_rul"]), float(r["pred_rul"])) for r in rs if r["true_rul"] != "nan"]
        denom = len(lab) - 1
        sq = sum((t - p) ** 2 for t, p in lab)
        ab = sum(abs(t - p) for t, p in lab)
        acc = sum(r["true_oc"] == r["pred_oc"] for r in rs) / len(rs)
        out[bid] = (math.sqrt(sq / denom), ab / denom, acc)
    return out
