"""Finite-difference gradient cases: five random shapes for every layer."""
import numpy as np

from bearing_rul import nn
from bearing_rul.model import loss_oc, loss_rul, one_hot
from bearing_rul.nn import Tensor
from bearing_rul.nn import functional as F
from bearing_rul.nn.gradcheck import check_gradients

N_SHAPES = 5


def _p(rng, *shape, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=True)


def _weighted(out, rng):
    """Scalar loss sum(out * R) with a fixed random R, so every output entry matters."""
    R = Tensor(rng.standard_normal(out.shape))
    return lambda o: (o * R).sum()


def _case(rng, build, tensors):
    probe = build()
    reduce = _weighted(probe, rng)
    return lambda: reduce(build()), tensors


def linear_case(rng, k):
    B, I, O = 2 + k, 3 + k, 2 + (k % 3)
    x, w, b = _p(rng, B, I), _p(rng, O, I), _p(rng, O)
    return _case(rng, lambda: F.linear(x, w, b), [x, w, b])


def conv1d_case(rng, k):
    B, C, L = 1 + k % 2, 1 + k % 3, 6 + k
    O, K = 2, 1 + 2 * (k % 2) + (k // 3)
    stride, pad = 1 + k % 2, k % 2
    x, w, b = _p(rng, B, C, L), _p(rng, O, C, K), _p(rng, O)
    return _case(rng, lambda: F.conv1d(x, w, b, stride, pad), [x, w, b])


def conv2d_case(rng, k):
    B, C, H, W = 1 + k % 2, 1 + k % 2, 5 + k, 4 + k
    O, K = 2, 1 + 2 * (k % 2) + (k // 4)
    stride, pad = 1 + (k // 2) % 2, k % 2
    x, w, b = _p(rng, B, C, H, W), _p(rng, O, C, K, K), _p(rng, O)
    return _case(rng, lambda: F.conv2d(x, w, b, stride, pad), [x, w, b])


def batchnorm_case(rng, k):
    shape = [(3, 2), (2, 3, 4), (4, 2, 3, 3), (2, 1, 5), (3, 4, 2, 2)][k]
    C = shape[1]
    x, g, b = _p(rng, *shape), _p(rng, C), _p(rng, C)
    rm, rv = np.zeros(C), np.ones(C)
    train = k != 3  # one eval-mode case
    return _case(rng, lambda: F.batch_norm(x, g, b, rm.copy(), rv.copy() + 0.5, train), [x, g, b])


def dropout_case(rng, k):
    x = _p(rng, 2 + k, 3)
    return _case(rng, lambda: F.dropout(x, 0.3, True, key=(k, 1, 2)), [x])


def _lstm_params(rng, I, H, scale=0.5):
    return F.LstmParams(*[_p(rng, H, H + I, scale=scale) for _ in range(4)],
                        *[_p(rng, H, scale=scale) for _ in range(4)])


def _params_list(p):
    return [p.W_i, p.W_f, p.W_c, p.W_o, p.b_i, p.b_f, p.b_v, p.b_o]


def lstm_cell_case(rng, k):
    B, I, H = 1 + k % 3, 2 + k, 1 + (k + 1) % 4
    p = _lstm_params(rng, I, H)
    x, h, c = _p(rng, B, I), _p(rng, B, H), _p(rng, B, H)

    def build():
        h1, c1 = F.lstm_cell(x, h, c, p)
        return nn.concat([h1, c1], axis=-1)
    return _case(rng, build, [x, h, c, *_params_list(p)])


def lstm_sequence_case(rng, k):
    B, T, I, H = 1 + k % 2, 2 + k, 2 + k % 3, 2 + k % 2
    p = _lstm_params(rng, I, H)
    x = _p(rng, B, T, I)
    return _case(rng, lambda: F.lstm_sequence(x, p, reverse=bool(k % 2)), [x, *_params_list(p)])


def bilstm_case(rng, k):
    B, T, I, H, O = 1 + k % 2, 1 + k, 2 + k % 2, 2 + k % 3, 2
    pf, pb = _lstm_params(rng, I, H), _lstm_params(rng, I, H)
    Wf, Wb, by = _p(rng, O, H), _p(rng, O, H), _p(rng, O)
    x = _p(rng, B, T, I)
    return _case(rng, lambda: F.bilstm(x, pf, pb, Wf, Wb, by),
                 [x, Wf, Wb, by, *_params_list(pf), *_params_list(pb)])


def attention_case(rng, k):
    heads = 1 + k % 3
    d = 2
    D = heads * d
    B, T = 1 + k % 2, 1 + k
    X = _p(rng, B, T, D)
    Wq, Wk, Wv, Wo = (_p(rng, D, D, scale=0.7) for _ in range(4))
    return _case(rng, lambda: F.multi_head_attention(X, Wq, Wk, Wv, Wo, heads), [X, Wq, Wk, Wv, Wo])


def avg_pool1d_case(rng, k):
    L, win = 5 + k, 2 + k % 3
    x = _p(rng, 2, 2, L)
    ceil = bool(k % 2)
    return _case(rng, lambda: F.avg_pool1d(x, win, ceil_mode=ceil), [x])


def avg_pool2d_case(rng, k):
    H, W, win = 4 + k, 5 + k, 2 + k % 2
    x = _p(rng, 1 + k % 2, 2, H, W)
    ceil = bool(k % 2)
    return _case(rng, lambda: F.avg_pool2d(x, win, ceil_mode=ceil), [x])


def gap_case(rng, k):
    shape = [(2, 3, 4), (1, 2, 3, 3), (3, 1, 5), (2, 2, 2, 4), (1, 4, 7)][k]
    x = _p(rng, *shape)
    return _case(rng, lambda: F.global_avg_pool(x), [x])


def activations_case(rng, k):
    x = _p(rng, 2 + k, 3)
    return _case(rng, lambda: nn.concat([x.relu(), x.sigmoid(), x.tanh(), x.softmax(axis=-1)], axis=1), [x])


def loss_rul_case(rng, k):
    n = 3 + k
    z = _p(rng, n)
    target = rng.uniform(0, 1, n)
    mask = np.ones(n, bool)
    mask[0] = k % 2 == 0
    return lambda: loss_rul(z.sigmoid(), target, mask), [z]


def loss_oc_case(rng, k):
    n, m = 2 + k, 2 + k % 3
    z = _p(rng, n, m)
    y = one_hot(rng.integers(0, m, n), m)
    return lambda: loss_oc(z.softmax(axis=-1), y), [z]


LAYERS = {
    "linear": linear_case,
    "conv1d": conv1d_case,
    "conv2d": conv2d_case,
    "batch_norm": batchnorm_case,
    "dropout": dropout_case,
    "lstm_cell": lstm_cell_case,
    "lstm_sequence": lstm_sequence_case,
    "bilstm": bilstm_case,
    "multi_head_attention": attention_case,
    "avg_pool1d": avg_pool1d_case,
    "avg_pool2d": avg_pool2d_case,
    "global_avg_pool": gap_case,
    "activations": activations_case,
    "loss_rul": loss_rul_case,
    "loss_oc": loss_oc_case,
}


def run_case(layer, k, seed=1234):
    rng = np.random.default_rng([seed, k, sorted(LAYERS).index(layer)])
    loss_fn, tensors = LAYERS[layer](rng, k)
    return check_gradients(loss_fn, tensors)


def run_suite():
    """{layer: [max relative error per shape]}."""
    return {name: [run_case(name, k) for k in range(N_SHAPES)] for name in LAYERS}
