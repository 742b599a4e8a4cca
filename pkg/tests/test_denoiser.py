import numpy as np
import pytest

from bearing_rul.data import SampleBlock
from bearing_rul.denoiser import (AutoencoderConfig, LSTMAutoencoder, TrainParams, XJTU_CONFIG,
                                  denoise, encoder_loss, reconstruct, train_autoencoder)
from bearing_rul.errors import NumericalError
from bearing_rul.nn import Tensor

SMALL = AutoencoderConfig(enc_units=(16, 4), dec_units=(4, 16), window_len=32)


def sine_blocks(n, length=256, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(length)
    out = []
    for i in range(n):
        ph = rng.uniform(0, 2 * np.pi, 2)
        h = np.sin(2 * np.pi * t / 64 + ph[0]) + noise * rng.standard_normal(length)
        v = np.sin(2 * np.pi * t / 64 + ph[1]) + noise * rng.standard_normal(length)
        out.append(SampleBlock(h, v, i))
    return out


def test_config_mirror_and_defaults():
    assert XJTU_CONFIG.enc_units == (512, 64) and XJTU_CONFIG.window_len == 512
    with pytest.raises(ValueError):
        AutoencoderConfig(enc_units=(512, 64), dec_units=(512, 64))
    assert TrainParams() == TrainParams("rmsprop", 1e-3, 16, 300, 0)


def test_architecture_counts():
    net = LSTMAutoencoder(SMALL)
    assert len(net.encoder) == 2 and len(net.decoder) == 2 and len(net.drops) == 4
    out = net(Tensor(np.zeros((3, 8, 32))))
    assert out.shape == (3, 8, 32)


def test_encoder_loss_is_sum_of_squares():
    a, b = Tensor(np.array([1.0, 2.0])), Tensor(np.array([0.0, 4.0]))
    assert float(encoder_loss(a, b).data) == 5.0


def test_training_reduces_loss_and_is_deterministic():
    blocks = sine_blocks(4)
    p = TrainParams(epochs=50, batch_size=4, lr=3e-3)
    m1 = train_autoencoder(blocks, SMALL, p)
    m2 = train_autoencoder(blocks, SMALL, p)
    assert m1.history[-1] < m1.history[0]
    assert m1.history == m2.history


def test_denoise_shapes_and_zero_block():
    model = train_autoencoder(sine_blocks(2), SMALL, TrainParams(epochs=2))
    out = denoise(model, SampleBlock(np.zeros(256), np.zeros(256), 4))
    assert out.horizontal.shape == (256,) and out.index == 4
    assert np.all(np.isfinite(out.horizontal)) and np.isfinite(out.reconstruction_error)
    with pytest.raises(ValueError):
        denoise(model, SampleBlock(np.zeros(100), np.zeros(100), 0))


def test_reconstruct_restores_scale():
    model = train_autoencoder(sine_blocks(2), SMALL, TrainParams(epochs=1))
    x = np.random.default_rng(1).standard_normal((1, 64))
    base = reconstruct(model, x)
    # inputs are standardised per signal, so offset and gain pass straight through
    assert np.allclose(reconstruct(model, 3 * x + 5), 3 * base + 5, atol=1e-12)


def test_non_finite_loss_reports_diagnostics():
    with pytest.raises(NumericalError) as exc:
        with np.errstate(all="ignore"):
            train_autoencoder(sine_blocks(2), SMALL, TrainParams(epochs=5, lr=1e300))
    d = exc.value.diagnostics
    assert {"epoch", "batch", "grad_norms"} <= set(d)
