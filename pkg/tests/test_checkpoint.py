import struct

import numpy as np
import pytest

from bearing_rul import nn
from bearing_rul.checkpoint import (MAGIC, CheckpointError, decode, encode, load_arrays,
                                    load_checkpoint, save_arrays, save_checkpoint)
from bearing_rul.model import DESK, FULL, MultiBranchNet, tiny_config


def test_layout_is_documented_format():
    blob = encode({"w": np.array([[1.0, 2.0]])})
    assert blob[:8] == MAGIC
    version, count = struct.unpack_from("<II", blob, 8)
    assert (version, count) == (1, 1)
    assert struct.unpack_from("<I", blob, 16)[0] == 1 and blob[20:21] == b"w"
    assert struct.unpack_from("<I", blob, 21)[0] == 2
    assert struct.unpack_from("<2Q", blob, 25) == (1, 2)
    assert struct.unpack_from("<2d", blob, 41) == (1.0, 2.0)
    assert len(blob) == 41 + 16 + 32


def test_round_trip_bit_exact_with_optimizer(tmp_path):
    net = MultiBranchNet(tiny_config(), seed=4)
    opt = nn.make_optimizer("adam", list(net.named_parameters()), 1e-3)
    for p in net.parameters():
        p.grad = np.random.default_rng(0).standard_normal(p.shape)
    opt.step()
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, net, opt, {"preset": "tiny"})
    other = MultiBranchNet(tiny_config(), seed=99)
    opt2 = nn.make_optimizer("adam", list(other.named_parameters()), 1e-3)
    meta = load_checkpoint(path, other, opt2)
    assert meta == {"preset": "tiny"}
    for (k, a), (_, b) in zip(net.state_dict().items(), other.state_dict().items()):
        assert a.tobytes() == b.tobytes(), k
    for (k, a), (_, b) in zip(opt.state_dict().items(), opt2.state_dict().items()):
        assert np.asarray(a).tobytes() == np.asarray(b).tobytes(), k


def test_truncated_file_raises_checksum_error(tmp_path):
    net = MultiBranchNet(tiny_config(), seed=0)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, net)
    path.write_bytes(path.read_bytes()[:-100])
    target = MultiBranchNet(tiny_config(), seed=1)
    before = {k: v.copy() for k, v in target.state_dict().items()}
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(path, target)
    assert all(np.array_equal(before[k], v) for k, v in target.state_dict().items())


def test_unknown_version(tmp_path):
    import hashlib
    blob = bytearray(encode({"a": np.ones(2)}))
    struct.pack_into("<I", blob, 8, 7)
    body = bytes(blob[:-32])
    with pytest.raises(CheckpointError, match="version"):
        decode(body + hashlib.sha256(body).digest())


def test_desk_into_full_lists_mismatches(tmp_path):
    path = tmp_path / "desk.ckpt"
    save_checkpoint(path, MultiBranchNet(DESK, seed=0))
    with pytest.raises(CheckpointError, match="shape mismatch") as exc:
        load_checkpoint(path, MultiBranchNet(FULL, seed=0))
    assert "scalogram_branch.stem.weight" in str(exc.value)


def test_missing_parameter_name(tmp_path):
    small = nn.Linear(2, 2, np.random.default_rng(0), bias=False)
    path = tmp_path / "l.ckpt"
    save_checkpoint(path, small)
    with pytest.raises(CheckpointError, match="bias"):
        load_checkpoint(path, nn.Linear(2, 2, np.random.default_rng(0)))


def test_duplicate_names_rejected():
    with pytest.raises(CheckpointError):
        encode(_Dup())


class _Dup(dict):
    def __iter__(self):
        return iter(["a", "a"])

    def __getitem__(self, k):
        return np.ones(1)


def test_arrays_and_meta_round_trip(tmp_path):
    arrs = {"x": np.arange(6.0).reshape(2, 3), "s": np.array(3.5), "e": np.zeros((0, 4))}
    save_arrays(tmp_path / "a.brc", arrs, {"note": "ünïcode ok"})
    back, meta = load_arrays(tmp_path / "a.brc")
    assert meta == {"note": "ünïcode ok"}
    for k in arrs:
        assert back[k].shape == arrs[k].shape and np.array_equal(back[k], arrs[k])
