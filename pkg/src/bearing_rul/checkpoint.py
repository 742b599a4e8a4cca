"""Binary container for named float64 arrays (model checkpoints, feature files).

Layout, all integers little-endian::

    magic    8 bytes  b"BRULCKPT"
    version  u32      1
    count    u32
    count x entry:
        name_len u32, name (utf-8)
        ndim u32, dims u64 * ndim
        values float64 * prod(dims)
    sha256   32 bytes over every preceding byte

Text metadata rides along as entries named ``meta/<key>`` holding the
UTF-8 bytes as float64 values.
"""
from __future__ import annotations

import hashlib
import os
import struct
import tempfile
from collections import OrderedDict
from pathlib import Path

import numpy as np

MAGIC = b"BRULCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


def encode(arrays):
    names = list(arrays)
    if len(set(names)) != len(names):
        raise CheckpointError("duplicate entry names")
    parts = [MAGIC, struct.pack("<II", VERSION, len(names))]
    for name in names:
        arr = np.asarray(arrays[name], dtype="<f8", order="C")  # keeps 0-d shape
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + hashlib.sha256(body).digest()


def decode(blob):
    if len(blob) < len(MAGIC) + 8 + 32:
        raise CheckpointError("file too short (truncated?)")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError("checksum mismatch (file truncated or corrupted)")
    if body[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", body, 8)
    if version != VERSION:
        raise CheckpointError(f"unknown checkpoint version {version}")
    pos = 16
    out = OrderedDict()
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", body, pos)
        pos += 4
        name = body[pos:pos + nlen].decode("utf-8")
        pos += nlen
        (ndim,) = struct.unpack_from("<I", body, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", body, pos)
        pos += 8 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(body, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(shape)
        pos += 8 * n
        if name in out:
            raise CheckpointError(f"duplicate entry {name!r}")
        out[name] = arr
    if pos != len(body):
        raise CheckpointError("trailing bytes after last entry")
    return out


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_arrays(path, arrays, meta=None):
    arrays = OrderedDict(arrays)
    for key, text in (meta or {}).items():
        arrays[f"meta/{key}"] = np.frombuffer(str(text).encode("utf-8"), dtype=np.uint8).astype(float)
    atomic_write_bytes(path, encode(arrays))


def load_arrays(path):
    """Returns (arrays, meta) with ``meta/`` entries decoded back to strings."""
    entries = decode(Path(path).read_bytes())
    arrays, meta = OrderedDict(), {}
    for name, arr in entries.items():
        if name.startswith("meta/"):
            meta[name[5:]] = bytes(arr.astype(np.uint8)).decode("utf-8")
        else:
            arrays[name] = arr
    return arrays, meta


def save_checkpoint(path, model, optimizer=None, meta=None):
    arrays = OrderedDict((f"param/{k}", v) for k, v in model.state_dict().items())
    if optimizer is not None:
        arrays.update((f"optim/{k}", v) for k, v in optimizer.state_dict().items())
    save_arrays(path, arrays, meta)


def load_checkpoint(path, model, optimizer=None):
    """Load parameters (and optimizer state if given) into existing objects.

    Nothing is modified unless every name and shape matches.
    """
    arrays, meta = load_arrays(path)
    params = OrderedDict((k[6:], v) for k, v in arrays.items() if k.startswith("param/"))
    own = model.state_dict()
    missing = [k for k in own if k not in params]
    bad = [f"{k} (model {own[k].shape}, file {params[k].shape})"
           for k in own if k in params and own[k].shape != params[k].shape]
    problems = []
    if bad:
        problems.append("shape mismatch: " + "; ".join(bad))
    if missing:
        problems.append("missing parameters: " + ", ".join(missing))
    if problems:
        raise CheckpointError(" | ".join(problems))
    model.load_state_dict(params)
    if optimizer is not None:
        ostate = OrderedDict((k[6:], v) for k, v in arrays.items() if k.startswith("optim/"))
        optimizer.load_state_dict(ostate)
    return meta
