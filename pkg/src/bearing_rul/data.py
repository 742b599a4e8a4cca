"""Run-to-failure recordings: parsers, writers, a synthetic generator and splits.

Two public datasets are supported. XJTU-SY stores one CSV per minute with
32768 rows of (horizontal, vertical) acceleration, sometimes with a header
line. PRONOSTIA (FEMTO-ST) stores ``acc_NNNNN.csv`` files every 10 s with
2560 rows of (hour, minute, second, microsecond, horizontal, vertical).
Snapshots are indexed by ordinal ``t = 0, 1, ...``; seconds are only derived
for display via ``snapshot_period_s``.
"""
from __future__ import annotations

import enum
import io
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, coerce, read_kv

XJTU_BLOCK = 32768
XJTU_RATE_HZ = 25600.0
XJTU_PERIOD_S = 60.0
PRONOSTIA_BLOCK = 2560
PRONOSTIA_RATE_HZ = 25600.0
PRONOSTIA_PERIOD_S = 10.0


class DataFormatError(ValueError):
    """A file exists but does not have the expected layout."""


class ParseError(DataFormatError):
    """A row could not be read as numbers; carries file and line."""

    def __init__(self, path, line, detail):
        super().__init__(f"{path}:{line}: {detail}")
        self.path = str(path)
        self.line = line


@dataclass(frozen=True)
class SampleBlock:
    horizontal: np.ndarray
    vertical: np.ndarray
    index: int

    def __post_init__(self):
        h = np.asarray(self.horizontal, dtype=np.float64)
        v = np.asarray(self.vertical, dtype=np.float64)
        if h.ndim != 1 or h.shape != v.shape or h.size == 0:
            raise DataFormatError(f"block {self.index}: channels must be equal-length 1-D arrays")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(v))):
            raise DataFormatError(f"block {self.index}: non-finite samples")
        if self.index < 0:
            raise DataFormatError("block index must be non-negative")
        h.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "horizontal", h)
        object.__setattr__(self, "vertical", v)

    def __len__(self):
        return self.horizontal.size

    def as_array(self):
        """(2, n) array: row 0 horizontal, row 1 vertical."""
        return np.stack([self.horizontal, self.vertical])


@dataclass(frozen=True)
class VibrationRecord:
    bearing_id: str
    condition_id: int
    snapshots: tuple
    sample_rate_hz: float
    snapshot_period_s: float

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        object.__setattr__(self, "snapshots", snaps)
        if self.sample_rate_hz <= 0 or self.snapshot_period_s <= 0:
            raise DataFormatError("sample rate and snapshot period must be positive")
        if snaps:
            n = len(snaps[0])
            if any(len(s) != n for s in snaps):
                raise DataFormatError(f"{self.bearing_id}: snapshots differ in length")
            idx = [s.index for s in snaps]
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise DataFormatError(f"{self.bearing_id}: snapshot indices not strictly increasing")

    def __len__(self):
        return len(self.snapshots)

    @property
    def block_len(self):
        return len(self.snapshots[0]) if self.snapshots else 0

    @property
    def lifetime_s(self):
        return len(self.snapshots) * self.snapshot_period_s

    def as_array(self):
        """(n_snapshots, 2, block_len) array."""
        return np.stack([s.as_array() for s in self.snapshots])

    @classmethod
    def from_array(cls, bearing_id, condition_id, arr, sample_rate_hz, snapshot_period_s):
        blocks = tuple(SampleBlock(a[0], a[1], i) for i, a in enumerate(np.asarray(arr)))
        return cls(bearing_id, int(condition_id), blocks, sample_rate_hz, snapshot_period_s)


def condition_from_name(name):
    """``Bearing2_3`` -> 2."""
    m = re.search(r"(\d+)_(\d+)", name)
    if not m:
        raise DataFormatError(f"cannot read operating condition from bearing name {name!r}")
    return int(m.group(1))


def _file_index(path):
    nums = re.findall(r"\d+", path.stem)
    if not nums:
        raise DataFormatError(f"{path}: file name carries no snapshot index")
    return int(nums[-1])


def _locate_bad_row(path, text, ncols, skip, delimiter):
    for lineno, line in enumerate(text.splitlines(), 1):
        if lineno <= skip or not line.strip():
            continue
        parts = line.split(delimiter)
        if len(parts) != ncols:
            return ParseError(path, lineno, f"expected {ncols} columns, got {len(parts)}")
        try:
            [float(p) for p in parts]
        except ValueError:
            return ParseError(path, lineno, f"non-numeric value in {line.strip()!r}")
    return ParseError(path, 0, "unreadable file")


def _read_numeric_csv(path, ncols, nrows, allow_header):
    text = Path(path).read_text()
    first = text.split("\n", 1)[0]
    delimiter = ";" if ";" in first and "," not in first else ","
    skip = 0
    if allow_header:
        try:
            [float(p) for p in first.split(delimiter)]
        except ValueError:
            skip = 1
    try:
        arr = np.loadtxt(io.StringIO(text), delimiter=delimiter, skiprows=skip, ndmin=2)
    except ValueError:
        raise _locate_bad_row(path, text, ncols, skip, delimiter) from None
    if arr.shape[1] != ncols:
        raise DataFormatError(f"{path}: expected {ncols} columns, found {arr.shape[1]}")
    if arr.shape[0] != nrows:
        raise DataFormatError(f"{path}: expected {nrows} rows, found {arr.shape[0]}")
    return arr


def _snapshot_files(directory, pattern):
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    files = sorted(directory.glob(pattern), key=_file_index)
    if not files:
        raise DataFormatError(f"{directory}: no snapshot files")
    return files


def _parse_many(files, reader, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(reader, files))
    return [reader(f) for f in files]


def parse_xjtu(directory, workers=None):
    """Read an XJTU-SY bearing folder (``1.csv``, ``2.csv``, ...)."""
    directory = Path(directory)
    files = _snapshot_files(directory, "*.csv")
    arrays = _parse_many(files, lambda f: _read_numeric_csv(f, 2, XJTU_BLOCK, True), workers)
    blocks = tuple(SampleBlock(a[:, 0], a[:, 1], i) for i, a in enumerate(arrays))
    return VibrationRecord(directory.name, condition_from_name(directory.name), blocks,
                           XJTU_RATE_HZ, XJTU_PERIOD_S)


def parse_pronostia(directory, workers=None):
    """Read a PRONOSTIA bearing folder (``acc_00001.csv``, ...); temperature files are ignored."""
    directory = Path(directory)
    files = _snapshot_files(directory, "acc_*.csv")
    arrays = _parse_many(files, lambda f: _read_numeric_csv(f, 6, PRONOSTIA_BLOCK, False), workers)
    blocks = tuple(SampleBlock(a[:, 4], a[:, 5], i) for i, a in enumerate(arrays))
    return VibrationRecord(directory.name, condition_from_name(directory.name), blocks,
                           PRONOSTIA_RATE_HZ, PRONOSTIA_PERIOD_S)


def write_xjtu(record, directory, header=True):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for blk in record.snapshots:
        data = np.column_stack([blk.horizontal, blk.vertical])
        np.savetxt(directory / f"{blk.index + 1}.csv", data, fmt="%.17g", delimiter=",",
                   header="Horizontal_vibration_signals,Vertical_vibration_signals" if header else "",
                   comments="")


def write_pronostia(record, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    n = record.block_len
    for blk in record.snapshots:
        t0 = blk.index * record.snapshot_period_s
        t = t0 + np.arange(n) / record.sample_rate_hz
        hour = np.floor(t / 3600) % 24
        minute = np.floor(t / 60) % 60
        sec = np.floor(t) % 60
        usec = np.round((t - np.floor(t)) * 1e6)
        data = np.column_stack([hour, minute, sec, usec, blk.horizontal, blk.vertical])
        np.savetxt(directory / f"acc_{blk.index + 1:05d}.csv", data, fmt="%.17g", delimiter=",")


# ---------------------------------------------------------------------------
# synthetic run-to-failure generator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    n_snapshots: int = 100
    block_len: int = 2560
    noise_std: float = 0.1
    fault_onset: int = 50
    growth_rate: float = 0.5
    seed: int = 0
    sample_rate_hz: float = 25600.0
    shaft_hz: float = 30.0
    fault_hz: float = 160.0
    resonance_hz: float = 3000.0
    snapshot_period_s: float = 10.0
    condition_id: int = 1
    bearing_id: str = "Synth1_1"

    def __post_init__(self):
        if self.n_snapshots < 2 or self.block_len < 2:
            raise ConfigError("n_snapshots and block_len must be at least 2")
        if not 0 <= self.fault_onset < self.n_snapshots:
            raise ConfigError(f"fault_onset {self.fault_onset} must lie in [0, n_snapshots)")
        if self.noise_std < 0 or self.growth_rate < 0:
            raise ConfigError("noise_std and growth_rate must be non-negative")


_SYNTH_SCHEMA = {
    "n_snapshots": int, "block_len": int, "noise_std": float, "fault_onset": int,
    "growth_rate": float, "seed": int, "sample_rate_hz": float, "shaft_hz": float,
    "fault_hz": float, "resonance_hz": float, "snapshot_period_s": float,
    "condition_id": int, "bearing_id": str,
}


def load_synth_config(path):
    return SynthConfig(**coerce(read_kv(path), _SYNTH_SCHEMA, str(path)))


def _burst_train(cfg):
    """Unit-amplitude train of decaying resonance bursts at the fault rate."""
    n = cfg.block_len
    t = np.arange(n) / cfg.sample_rate_hz
    period = 1.0 / cfg.fault_hz
    decay = period / 4.0
    phase = np.mod(t, period)
    return np.exp(-phase / decay) * np.sin(2 * np.pi * cfg.resonance_hz * phase)


def synthesize_degradation(config, seed=None):
    """Generate a record and its true fault-onset ordinal.

    Each snapshot is a fixed shaft sinusoid plus white noise. From
    ``fault_onset`` on, a burst train is added whose amplitude grows
    linearly, ``growth_rate * (t - fault_onset + 1)``. Output depends only
    on ``(config, seed)``; ``seed`` defaults to ``config.seed``.
    """
    cfg = config
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    n = cfg.block_len
    t = np.arange(n) / cfg.sample_rate_hz
    base = np.sin(2 * np.pi * cfg.shaft_hz * t)
    bursts = _burst_train(cfg)
    blocks = []
    for k in range(cfg.n_snapshots):
        amp = cfg.growth_rate * (k - cfg.fault_onset + 1) if k >= cfg.fault_onset else 0.0
        chans = []
        for _ in range(2):
            noise = rng.standard_normal(n) * cfg.noise_std if cfg.noise_std > 0 else 0.0
            chans.append(base + amp * bursts + noise)
        blocks.append(SampleBlock(chans[0], chans[1], k))
    rec = VibrationRecord(cfg.bearing_id, cfg.condition_id, tuple(blocks),
                          cfg.sample_rate_hz, cfg.snapshot_period_s)
    return rec, cfg.fault_onset


# ---------------------------------------------------------------------------
# train/test splits
# ---------------------------------------------------------------------------

class SplitRule(str, enum.Enum):
    OC_INDEPENDENT = "OC_INDEPENDENT"
    OC_DEPENDENT = "OC_DEPENDENT"


@dataclass(frozen=True)
class SplitPlan:
    rule: SplitRule
    train_bearings: tuple = field(default_factory=tuple)
    test_bearings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.train_bearings or not self.test_bearings:
            raise ValueError("split needs non-empty train and test sets")
        if set(self.train_bearings) & set(self.test_bearings):
            raise ValueError("train and test bearings overlap")


def make_split(records, rule, held_out=None):
    """Leave-one-bearing-out (OC_INDEPENDENT) or 2-per-condition (OC_DEPENDENT).

    ``records`` may be VibrationRecords or ``(bearing_id, condition_id)``
    pairs. Under OC_DEPENDENT the two lexicographically first bearing ids of
    each condition train and the rest test.
    """
    rule = SplitRule(rule)
    pairs = [(r.bearing_id, r.condition_id) if isinstance(r, VibrationRecord) else tuple(r)
             for r in records]
    ids = [p[0] for p in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate bearing ids")
    if rule is SplitRule.OC_INDEPENDENT:
        if held_out is None:
            raise ValueError("OC_INDEPENDENT needs a held_out bearing")
        if held_out not in ids:
            raise KeyError(f"held_out bearing {held_out!r} not found")
        train = tuple(sorted(i for i in ids if i != held_out))
        return SplitPlan(rule, train, (held_out,))
    if held_out is not None:
        raise ValueError("OC_DEPENDENT takes no held_out bearing")
    by_cond = {}
    for bid, cond in pairs:
        by_cond.setdefault(cond, []).append(bid)
    train, test = [], []
    for cond in sorted(by_cond):
        group = sorted(by_cond[cond])
        if len(group) < 2:
            raise ValueError(f"condition {cond} has {len(group)} bearing(s); OC_DEPENDENT needs 2 to train")
        train += group[:2]
        test += group[2:]
    return SplitPlan(rule, tuple(train), tuple(test))
