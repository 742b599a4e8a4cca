import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bearing_rul.config import ConfigError
from bearing_rul.data import (PRONOSTIA_BLOCK, XJTU_BLOCK, DataFormatError, ParseError, SampleBlock,
                              SplitRule, SynthConfig, VibrationRecord, condition_from_name,
                              load_synth_config, make_split, parse_pronostia, parse_xjtu,
                              synthesize_degradation, write_pronostia, write_xjtu)
from bearing_rul.features import time_features


def _fill_xjtu(d, n_files, rows=XJTU_BLOCK, header=False):
    d.mkdir(parents=True)
    line = "0.5,-0.25\n" * rows
    for i in range(1, n_files + 1):
        (d / f"{i}.csv").write_text(("Horizontal,Vertical\n" if header else "") + line)


def _fill_pronostia(d, n_files, row="9,0,0,0,0,0\n"):
    d.mkdir(parents=True)
    for i in range(1, n_files + 1):
        (d / f"acc_{i:05d}.csv").write_text(row * PRONOSTIA_BLOCK)


# ---------------------------------------------------------------------------
# parsers
# ---------------------------------------------------------------------------

def test_xjtu_bearing_lifetime(tmp_path):
    d = tmp_path / "Bearing1_1"
    _fill_xjtu(d, 123)
    rec = parse_xjtu(d, workers=4)
    assert len(rec) == 123 and rec.condition_id == 1 and rec.block_len == XJTU_BLOCK
    assert rec.lifetime_s == 2 * 3600 + 3 * 60
    assert [b.index for b in rec.snapshots] == list(range(123))


def test_xjtu_header_and_order(tmp_path):
    d = tmp_path / "Bearing2_3"
    d.mkdir()
    for i in (1, 2, 10):
        (d / f"{i}.csv").write_text("Horizontal,Vertical\n" + f"{i},0\n" * XJTU_BLOCK)
    rec = parse_xjtu(d)
    assert rec.condition_id == 2
    assert [b.horizontal[0] for b in rec.snapshots] == [1, 2, 10]


def test_xjtu_errors(tmp_path):
    empty = tmp_path / "Bearing1_2"
    empty.mkdir()
    with pytest.raises(DataFormatError, match="no snapshot files"):
        parse_xjtu(empty)
    long = tmp_path / "Bearing1_3"
    _fill_xjtu(long, 1, rows=XJTU_BLOCK + 1)
    with pytest.raises(DataFormatError, match="32768"):
        parse_xjtu(long)
    bad = tmp_path / "Bearing1_4"
    bad.mkdir()
    (bad / "1.csv").write_text("1,2\n" * 10 + "1,x\n" + "1,2\n" * (XJTU_BLOCK - 11))
    with pytest.raises(ParseError) as exc:
        parse_xjtu(bad)
    assert exc.value.line == 11 and exc.value.path.endswith("1.csv")


def test_pronostia_zero_file_and_missing_column(tmp_path):
    d = tmp_path / "Bearing1_3"
    _fill_pronostia(d, 1)
    rec = parse_pronostia(d)
    assert len(rec) == 1 and rec.sample_rate_hz == 25600
    assert not rec.snapshots[0].horizontal.any() and not rec.snapshots[0].vertical.any()
    short = tmp_path / "Bearing1_4"
    _fill_pronostia(short, 1, row="9,0,0,1,2\n")
    with pytest.raises(DataFormatError):
        parse_pronostia(short)


def test_pronostia_bearing1_3_lifetime(tmp_path):
    d = tmp_path / "Bearing1_3"
    _fill_pronostia(d, 1802)
    rec = parse_pronostia(d, workers=4)
    assert len(rec) == 1802 and rec.lifetime_s == 18020


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    rec = VibrationRecord.from_array("Bearing3_1", 3, rng.standard_normal((3, 2, XJTU_BLOCK)) * 7,
                                     25600.0, 60.0)
    write_xjtu(rec, tmp_path / "x" / "Bearing3_1")
    back = parse_xjtu(tmp_path / "x" / "Bearing3_1")
    assert np.array_equal(back.as_array(), rec.as_array())
    prec = VibrationRecord.from_array("Bearing2_1", 2, rng.standard_normal((3, 2, PRONOSTIA_BLOCK)),
                                      25600.0, 10.0)
    write_pronostia(prec, tmp_path / "p" / "Bearing2_1")
    pback = parse_pronostia(tmp_path / "p" / "Bearing2_1")
    assert np.array_equal(pback.as_array(), prec.as_array())


def test_condition_from_name():
    assert condition_from_name("Bearing3_5") == 3
    with pytest.raises(DataFormatError):
        condition_from_name("bearing")


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

def test_sample_block_validation():
    with pytest.raises(DataFormatError):
        SampleBlock(np.ones(3), np.ones(4), 0)
    with pytest.raises(DataFormatError):
        SampleBlock(np.array([1.0, np.nan]), np.ones(2), 0)
    b = SampleBlock([1, 2], [3, 4], 0)
    with pytest.raises(ValueError):
        b.horizontal[0] = 5  # read-only


def test_record_requires_increasing_indices():
    blocks = (SampleBlock([1.0], [1.0], 1), SampleBlock([1.0], [1.0], 1))
    with pytest.raises(DataFormatError):
        VibrationRecord("B1_1", 1, blocks, 1.0, 1.0)


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------

def test_synth_rms_jumps_after_onset():
    rec, onset = synthesize_degradation(SynthConfig(n_snapshots=100, fault_onset=50, seed=3))
    rms = np.array([time_features(b.horizontal)[0] for b in rec.snapshots])
    pre = rms[:onset]
    assert np.all(rms[onset:] > pre.max())
    assert rms[onset:].min() - pre.mean() >= 3 * pre.std()


def test_synth_noise_free_static():
    rec, _ = synthesize_degradation(SynthConfig(noise_std=0, growth_rate=0, n_snapshots=5, fault_onset=2))
    arr = rec.as_array()
    assert all(np.array_equal(arr[0], a) for a in arr)


def test_synth_deterministic():
    cfg = SynthConfig(n_snapshots=10, fault_onset=4, seed=11)
    a, b = synthesize_degradation(cfg)[0], synthesize_degradation(cfg)[0]
    assert np.array_equal(a.as_array(), b.as_array())
    c = synthesize_degradation(cfg, seed=12)[0]
    assert not np.array_equal(a.as_array(), c.as_array())


def test_synth_config_errors_and_file(tmp_path):
    with pytest.raises(ConfigError):
        SynthConfig(n_snapshots=10, fault_onset=10)
    p = tmp_path / "synth.cfg"
    p.write_text("# generator\nn_snapshots = 20\nblock_len = 512\nnoise_std = 0.2\n"
                 "fault_onset = 7\ngrowth_rate = 0.3\nseed = 5\n")
    cfg = load_synth_config(p)
    assert (cfg.n_snapshots, cfg.block_len, cfg.fault_onset, cfg.seed) == (20, 512, 7, 5)
    p.write_text("n_snapshot = 20\n")
    with pytest.raises(ConfigError, match="unknown key"):
        load_synth_config(p)


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

XJTU_IDS = [(f"Bearing{c}_{j}", c) for c in (1, 2, 3) for j in range(1, 6)]


def test_oc_independent_split():
    plan = make_split(XJTU_IDS, SplitRule.OC_INDEPENDENT, "Bearing1_1")
    assert len(plan.train_bearings) == 14 and plan.test_bearings == ("Bearing1_1",)
    with pytest.raises(KeyError):
        make_split(XJTU_IDS, "OC_INDEPENDENT", "Bearing9_9")


def test_oc_dependent_split():
    plan = make_split(XJTU_IDS, "OC_DEPENDENT")
    assert len(plan.train_bearings) == 6 and len(plan.test_bearings) == 9
    assert {"Bearing1_1", "Bearing1_2", "Bearing3_1", "Bearing3_2"} <= set(plan.train_bearings)
    with pytest.raises(ValueError):
        make_split([("Bearing1_1", 1)], "OC_DEPENDENT")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 3), st.integers(1, 9)), min_size=2, max_size=20, unique=True),
       st.data())
def test_split_disjoint(pairs, data):
    ids = [(f"Bearing{c}_{j}", c) for c, j in pairs]
    held = data.draw(st.sampled_from([i for i, _ in ids]))
    plan = make_split(ids, "OC_INDEPENDENT", held)
    assert not set(plan.train_bearings) & set(plan.test_bearings)
    assert set(plan.train_bearings) | set(plan.test_bearings) == {i for i, _ in ids}
