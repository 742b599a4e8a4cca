import csv
import json

import numpy as np
import pytest

from bearing_rul.cli import main
from bearing_rul.config import ConfigError
from bearing_rul.data import XJTU_BLOCK, VibrationRecord, write_xjtu
from bearing_rul.pipeline import load_run_config, read_manifest, run_stage

SMALL = ["synth_per_condition=1", "synth_snapshots=30", "epochs=2", "denoise_epochs=2",
         "denoise_max_blocks=8", "batch_size=8"]


def args_for(work, *extra):
    out = []
    for kv in [f"work_dir={work}", "seed=3", *SMALL, *extra]:
        out += ["--set", kv]
    return out


@pytest.fixture(scope="module")
def finished_run(tmp_path_factory):
    work = tmp_path_factory.mktemp("run")
    assert main(["all", "-q", *args_for(work)]) == 0
    return work


def test_full_synthetic_pipeline_emits_metrics(finished_run):
    with open(finished_run / "metrics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["Test bearing", "RMSE", "MAE", "Acc(%)"]
    assert rows[1][0] == "Synth3_1" and len(rows) == 2
    assert all(np.isfinite(float(v)) for v in rows[1][1:])
    for name in ("records/Synth1_1.brc", "denoiser.ckpt", "features/Synth2_1.csv",
                 "labels/Synth1_1.csv", "model.ckpt", "train_loss.csv", "predictions.csv"):
        assert (finished_run / name).exists(), name


def test_manifest_records_hashes_and_versions(finished_run):
    m = read_manifest(finished_run)
    assert set(m["stages"]) == {"ingest", "denoise-train", "extract", "label", "train", "evaluate"}
    tr = m["stages"]["train"]
    assert tr["seed"] == 3 and tr["config"]["epochs"] == 2
    assert {"version", "python", "numpy", "config_hash", "inputs", "outputs"} <= set(tr)
    assert "labels/Synth1_1.csv" in tr["inputs"] and len(tr["inputs"]["labels/Synth1_1.csv"]) == 64


def test_rerun_is_a_no_op(finished_run, capsys):
    before = (finished_run / "metrics.csv").stat().st_mtime_ns
    assert main(["all", *args_for(finished_run)]) == 0
    out = capsys.readouterr().out
    assert out.count("up to date") == 6
    assert (finished_run / "metrics.csv").stat().st_mtime_ns == before


def test_changed_key_reruns_only_downstream(finished_run, tmp_path):
    cfg = load_run_config(overrides=args_for(finished_run, "lam=0.5")[1::2])
    assert run_stage("label", cfg, log=lambda m: None) is False
    assert run_stage("train", cfg, log=lambda m: None) is True
    assert run_stage("evaluate", cfg, log=lambda m: None) is True


def test_predict_stage(finished_run):
    assert main(["predict", "-q", *args_for(finished_run)]) == 0
    with open(finished_run / "predict.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bearing_id", "t", "pred_rul", "pred_oc"] and len(rows) == 1 + 3 * 30
    assert all(0 < float(r[2]) < 1 for r in rows[1:])


def test_label_before_extract(tmp_path, capsys):
    assert main(["label", *args_for(tmp_path / "w")]) == 3
    assert "run extract first" in capsys.readouterr().err


def test_missing_seed_is_config_error(tmp_path, capsys):
    assert main(["ingest", "--set", f"work_dir={tmp_path}"]) == 2
    assert "seed" in capsys.readouterr().err


def test_bad_value_is_config_error(tmp_path):
    assert main(["ingest", *args_for(tmp_path, "lam=2")]) == 2
    assert main(["ingest", *args_for(tmp_path, "dataset=CWRU")]) == 2


def test_config_file_then_override(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# run\nseed = 5\nepochs = 7\nlr = 0.01\npreset = FULL\n")
    cfg = load_run_config(p, ["epochs=9"])
    assert (cfg.seed, cfg.epochs, cfg.lr, cfg.preset) == (5, 9, 0.01, "FULL")
    p.write_text("seed = 1\nepoch = 3\n")
    with pytest.raises(ConfigError):
        load_run_config(p)


def test_data_root_from_environment(tmp_path, monkeypatch):
    root = tmp_path / "xjtu"
    rng = np.random.default_rng(0)
    for bid, cond in (("Bearing1_1", 1), ("Bearing2_1", 2)):
        rec = VibrationRecord.from_array(bid, cond, rng.standard_normal((2, 2, XJTU_BLOCK)), 25600.0, 60.0)
        write_xjtu(rec, root / bid)
    monkeypatch.setenv("RUL_DATA_ROOT", str(root))
    work = tmp_path / "w"
    assert main(["ingest", "-q", *args_for(work, "dataset=XJTU")]) == 0
    assert sorted(p.name for p in (work / "records").iterdir()) == ["Bearing1_1.brc", "Bearing2_1.brc"]
    m = json.loads((work / "manifest.json").read_text())
    assert "<raw listing>" in m["stages"]["ingest"]["inputs"]
    monkeypatch.delenv("RUL_DATA_ROOT")
    assert main(["ingest", "-q", *args_for(tmp_path / "w2", "dataset=XJTU")]) == 2


def test_sweep_writes_one_row_per_bearing(finished_run):
    assert main(["sweep", "-q", *args_for(finished_run)]) == 0
    with open(finished_run / "sweep_metrics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == ["Synth1_1", "Synth2_1", "Synth3_1"]
