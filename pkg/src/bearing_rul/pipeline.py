"""Stage runner behind the ``bearing-rul`` command.

A run lives in ``work_dir``::

    records/<bearing>.brc     ingest         raw two-channel snapshots
    denoiser.ckpt             denoise-train  autoencoder weights
    features/<bearing>.brc    extract        waveform, 2x14 features, scalograms
    features/<bearing>.csv    extract        the 2x14 vectors, for inspection
    labels/<bearing>.csv      label          t, rul, fpt_index, method
    model.ckpt                train          network + optimizer state
    train_loss.csv            train          per-epoch losses
    predictions.csv           evaluate       per-snapshot true/predicted RUL and OC
    metrics.csv               evaluate       per test bearing RMSE, MAE, Acc(%)
    manifest.json             every stage    config hash, input hashes, outputs

Every ``.brc``/``.ckpt`` file uses the container in :mod:`.checkpoint`.
A stage whose relevant config and input hashes match the manifest, and
whose outputs still exist, is skipped.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import atomic_write_bytes, load_arrays, load_checkpoint, save_arrays, save_checkpoint
from .config import ConfigError, coerce, parse_kv, read_kv, to_bool
from .data import (SplitRule, SynthConfig, VibrationRecord, make_split, parse_pronostia,
                   parse_xjtu, synthesize_degradation)
from .denoiser import AutoencoderConfig, LSTMAutoencoder, TrainParams, denoise, train_autoencoder
from .features import FEATURE_NAMES, CwtConfig, FeatureSet, extract_all
from .labeling import NoDegradationError, default_healthy_window, detect_fpt, label_hi_fpt, label_hi_pca
from .model import (PRESETS, Batch, LabeledData, MultiBranchNet, TrainConfig, evaluate,
                    predict_rows, train, write_metrics_csv, write_predictions_csv)

DATA_ROOT_ENV = "RUL_DATA_ROOT"
STAGES = ("ingest", "denoise-train", "extract", "label", "train", "evaluate", "predict")


class StageError(RuntimeError):
    """A prerequisite artifact is missing."""


def _opt_str(s):
    return None if s is None or str(s).strip().lower() in ("", "none") else str(s)


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a run. Defaults match the reference training setup."""

    seed: int
    work_dir: str = "run"
    dataset: str = "SYNTH"             # XJTU | PRONOSTIA | SYNTH
    data_root: str | None = None       # falls back to $RUL_DATA_ROOT
    bearings: str | None = None        # comma list; default: every bearing folder
    split_rule: str = "OC_INDEPENDENT"
    held_out: str | None = None
    hi_method: str = "FPT"             # FPT | PCA
    healthy_fraction: float = 0.1
    lam: float = 0.6
    optimizer: str = "rmsprop"
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 1000
    preset: str = "DESK"               # DESK | FULL
    denoise: bool = True
    denoise_epochs: int = 300
    denoise_max_blocks: int = 64
    cwt_omega0: float = 6.0
    cwt_min_scale: float = 2.0
    cwt_max_scale: float = 512.0
    cwt_n_scales: int = 64
    workers: int = 1
    synth_per_condition: int = 3
    synth_snapshots: int = 40
    synth_block_len: int = 2560
    synth_noise_std: float = 0.1

    def __post_init__(self):
        if self.dataset not in ("XJTU", "PRONOSTIA", "SYNTH"):
            raise ConfigError(f"dataset must be XJTU, PRONOSTIA or SYNTH, got {self.dataset!r}")
        if self.hi_method not in ("FPT", "PCA"):
            raise ConfigError(f"hi_method must be FPT or PCA, got {self.hi_method!r}")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if self.split_rule not in SplitRule.__members__:
            raise ConfigError(f"split_rule must be one of {list(SplitRule.__members__)}")
        if self.optimizer not in ("rmsprop", "adam"):
            raise ConfigError(f"optimizer must be rmsprop or adam, got {self.optimizer!r}")
        if not 0 <= self.lam <= 1:
            raise ConfigError("lam must lie in [0, 1]")
        if not 0 < self.healthy_fraction < 1:
            raise ConfigError("healthy_fraction must lie in (0, 1)")
        for name in ("lr",):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("batch_size", "epochs", "denoise_epochs", "denoise_max_blocks", "workers",
                     "synth_per_condition", "synth_snapshots", "synth_block_len", "cwt_n_scales"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def work(self):
        return Path(self.work_dir)

    def resolved_root(self):
        root = self.data_root or os.environ.get(DATA_ROOT_ENV)
        if root is None:
            raise ConfigError(f"data_root not set (config key or ${DATA_ROOT_ENV})")
        return Path(root)

    def cwt(self):
        return CwtConfig(omega0=self.cwt_omega0, min_scale=self.cwt_min_scale,
                         max_scale=self.cwt_max_scale, n_scales=self.cwt_n_scales)


_SCHEMA = {f.name: f.type for f in fields(RunConfig)}
_CONVERT = {"int": int, "float": float, "bool": to_bool, "str": str, "str | None": _opt_str}
SCHEMA = {k: _CONVERT[v] for k, v in _SCHEMA.items()}


def load_run_config(path=None, overrides=None):
    """File values, then ``overrides`` (already split ``key=value`` strings or a dict)."""
    values = {}
    if path is not None:
        values.update(coerce(read_kv(path), SCHEMA, str(path)))
    if overrides:
        if not isinstance(overrides, dict):
            overrides = parse_kv("\n".join(overrides), "command line")
        values.update(coerce(overrides, SCHEMA, "command line"))
    if "seed" not in values:
        raise ConfigError("seed is mandatory (set it in the config file or with --set seed=N)")
    return RunConfig(**values)


# ---------------------------------------------------------------------------
# hashing and manifest
# ---------------------------------------------------------------------------

# config keys each stage depends on (directly; upstream changes arrive via input hashes)
STAGE_KEYS = {
    "ingest": ("dataset", "data_root", "bearings", "seed", "synth_per_condition", "synth_snapshots",
               "synth_block_len", "synth_noise_std"),
    "denoise-train": ("denoise", "denoise_epochs", "denoise_max_blocks", "preset", "seed",
                      "split_rule", "held_out", "dataset"),
    "extract": ("denoise", "cwt_omega0", "cwt_min_scale", "cwt_max_scale", "cwt_n_scales"),
    "label": ("hi_method", "healthy_fraction"),
    "train": ("preset", "split_rule", "held_out", "lam", "optimizer", "lr", "batch_size", "epochs",
              "seed"),
    "evaluate": ("split_rule", "held_out"),
    "predict": (),
}


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(cfg, stage):
    d = asdict(cfg)
    if stage == "ingest" and cfg.dataset != "SYNTH":
        d["data_root"] = str(cfg.resolved_root())
    payload = json.dumps({k: d[k] for k in STAGE_KEYS[stage]}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _raw_listing_hash(root):
    """Hash of relative names and sizes under a raw data folder (contents are not read)."""
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(f"{p.relative_to(root)}\0{p.stat().st_size}\n".encode())
    return h.hexdigest()


def read_manifest(work):
    path = Path(work) / "manifest.json"
    if not path.exists():
        return {"stages": {}}
    return json.loads(path.read_text())


def _write_manifest(work, manifest):
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(Path(work) / "manifest.json", text.encode())


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode())


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# artifact readers
# ---------------------------------------------------------------------------

def _require(paths, stage):
    missing = [str(p) for p in paths if not Path(p).exists()]
    if missing or not paths:
        raise StageError(f"run {stage} first (missing: {', '.join(missing) or 'no artifacts'})")


def record_paths(work):
    return sorted((Path(work) / "records").glob("*.brc"))


def feature_paths(work):
    return sorted((Path(work) / "features").glob("*.brc"))


def label_paths(work):
    return sorted((Path(work) / "labels").glob("*.csv"))


def save_record(path, rec):
    save_arrays(path, {"snapshots": rec.as_array()},
                {"bearing_id": rec.bearing_id, "condition_id": rec.condition_id,
                 "sample_rate_hz": repr(rec.sample_rate_hz),
                 "snapshot_period_s": repr(rec.snapshot_period_s)})


def load_record(path):
    arrays, meta = load_arrays(path)
    return VibrationRecord.from_array(meta["bearing_id"], int(meta["condition_id"]),
                                      arrays["snapshots"], float(meta["sample_rate_hz"]),
                                      float(meta["snapshot_period_s"]))


def save_feature_sets(path, bearing_id, condition_id, sets):
    save_arrays(path, {
        "index": np.array([s.index for s in sets], dtype=float),
        "waveform": np.stack([s.waveform for s in sets]),
        "features": np.stack([s.features for s in sets]),
        "scalograms": np.stack([s.scalograms for s in sets]),
        "degenerate": np.stack([s.degenerate for s in sets]).astype(float),
    }, {"bearing_id": bearing_id, "condition_id": condition_id})


def load_feature_sets(path):
    """Returns (bearing_id, condition_id, [FeatureSet])."""
    a, meta = load_arrays(path)
    sets = [FeatureSet(a["waveform"][i], a["features"][i], a["scalograms"][i], int(a["index"][i]),
                       a["degenerate"][i].astype(bool)) for i in range(len(a["index"]))]
    return meta["bearing_id"], int(meta["condition_id"]), sets


def read_labels(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rul = np.array([float(r["rul"]) if r["rul"] else math.nan for r in rows])
    return np.array([int(r["t"]) for r in rows]), rul


def load_labeled(work, bearings=None):
    """Join feature files with label files into one LabeledData."""
    parts = []
    for fpath in feature_paths(work):
        bid, cond, sets = load_feature_sets(fpath)
        if bearings is not None and bid not in bearings:
            continue
        lpath = Path(work) / "labels" / f"{bid}.csv"
        _require([lpath], "label")
        t, rul = read_labels(lpath)
        if len(t) != len(sets):
            raise StageError(f"labels for {bid} are stale ({len(t)} rows, {len(sets)} snapshots); "
                             "run label again")
        n = len(sets)
        parts.append(LabeledData(Batch.from_feature_sets(sets), rul, ~np.isnan(rul),
                                 np.full(n, cond - 1), np.array([bid] * n, dtype=object), t))
    if not parts:
        raise StageError("run extract first (no feature files)")
    return LabeledData.concat(parts)


def plan_split(cfg, bearings_with_conditions):
    rule = SplitRule(cfg.split_rule)
    held = cfg.held_out
    if rule is SplitRule.OC_INDEPENDENT and held is None:
        held = sorted(b for b, _ in bearings_with_conditions)[-1]
    return make_split(bearings_with_conditions, rule, held if rule is SplitRule.OC_INDEPENDENT else None)


def _bearings_from_records(work):
    out = []
    for p in record_paths(work):
        _, meta = load_arrays(p)
        out.append((meta["bearing_id"], int(meta["condition_id"])))
    return out


def _bearings_from_features(work):
    out = []
    for p in feature_paths(work):
        _, meta = load_arrays(p)
        out.append((meta["bearing_id"], int(meta["condition_id"])))
    return out


def autoencoder_config(cfg, block_len):
    window = 512 if block_len % 512 == 0 and block_len >= 8192 else 256
    if block_len % window:
        raise ConfigError(f"block length {block_len} is not a multiple of {window}")
    units = (512, 64) if cfg.preset == "FULL" else (256, 64)
    return AutoencoderConfig(enc_units=units, dec_units=units[::-1], window_len=window)


# ---------------------------------------------------------------------------
# stages; each returns (input paths, output paths) for the manifest
# ---------------------------------------------------------------------------

def synth_records(cfg):
    """Three conditions (shaft 30/40/50 Hz) x ``synth_per_condition`` bearings."""
    rng = np.random.default_rng(cfg.seed)
    out = []
    n = cfg.synth_snapshots
    for cond in (1, 2, 3):
        for j in range(1, cfg.synth_per_condition + 1):
            onset = int(rng.integers(n // 3, max(n // 3 + 1, 2 * n // 3)))
            sc = SynthConfig(n_snapshots=n, block_len=cfg.synth_block_len,
                             noise_std=cfg.synth_noise_std, fault_onset=onset,
                             seed=int(rng.integers(2 ** 31)), shaft_hz=20.0 + 10.0 * cond,
                             condition_id=cond, bearing_id=f"Synth{cond}_{j}")
            out.append(synthesize_degradation(sc)[0])
    return out


def stage_ingest(cfg, log):
    work = cfg.work
    if cfg.dataset == "SYNTH":
        records, inputs = synth_records(cfg), []
    else:
        root = cfg.resolved_root()
        if not root.is_dir():
            raise FileNotFoundError(f"data root {root} is not a directory")
        wanted = None if cfg.bearings is None else {b.strip() for b in cfg.bearings.split(",")}
        dirs = sorted(d for d in root.iterdir() if d.is_dir() and d.name.startswith("Bearing")
                      and (wanted is None or d.name in wanted))
        if not dirs:
            raise FileNotFoundError(f"no Bearing* folders under {root}")
        parse = parse_xjtu if cfg.dataset == "XJTU" else parse_pronostia
        records = [parse(d, workers=cfg.workers) for d in dirs]
        inputs = []
    outs = []
    for rec in records:
        path = work / "records" / f"{rec.bearing_id}.brc"
        save_record(path, rec)
        outs.append(path)
        log(f"ingest: {rec.bearing_id} condition {rec.condition_id}, {len(rec)} snapshots")
    return inputs, outs


def stage_denoise_train(cfg, log):
    work = cfg.work
    paths = record_paths(work)
    _require(paths, "ingest")
    if not cfg.denoise:
        log("denoise-train: denoise = false, nothing to do")
        return paths, []
    split = plan_split(cfg, _bearings_from_records(work))
    rng = np.random.default_rng(cfg.seed)
    blocks = []
    for p in paths:
        rec = load_record(p)
        if rec.bearing_id in split.train_bearings:
            blocks.extend(rec.snapshots)
    if len(blocks) > cfg.denoise_max_blocks:
        pick = np.sort(rng.choice(len(blocks), cfg.denoise_max_blocks, replace=False))
        blocks = [blocks[i] for i in pick]
    ae_cfg = autoencoder_config(cfg, len(blocks[0].horizontal))
    params = TrainParams(epochs=cfg.denoise_epochs, seed=cfg.seed)
    model = train_autoencoder(blocks, ae_cfg, params,
                              log=lambda e, v: log(f"denoise-train: epoch {e + 1} mse {v:.6g}"))
    out = work / "denoiser.ckpt"
    save_checkpoint(out, model.net, meta={
        "enc_units": ",".join(map(str, ae_cfg.enc_units)), "window_len": ae_cfg.window_len})
    return paths, [out]


def _load_denoiser(path):
    arrays, meta = load_arrays(path)
    units = tuple(int(u) for u in meta["enc_units"].split(","))
    ae = AutoencoderConfig(enc_units=units, dec_units=units[::-1], window_len=int(meta["window_len"]))
    net = LSTMAutoencoder(ae)
    load_checkpoint(path, net)
    net.eval()
    return net


def stage_extract(cfg, log):
    work = cfg.work
    paths = record_paths(work)
    _require(paths, "ingest")
    inputs = list(paths)
    net = None
    if cfg.denoise:
        ck = work / "denoiser.ckpt"
        _require([ck], "denoise-train")
        inputs.append(ck)
        net = _load_denoiser(ck)
    cwt_cfg = cfg.cwt()
    outs = []
    names = [f"{ch}_{f}" for ch in ("h", "v") for f in FEATURE_NAMES]
    for p in paths:
        rec = load_record(p)
        cwt_cfg.validate_for(rec.block_len)
        blocks = [denoise(net, b) if net is not None else b for b in rec.snapshots]
        sets = [extract_all(b, cwt_cfg) for b in blocks]
        fpath = work / "features" / f"{rec.bearing_id}.brc"
        save_feature_sets(fpath, rec.bearing_id, rec.condition_id, sets)
        cpath = fpath.with_suffix(".csv")
        atomic_write_text(cpath, _csv_text(["t", *names],
                                           [[s.index, *map(repr, s.features.ravel().tolist())]
                                            for s in sets]))
        outs += [fpath, cpath]
        n_deg = int(sum(s.degenerate.any() for s in sets))
        log(f"extract: {rec.bearing_id} {len(sets)} snapshots"
            + (f", {n_deg} degenerate" if n_deg else ""))
    return inputs, outs


def label_bearing(sets, method, healthy_fraction=0.1):
    """RulLabel for one bearing's FeatureSets."""
    if method == "FPT":
        rms = np.array([s.features[0, 0] for s in sets])  # horizontal-channel RMS
        window = default_healthy_window(len(rms), healthy_fraction)
        fpt = detect_fpt(rms, window)
        return label_hi_fpt(fpt.fpt_index, len(sets) - 1)
    return label_hi_pca(np.stack([s.features.ravel() for s in sets]))


def stage_label(cfg, log):
    work = cfg.work
    paths = feature_paths(work)
    _require(paths, "extract")
    outs = []
    for p in paths:
        bid, _, sets = load_feature_sets(p)
        try:
            lab = label_bearing(sets, cfg.hi_method, cfg.healthy_fraction)
        except NoDegradationError as exc:
            raise NoDegradationError(f"{bid}: {exc}") from exc
        rows = [[s.index, "" if math.isnan(v) else repr(float(v)), lab.fpt_index, lab.method]
                for s, v in zip(sets, lab.values)]
        out = work / "labels" / f"{bid}.csv"
        atomic_write_text(out, _csv_text(["t", "rul", "fpt_index", "method"], rows))
        outs.append(out)
        log(f"label: {bid} method {lab.method} fpt {lab.fpt_index}"
            + (" (degenerate)" if lab.degenerate else ""))
    return paths, outs


def _model_meta(cfg, split):
    return {"preset": cfg.preset, "seed": cfg.seed, "train": ",".join(split.train_bearings),
            "test": ",".join(split.test_bearings)}


def stage_train(cfg, log):
    work = cfg.work
    fpaths = feature_paths(work)
    _require(fpaths, "extract")
    lpaths = label_paths(work)
    _require(lpaths, "label")
    split = plan_split(cfg, _bearings_from_features(work))
    data = load_labeled(work, set(split.train_bearings))
    model = MultiBranchNet(PRESETS[cfg.preset], seed=cfg.seed)
    tc = TrainConfig(optimizer=cfg.optimizer, lr=cfg.lr, batch_size=cfg.batch_size,
                     epochs=cfg.epochs, lam=cfg.lam, seed=cfg.seed)
    res = train(model, data, tc, log=lambda r: log(
        f"train: epoch {r['epoch']} loss {r['loss_total']:.6g} rul {r['loss_rul']:.6g} "
        f"oc {r['loss_oc']:.6g} acc {r['oc_acc']:.3f}"))
    out = work / "model.ckpt"
    save_checkpoint(out, model, res.optimizer, _model_meta(cfg, split))
    hist = work / "train_loss.csv"
    atomic_write_text(hist, _csv_text(
        ["epoch", "loss_total", "loss_rul", "loss_oc", "oc_acc"],
        [[r["epoch"], repr(float(r["loss_total"])), repr(float(r["loss_rul"])),
          repr(float(r["loss_oc"])), repr(float(r["oc_acc"]))] for r in res.history]))
    return fpaths + lpaths, [out, hist]


def load_model(path):
    _, meta = load_arrays(path)
    model = MultiBranchNet(PRESETS[meta["preset"]], seed=int(meta["seed"]))
    load_checkpoint(path, model)
    model.eval()
    return model, meta


def stage_evaluate(cfg, log):
    work = cfg.work
    ck = work / "model.ckpt"
    _require([ck], "train")
    fpaths, lpaths = feature_paths(work), label_paths(work)
    model, meta = load_model(ck)
    test = meta["test"].split(",")
    metrics, rows = evaluate(model, load_labeled(work, set(test)))
    pred, met = work / "predictions.csv", work / "metrics.csv"
    _write_via_temp(lambda p: write_predictions_csv(rows, p), pred)
    _write_via_temp(lambda p: write_metrics_csv(metrics, p), met)
    for bid, m in metrics.items():
        log(f"evaluate: {bid} RMSE {m['RMSE']:.4f} MAE {m['MAE']:.4f} Acc {100 * m['Acc']:.2f}%")
    return [ck, *fpaths, *lpaths], [pred, met]


def stage_predict(cfg, log):
    work = cfg.work
    ck = work / "model.ckpt"
    _require([ck], "train")
    fpaths = feature_paths(work)
    _require(fpaths, "extract")
    model, _ = load_model(ck)
    out_rows = []
    for p in fpaths:
        bid, cond, sets = load_feature_sets(p)
        n = len(sets)
        data = LabeledData(Batch.from_feature_sets(sets), np.full(n, math.nan), np.zeros(n, bool),
                           np.full(n, cond - 1), np.array([bid] * n, dtype=object),
                           np.array([s.index for s in sets]))
        out_rows += [[r.bearing_id, r.t, repr(r.pred_rul), r.pred_oc]
                     for r in predict_rows(model, data)]
    out = work / "predict.csv"
    atomic_write_text(out, _csv_text(["bearing_id", "t", "pred_rul", "pred_oc"], out_rows))
    log(f"predict: {len(out_rows)} snapshots -> {out}")
    return [ck, *fpaths], [out]


def _write_via_temp(writer, path):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    writer(tmp)
    os.replace(tmp, path)


STAGE_FUNCS = {
    "ingest": stage_ingest, "denoise-train": stage_denoise_train, "extract": stage_extract,
    "label": stage_label, "train": stage_train, "evaluate": stage_evaluate, "predict": stage_predict,
}


def run_stage(stage, cfg, log=print, force=False):
    """Run one stage unless the manifest shows it is up to date.

    Returns True when the stage ran, False when it was skipped.
    """
    if stage not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {stage!r}")
    work = cfg.work
    work.mkdir(parents=True, exist_ok=True)
    manifest = read_manifest(work)
    entry = manifest["stages"].get(stage)
    chash = config_hash(cfg, stage)
    if not force and entry and entry["config_hash"] == chash \
            and all(Path(work, o).exists() for o in entry["outputs"]) \
            and _inputs_unchanged(work, entry, cfg, stage):
        log(f"{stage}: up to date")
        return False
    inputs, outputs = STAGE_FUNCS[stage](cfg, log)
    in_hashes = {str(Path(p).relative_to(work)): file_hash(p) for p in inputs}
    if stage == "ingest" and cfg.dataset != "SYNTH":
        in_hashes["<raw listing>"] = _raw_listing_hash(cfg.resolved_root())
    manifest = read_manifest(work)
    manifest["stages"][stage] = {
        "config_hash": chash,
        "config": {k: getattr(cfg, k) for k in STAGE_KEYS[stage]},
        "seed": cfg.seed,
        "inputs": in_hashes,
        "outputs": [str(Path(p).relative_to(work)) for p in outputs],
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    _write_manifest(work, manifest)
    return True


def _current_inputs(work, stage, cfg):
    if stage == "ingest":
        return None
    if stage in ("denoise-train",):
        return record_paths(work)
    if stage == "extract":
        return record_paths(work) + ([work / "denoiser.ckpt"] if cfg.denoise else [])
    if stage == "label":
        return feature_paths(work)
    if stage == "train":
        return feature_paths(work) + label_paths(work)
    if stage == "evaluate":
        return [work / "model.ckpt", *feature_paths(work), *label_paths(work)]
    return [work / "model.ckpt", *feature_paths(work)]


def _inputs_unchanged(work, entry, cfg, stage):
    if stage == "ingest":
        if cfg.dataset == "SYNTH":
            return True
        return entry["inputs"].get("<raw listing>") == _raw_listing_hash(cfg.resolved_root())
    paths = _current_inputs(work, stage, cfg)
    if any(not Path(p).exists() for p in paths):
        return False
    now = {str(Path(p).relative_to(work)): file_hash(p) for p in paths}
    return now == entry["inputs"]


def run_pipeline(cfg, stages=("ingest", "denoise-train", "extract", "label", "train", "evaluate"),
                 log=print):
    return [run_stage(s, cfg, log) for s in stages]


def sweep(cfg, log=print):
    """Leave-one-bearing-out: train and evaluate once per held-out bearing.

    Shares ingest/denoise/extract/label artifacts from ``cfg.work_dir``;
    each fold trains in ``<work_dir>/sweep/<bearing>`` and the per-fold
    metrics rows are gathered into ``<work_dir>/sweep_metrics.csv``.
    """
    base = replace(cfg, split_rule="OC_INDEPENDENT")
    for s in ("ingest", "denoise-train", "extract", "label"):
        run_stage(s, base, log)
    bearings = sorted(b for b, _ in _bearings_from_features(base.work))
    rows = []
    for bid in bearings:
        fold_dir = base.work / "sweep" / bid
        _link_shared(base.work, fold_dir)
        fold = replace(base, work_dir=str(fold_dir), held_out=bid)
        run_stage("train", fold, log)
        run_stage("evaluate", fold, log)
        with open(fold_dir / "metrics.csv", newline="") as fh:
            rows += list(csv.reader(fh))[1:]
    out = base.work / "sweep_metrics.csv"
    atomic_write_text(out, _csv_text(["Test bearing", "RMSE", "MAE", "Acc(%)"], rows))
    log(f"sweep: {len(rows)} folds -> {out}")
    return out


def _link_shared(src, dst):
    """Expose shared feature and label folders inside a fold directory."""
    dst.mkdir(parents=True, exist_ok=True)
    for name in ("features", "labels"):
        link = dst / name
        if not link.exists():
            os.symlink(os.path.relpath(src / name, dst), link)
