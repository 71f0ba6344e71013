"""Dataset files, experiment configs and result persistence.

Dataset file layout (all integers little-endian)::

    8 bytes   magic b"DRCDATA\\n"
    4 bytes   uint32 length L of the JSON header
    L bytes   UTF-8 JSON header
    ...       float64 ('<f8') blocks, row-major, in header order

Utterance datasets store one T x C block per record. Series datasets store
the K x C input block followed by the K-long target.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .errors import ConfigError, FormatError, ValidationError
from .masking import InputSequence, MaskDistribution
from .optimizer import (DEFAULT_BETA1_FACTORS, DEFAULT_BETA2_GRID, DEFAULT_D_GRID,
                        DEFAULT_LAMBDA_GRID, GridResult, Mode, SweepCurve, TaskPreset)
from .readout import Utterance, UtteranceDataset
from .reservoir import Nonlinearity
from .tasks import MackeyGlassParams, Narma10Params, SeriesTask, SplitSpec

MAGIC = b"DRCDATA\n"
DATASET_VERSION = 1
RESULT_FORMAT = "delayrc-result"
RESULT_VERSION = 1

# column order of sweep curve tables; append-only across versions
CURVE_COLUMNS = ("attenuation_db", "alpha", "alpha_interpolated", "metric",
                 "beta1", "bias_j0", "ridge_lambda", "beta2", "d")


# --- datasets --------------------------------------------------------------

def write_dataset(path, data: Union[SeriesTask, UtteranceDataset]) -> Path:
    path = Path(path)
    if isinstance(data, SeriesTask):
        header = {
            "format_version": DATASET_VERSION, "kind": "series", "name": data.name,
            "channels": data.input.channels, "length": data.input.timesteps,
            "split": dataclasses.asdict(data.split), "params": data.params,
        }
        blocks = [data.input.data, data.target]
    elif isinstance(data, UtteranceDataset):
        header = {
            "format_version": DATASET_VERSION, "kind": "utterances",
            "n_classes": data.n_classes, "channels": data.channels,
            "records": [{"id": u.id, "label": u.label, "T": u.length} for u in data.utterances],
        }
        blocks = [u.features for u in data.utterances]
    else:
        raise ValidationError(f"cannot serialise {type(data).__name__}")
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for block in blocks:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
    return path


def read_dataset(path) -> Union[SeriesTask, UtteranceDataset]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC) or len(raw) < len(MAGIC) + 4:
        raise FormatError(f"{path}: not a delayrc dataset file")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    start = len(MAGIC) + 4
    try:
        header = json.loads(raw[start:start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from None
    version = header.get("format_version")
    if version != DATASET_VERSION:
        raise FormatError(f"{path}: dataset format version {version!r}, expected {DATASET_VERSION}")
    payload = np.frombuffer(raw, dtype="<f8", offset=start + hlen) if len(raw) > start + hlen \
        else np.empty(0)
    if (len(raw) - start - hlen) % 8:
        raise FormatError(f"{path}: payload is not a whole number of float64 values")
    c = int(header["channels"])
    if header["kind"] == "series":
        k = int(header["length"])
        if payload.size != k * c + k:
            raise FormatError(f"{path}: header declares {k * c + k} values, found {payload.size}")
        inputs = payload[: k * c].reshape(k, c).astype(float)
        target = payload[k * c:].astype(float)
        return SeriesTask(InputSequence(inputs), target, SplitSpec(**header["split"]),
                          header.get("name", "series"), header.get("params", {}))
    if header["kind"] == "utterances":
        records = header["records"]
        expected = sum(int(r["T"]) * c for r in records)
        if payload.size != expected:
            raise FormatError(f"{path}: header declares {expected} values, found {payload.size}")
        utts, pos = [], 0
        for r in records:
            t = int(r["T"])
            utts.append(Utterance(r["id"], r["label"], payload[pos:pos + t * c].reshape(t, c).astype(float)))
            pos += t * c
        return UtteranceDataset(utts, header["n_classes"])
    raise FormatError(f"{path}: unknown dataset kind {header['kind']!r}")


def export_text(data: Union[SeriesTask, UtteranceDataset], path) -> Path:
    """Tab-separated dump for inspection (values printed with full precision)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        if isinstance(data, SeriesTask):
            w.writerow(["n"] + [f"u{c}" for c in range(data.input.channels)] + ["target"])
            for n in range(data.input.timesteps):
                w.writerow([n] + [repr(float(v)) for v in data.input.data[n]] + [repr(float(data.target[n]))])
        else:
            w.writerow(["id", "label", "t"] + [f"c{c}" for c in range(data.channels)])
            for u in data.utterances:
                for t, row in enumerate(u.features):
                    w.writerow([u.id, u.label, t] + [repr(float(v)) for v in row])
    return path


def import_feature_manifest(manifest, n_classes: Optional[int] = None) -> UtteranceDataset:
    """Build a dataset from user-supplied precomputed features.

    The manifest is a tab-separated file with columns ``id``, ``label``,
    ``path``; each path (relative to the manifest) is a ``.npy`` array or a
    comma/whitespace separated text matrix of shape T x C.
    """
    manifest = Path(manifest)
    utts = []
    with open(manifest) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError(f"{manifest}:{lineno}: expected id<TAB>label<TAB>path")
            uid, label, rel = parts
            if uid == "id" and label == "label":
                continue
            fpath = manifest.parent / rel
            if fpath.suffix == ".npy":
                feats = np.load(fpath)
            else:
                text = fpath.read_text()
                delim = "," if "," in text else None
                feats = np.loadtxt(fpath, delimiter=delim, ndmin=2)
            utts.append(Utterance(uid, int(label), feats))
    if not utts:
        raise FormatError(f"{manifest}: no records")
    if n_classes is None:
        n_classes = max(u.label for u in utts) + 1
    return UtteranceDataset(utts, n_classes)


# --- experiment config -----------------------------------------------------

TASKS = ("narma10", "mackey-glass", "dataset")


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one scan or sweep.

    Preset fields (``beta1`` ... ``n_nodes``) left as None fall back to the
    named preset. ``alpha`` bypasses the attenuation map when set.
    """

    task: str
    preset: Optional[str] = None
    task_params: dict = field(default_factory=dict)
    dataset_path: Optional[str] = None
    split: Optional[dict] = None
    protocol: dict = field(default_factory=lambda: {"kind": "kfold", "k": 10})
    beta1: Optional[float] = None
    bias_j0: Optional[float] = None
    attenuation_db: Optional[float] = None
    alpha: Optional[float] = None
    ridge_lambda: Optional[float] = None
    n_nodes: Optional[int] = None
    calibrate_input: Optional[list] = None
    beta2_grid: list = field(default_factory=lambda: list(DEFAULT_BETA2_GRID))
    d_grid: list = field(default_factory=lambda: list(DEFAULT_D_GRID))
    seeds: list = field(default_factory=lambda: [0])
    seed: int = 0
    modes: list = field(default_factory=lambda: [m.value for m in Mode])
    attenuation_grid_db: list = field(default_factory=lambda: [2.0, 15.0])
    beta1_factors: list = field(default_factory=lambda: list(DEFAULT_BETA1_FACTORS))
    lambda_grid: list = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    nonlinearity: str = Nonlinearity.SINE.value
    mask_distribution: str = MaskDistribution.UNIFORM01.value
    seeded_initial_state: bool = False
    output_dir: str = "results"
    parallelism: int = 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: dict, text: Optional[str] = None, path=None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object", 1, path)
        known = {f.name for f in dataclasses.fields(cls)}

        def fail(key, msg):
            raise ConfigError(msg, _locate(text, key), path)

        for key in raw:
            if key not in known:
                fail(key, f"unknown key {key!r}")
        if "task" not in raw:
            raise ConfigError("missing required key 'task'", None, path)
        cfg = cls(**raw)
        cfg._validate(fail)
        return cfg

    def _validate(self, fail):
        if self.task not in TASKS:
            fail("task", f"task must be one of {', '.join(TASKS)}; got {self.task!r}")
        if self.task == "dataset" and not self.dataset_path:
            fail("task", "task 'dataset' needs dataset_path")
        if self.task != "dataset" and self.preset is None:
            self.preset = self.task
        from .optimizer import PRESETS
        if self.preset is not None and self.preset not in PRESETS:
            fail("preset", f"unknown preset {self.preset!r}; known: {', '.join(PRESETS)}")
        if self.preset is None and None in (self.beta1, self.bias_j0, self.ridge_lambda, self.n_nodes):
            fail("preset", "without a preset, beta1, bias_j0, ridge_lambda and n_nodes are required")
        if self.preset is None and self.alpha is None and self.attenuation_db is None:
            fail("preset", "without a preset, set alpha or attenuation_db")
        if not isinstance(self.task_params, dict):
            fail("task_params", "task_params must be an object")
        param_cls = {"narma10": Narma10Params, "mackey-glass": MackeyGlassParams}.get(self.task)
        if param_cls is not None:
            allowed = {f.name for f in dataclasses.fields(param_cls)}
            for key in self.task_params:
                if key not in allowed:
                    fail(key, f"unknown {self.task} parameter {key!r}")
        elif self.task_params:
            fail("task_params", "task_params only apply to generated tasks")
        if self.split is not None:
            if not isinstance(self.split, dict):
                fail("split", "split must be an object")
            for key in self.split:
                if key not in {f.name for f in dataclasses.fields(SplitSpec)}:
                    fail(key, f"unknown split key {key!r}")
        if not isinstance(self.protocol, dict) or self.protocol.get("kind") not in ("kfold", "resplit"):
            fail("protocol", "protocol.kind must be 'kfold' or 'resplit'")
        allowed = {"kind", "k"} if self.protocol["kind"] == "kfold" else {"kind", "train_count", "repeats", "seed"}
        for key in self.protocol:
            if key not in allowed:
                fail(key, f"unknown {self.protocol['kind']} protocol key {key!r}")
        for name in ("beta1", "bias_j0", "attenuation_db", "alpha", "ridge_lambda"):
            v = getattr(self, name)
            if v is not None and not _is_number(v):
                fail(name, f"{name} must be a number")
        if self.n_nodes is not None and not (_is_int(self.n_nodes) and self.n_nodes >= 1):
            fail("n_nodes", "n_nodes must be a positive integer")
        if self.calibrate_input is not None and not (
                isinstance(self.calibrate_input, list) and len(self.calibrate_input) == 2
                and all(_is_number(v) for v in self.calibrate_input)
                and self.calibrate_input[0] < self.calibrate_input[1]):
            fail("calibrate_input", "calibrate_input must be [lo, hi] with lo < hi")
        for name in ("beta2_grid", "attenuation_grid_db", "beta1_factors", "lambda_grid"):
            v = getattr(self, name)
            if not isinstance(v, list) or not v or not all(_is_number(x) for x in v):
                fail(name, f"{name} must be a non-empty list of numbers")
        if 0 not in self.beta2_grid:
            fail("beta2_grid", "beta2_grid must contain 0 (no-delay baseline)")
        for name in ("d_grid", "seeds"):
            v = getattr(self, name)
            if not isinstance(v, list) or not v or not all(_is_int(x) and x >= 0 for x in v):
                fail(name, f"{name} must be a non-empty list of non-negative integers")
        if not _is_int(self.seed):
            fail("seed", "seed must be an integer")
        if not isinstance(self.modes, list) or not self.modes:
            fail("modes", "modes must be a non-empty list")
        for m in self.modes:
            if m not in {x.value for x in Mode}:
                fail("modes", f"unknown mode {m!r}; known: {', '.join(x.value for x in Mode)}")
        if self.nonlinearity not in {x.value for x in Nonlinearity}:
            fail("nonlinearity", f"unknown nonlinearity {self.nonlinearity!r}")
        if self.mask_distribution not in {x.value for x in MaskDistribution}:
            fail("mask_distribution", f"unknown mask distribution {self.mask_distribution!r}")
        if not isinstance(self.seeded_initial_state, bool):
            fail("seeded_initial_state", "seeded_initial_state must be true or false")
        if not (_is_int(self.parallelism) and self.parallelism >= 1):
            fail("parallelism", "parallelism must be a positive integer")


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _locate(text: Optional[str], key: str) -> Optional[int]:
    if not text:
        return None
    pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for lineno, line in enumerate(text.splitlines(), 1):
        if pattern.search(line):
            return lineno
    return None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, path) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno, path) from None
    return ExperimentConfig.from_dict(raw, text, path)


def save_config(cfg: ExperimentConfig, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    return path


# --- results ---------------------------------------------------------------

def _clean(value):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return _clean(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, Mode):
        return value.value
    return value


def _dump(obj: dict, path: Path) -> None:
    path.write_text(json.dumps(_clean(obj), indent=1) + "\n")


def preset_dict(preset: TaskPreset) -> dict:
    return dataclasses.asdict(preset)


def scan_payload(result: GridResult, cfg: ExperimentConfig, task_name: str) -> dict:
    best = result.best_cell
    return {
        "format": RESULT_FORMAT, "version": RESULT_VERSION, "kind": "scan",
        "task": task_name, "mode": Mode.DELAYED_INPUT.value, "metric": result.metric,
        "alpha": result.alpha, "preset": preset_dict(result.preset),
        "beta2_values": result.beta2_values, "d_values": result.d_values,
        "surface": result.surface, "per_seed_surfaces": result.per_seed,
        "mask_seeds": list(result.mask_seeds), "cell_seeds": result.cell_seeds,
        "baseline_metric": result.baseline(),
        "best_cell": {"beta2": best.beta2, "d": best.d, "metric": best.metric},
        "config": cfg.to_dict(),
    }


def write_heatmap(result: GridResult, path) -> Path:
    """Plot-ready table: one row per d, one column per beta2."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["d\\beta2"] + [repr(float(b)) for b in result.beta2_values])
        for j, d in enumerate(result.d_values):
            w.writerow([int(d)] + [repr(float(v)) for v in result.surface[:, j]])
    return path


def write_scan(result: GridResult, cfg: ExperimentConfig, task_name: str, out_dir,
               timing: Optional[dict] = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"result": out / "scan.json", "heatmap": out / "scan_heatmap.tsv",
             "timing": out / "scan.timing.json"}
    _dump(scan_payload(result, cfg, task_name), paths["result"])
    write_heatmap(result, paths["heatmap"])
    sidecar = dict(timing or {})
    if result.timings is not None:
        sidecar["cell_seconds"] = result.timings
    _dump(sidecar, paths["timing"])
    return paths


def sweep_payload(curves: list, cfg: ExperimentConfig, task_name: str, preset: TaskPreset) -> dict:
    return {
        "format": RESULT_FORMAT, "version": RESULT_VERSION, "kind": "sweep",
        "task": task_name, "metric": curves[0].metric if curves else None,
        "preset": preset_dict(preset),
        "curves": [{
            "mode": c.mode.value,
            "points": [dataclasses.asdict(p) for p in c.points],
        } for c in curves],
        "config": cfg.to_dict(),
    }


def write_curve(curve: SweepCurve, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(CURVE_COLUMNS)
        for p in curve.points:
            row = {"attenuation_db": p.attenuation_db, "alpha": p.alpha,
                   "alpha_interpolated": int(p.interpolated), "metric": p.metric, **p.params}
            w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CURVE_COLUMNS])
    return path


def write_sweep(curves: list, cfg: ExperimentConfig, task_name: str, preset: TaskPreset, out_dir,
                timing: Optional[dict] = None) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"result": out / "sweep.json", "timing": out / "sweep.timing.json"}
    _dump(sweep_payload(curves, cfg, task_name, preset), paths["result"])
    for c in curves:
        paths[f"curve_{c.mode.value}"] = write_curve(c, out / f"sweep_{c.mode.value}.tsv")
    _dump(dict(timing or {}), paths["timing"])
    return paths


def load_result(path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable result file ({exc})") from None
    if payload.get("format") != RESULT_FORMAT:
        raise FormatError(f"{path}: not a delayrc result file")
    if payload.get("version") != RESULT_VERSION:
        raise FormatError(f"{path}: result version {payload.get('version')!r}, expected {RESULT_VERSION}")
    timing = path.with_name(path.stem + ".timing.json")
    if timing.exists():
        payload["_timing"] = json.loads(timing.read_text())
    payload["_path"] = str(path)
    return payload


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def summary_rows(payloads: list) -> list[dict]:
    """One row per (result, mode, attenuation point), grouped by task."""
    if not payloads:
        raise ValidationError("no result files given")
    rows = []
    for p in payloads:
        runtime = (p.get("_timing") or {}).get("wall_seconds")
        if p["kind"] == "scan":
            b = p["best_cell"]
            rows.append({"task": p["task"], "mode": p["mode"], "attenuation": _alpha_label(p),
                         "metric": p["metric"], "best": b["metric"],
                         "params": f"beta2={_fmt(b['beta2'])} d={b['d']}", "runtime": runtime})
        elif p["kind"] == "sweep":
            for c in p["curves"]:
                for pt in c["points"]:
                    prm = pt["params"]
                    params = (f"beta2={_fmt(prm['beta2'])} d={prm['d']}" if c["mode"] == Mode.DELAYED_INPUT.value
                              else f"beta1={_fmt(prm['beta1'])} lambda={_fmt(prm['ridge_lambda'])}")
                    rows.append({"task": p["task"], "mode": c["mode"],
                                 "attenuation": f"{_fmt(pt['attenuation_db'])} dB",
                                 "metric": p["metric"], "best": pt["metric"], "params": params,
                                 "runtime": runtime})
        else:
            raise FormatError(f"{p.get('_path')}: unknown result kind {p['kind']!r}")
    order = {t: i for i, t in enumerate(dict.fromkeys(r["task"] for r in rows))}
    return sorted(rows, key=lambda r: order[r["task"]])


def _alpha_label(p: dict) -> str:
    att = p.get("config", {}).get("attenuation_db")
    if p.get("config", {}).get("alpha") is not None:
        return f"alpha={_fmt(p['alpha'])}"
    if att is None:
        att = p["preset"]["attenuations_db"][0]
    return f"{_fmt(float(att))} dB"


def format_report(rows: list[dict]) -> str:
    headers = ["task", "mode", "attenuation", "metric", "best", "params", "runtime_s"]
    table = [[r["task"], r["mode"], r["attenuation"], r["metric"], _fmt(r["best"]) if r["best"] is not None else "nan",
              r["params"], "-" if r["runtime"] is None else f"{r['runtime']:.1f}"] for r in rows]
    widths = [max(len(h), *(len(row[i]) for row in table)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)),
             "  ".join("-" * w for w in widths)]
    prev = None
    for row in table:
        if prev is not None and row[0] != prev:
            lines.append("")
        prev = row[0]
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)
