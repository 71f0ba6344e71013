import json

import numpy as np
import pytest

from delayrc import (ConfigError, FormatError, MackeyGlassParams, Narma10Params, ValidationError,
                     generate_mackey_glass, generate_narma10, generate_separable_utterances)
from delayrc import io


def test_series_round_trip_is_bit_exact(tmp_path):
    task = generate_narma10(Narma10Params(length=300, input_seed=9))
    back = io.read_dataset(io.write_dataset(tmp_path / "n.drc", task))
    assert back.input.data.tobytes() == task.input.data.tobytes()
    assert back.target.tobytes() == task.target.tobytes()
    assert back.split == task.split and back.params == task.params


def test_mackey_glass_file_alignment(tmp_path):
    task = generate_mackey_glass(MackeyGlassParams(length=400, horizon=10))
    back = io.read_dataset(io.write_dataset(tmp_path / "mg.drc", task))
    np.testing.assert_array_equal(back.target[:-10], back.input.data[10:, 0])


def test_utterance_round_trip(tmp_path):
    ds = generate_separable_utterances(n_classes=3, count=12, seed=4)
    back = io.read_dataset(io.write_dataset(tmp_path / "u.drc", ds))
    assert back == ds
    assert set(back.labels) <= {0, 1, 2}


def _corrupt_header(path, **changes):
    raw = path.read_bytes()
    n = int.from_bytes(raw[8:12], "little")
    header = json.loads(raw[12:12 + n])
    header.update(changes)
    head = json.dumps(header).encode()
    path.write_bytes(raw[:8] + len(head).to_bytes(4, "little") + head + raw[12 + n:])


def test_dataset_format_errors(tmp_path):
    p = io.write_dataset(tmp_path / "n.drc", generate_narma10(Narma10Params(length=100)))
    _corrupt_header(p, format_version=2)
    with pytest.raises(FormatError, match="version"):
        io.read_dataset(p)
    p = io.write_dataset(tmp_path / "m.drc", generate_narma10(Narma10Params(length=100)))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FormatError):
        io.read_dataset(p)
    (tmp_path / "junk").write_bytes(b"hello")
    with pytest.raises(FormatError):
        io.read_dataset(tmp_path / "junk")


def test_text_export(tmp_path):
    task = generate_narma10(Narma10Params(length=50))
    lines = io.export_text(task, tmp_path / "n.tsv").read_text().splitlines()
    assert lines[0] == "n\tu0\ttarget" and len(lines) == 51
    assert float(lines[5].split("\t")[2]) == task.target[4]


def test_import_manifest(tmp_path):
    np.save(tmp_path / "a.npy", np.arange(6.0).reshape(3, 2))
    (tmp_path / "b.csv").write_text("1,2\n3,4\n")
    (tmp_path / "m.tsv").write_text("id\tlabel\tpath\na\t0\ta.npy\nb\t1\tb.csv\n")
    ds = io.import_feature_manifest(tmp_path / "m.tsv")
    assert ds.n_classes == 2 and ds.channels == 2 and ds.total_length == 5
    np.testing.assert_array_equal(ds.utterances[1].features, [[1, 2], [3, 4]])
    (tmp_path / "bad.tsv").write_text("a\t0\n")
    with pytest.raises(FormatError, match="bad.tsv:1"):
        io.import_feature_manifest(tmp_path / "bad.tsv")


# --- configs -----------------------------------------------------------------

def test_config_round_trip(tmp_path):
    cfg = io.ExperimentConfig.from_dict({"task": "narma10", "task_params": {"length": 900},
                                         "beta2_grid": [0, 0.5], "d_grid": [1, 2]})
    assert cfg.preset == "narma10"
    back = io.load_config(io.save_config(cfg, tmp_path / "c.json"))
    assert back == cfg


@pytest.mark.parametrize("text,line,match", [
    ('{\n  "task": "narma10",\n  "bogus": 1\n}', 3, "unknown key 'bogus'"),
    ('{\n  "task": "narma10",\n  "task_params": {\n    "lenght": 5\n  }\n}', 4, "lenght"),
    ('{\n  "task": "narma10",\n  "beta2_grid": [0.5]\n}', 3, "contain 0"),
    ('{\n  "task": "narma10",\n  "modes": ["fast"]\n}', 3, "unknown mode"),
    ('{\n  "task": "narma10",\n  "d_grid": [1, -2]\n}', 3, "d_grid"),
    ('{\n  "task": "narma10",\n  "seeds": [0,\n}', 4, "invalid JSON"),
])
def test_config_errors_carry_line_numbers(tmp_path, text, line, match):
    p = tmp_path / "c.json"
    p.write_text(text)
    with pytest.raises(ConfigError, match=match) as err:
        io.load_config(p)
    assert err.value.line == line
    assert str(err.value).startswith(f"{p}:{line}:")


def test_config_requires_preset_fields():
    with pytest.raises(ConfigError):
        io.ExperimentConfig.from_dict({"task": "dataset", "dataset_path": "x.drc"})
    cfg = io.ExperimentConfig.from_dict({"task": "dataset", "dataset_path": "x.drc", "beta1": 1,
                                         "bias_j0": 0, "ridge_lambda": 1e-5, "n_nodes": 5,
                                         "alpha": 0.1})
    assert cfg.preset is None
    with pytest.raises(ConfigError):
        io.ExperimentConfig.from_dict({"task": "dataset"})
    with pytest.raises(ConfigError):
        io.ExperimentConfig.from_dict({"beta1": 1})


# --- reports -----------------------------------------------------------------

def test_report_needs_results():
    with pytest.raises(ValidationError):
        io.summary_rows([])


def test_load_result_rejects_foreign_files(tmp_path):
    p = tmp_path / "r.json"
    p.write_text('{"format": "delayrc-result", "version": 99}')
    with pytest.raises(FormatError, match="version"):
        io.load_result(p)
    p.write_text("{}")
    with pytest.raises(FormatError):
        io.load_result(p)
