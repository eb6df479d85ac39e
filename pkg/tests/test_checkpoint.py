import numpy as np
import pytest

from sager.checkpoint import CheckpointError, load_model, save_model
from sager.model import ModelConfig, Parser, Vocab


def small_model(seed=0, dtype=np.float32):
    cfg = ModelConfig(d=8, layers=1, heads=2, encoder_layers=1, variant="no_hier_pos")
    words = Vocab(["alpha", "beta"], with_unk=True)
    labels = Vocab(["det", "obl:[X]"])
    return Parser(cfg, words, labels, dtype=dtype, seed=seed)


def test_save_load_round_trip(tmp_path):
    model = small_model(seed=4)
    path = tmp_path / "m.bin"
    save_model(model, path)
    back = load_model(path)
    assert back.config == model.config
    assert back.words.items == model.words.items
    assert back.labels.items == model.labels.items
    assert back.dtype == model.dtype
    for name, p in model.params.items():
        np.testing.assert_array_equal(back.params[name].data, p.data)


def test_save_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    save_model(small_model(seed=9), a)
    save_model(small_model(seed=9), b)
    assert a.read_bytes() == b.read_bytes()


def test_float64_models_round_trip(tmp_path):
    model = small_model(dtype=np.float64)
    path = tmp_path / "m.bin"
    save_model(model, path)
    back = load_model(path)
    assert back.dtype == np.float64
    np.testing.assert_array_equal(back.params["emb"].data, model.params["emb"].data)


def test_magic_and_truncation_rejected(tmp_path):
    path = tmp_path / "m.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(CheckpointError, match="not a model checkpoint"):
        load_model(path)
    model = small_model()
    save_model(model, path)
    path.write_bytes(path.read_bytes()[:-7])
    with pytest.raises(CheckpointError, match="truncated"):
        load_model(path)
