"""Versioned binary checkpoint: magic, config block, vocabularies, tensors.

Layout (all integers little-endian):
  magic  b"SAGR" | u32 version
  u32 length | config as utf-8 key=value lines
  u32 count  | word vocabulary entries (u32 length + utf-8 bytes each)
  u32 count  | label vocabulary entries
  u32 count  | tensors sorted by name:
               u32 name length + name, u8 dtype code (4/8), u8 rank,
               u32 dims..., raw little-endian floats
"""

from __future__ import annotations

import struct

import numpy as np

from .model import ModelConfig, Parser, Vocab

MAGIC = b"SAGR"
VERSION = 1

_CONFIG_FIELDS = (
    ("d", int),
    ("layers", int),
    ("heads", int),
    ("encoder_layers", int),
    ("variant", str),
    ("dropout_repr", float),
    ("dropout_output", float),
    ("max_depth", int),
    ("max_words", int),
)


class CheckpointError(ValueError):
    pass


def _write_str(out, s):
    raw = s.encode("utf-8")
    out.append(struct.pack("<I", len(raw)))
    out.append(raw)


def save_model(model, path):
    out = [MAGIC, struct.pack("<I", VERSION)]
    cfg = model.config
    lines = [f"{name}={getattr(cfg, name)}" for name, _ in _CONFIG_FIELDS]
    lines.append(f"dtype={'f8' if model.dtype == np.float64 else 'f4'}")
    _write_str(out, "\n".join(lines))
    for vocab in (model.words, model.labels):
        out.append(struct.pack("<I", len(vocab.items)))
        for item in vocab.items:
            _write_str(out, item)
    names = sorted(model.params)
    out.append(struct.pack("<I", len(names)))
    for name in names:
        data = model.params[name].data
        _write_str(out, name)
        code = 8 if data.dtype == np.float64 else 4
        out.append(struct.pack("<BB", code, data.ndim))
        out.append(struct.pack(f"<{data.ndim}I", *data.shape))
        out.append(np.ascontiguousarray(data, dtype=f"<f{code}").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(out))


class _Reader:
    def __init__(self, blob):
        self.blob = blob
        self.at = 0

    def read(self, n):
        if self.at + n > len(self.blob):
            raise CheckpointError("truncated checkpoint")
        chunk = self.blob[self.at : self.at + n]
        self.at += n
        return chunk

    def u32(self):
        return struct.unpack("<I", self.read(4))[0]

    def text(self):
        return self.read(self.u32()).decode("utf-8")


def load_model(path):
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.read(4) != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    kv = dict(line.split("=", 1) for line in r.text().splitlines())
    cfg = ModelConfig(**{name: typ(kv[name]) for name, typ in _CONFIG_FIELDS})
    dtype = np.float64 if kv.get("dtype") == "f8" else np.float32

    def vocab(with_unk):
        items = [r.text() for _ in range(r.u32())]
        v = Vocab(items[1:] if with_unk else items, with_unk=with_unk)
        if v.items != items:
            raise CheckpointError("vocabulary table is not in canonical order")
        return v

    words = vocab(True)
    labels = vocab(False)
    model = Parser(cfg, words, labels, dtype=dtype, seed=0)
    for _ in range(r.u32()):
        name = r.text()
        code, rank = struct.unpack("<BB", r.read(2))
        shape = struct.unpack(f"<{rank}I", r.read(4 * rank))
        raw = r.read(int(np.prod(shape)) * code if shape else code)
        arr = np.frombuffer(raw, dtype=f"<f{code}").reshape(shape).astype(dtype)
        if name not in model.params or model.params[name].data.shape != arr.shape:
            raise CheckpointError(f"unexpected tensor {name!r} {arr.shape}")
        model.params[name].data[...] = arr
    return model
