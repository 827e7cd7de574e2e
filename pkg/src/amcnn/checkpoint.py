"""Binary checkpoint format.

Layout: the magic bytes "AMCNN1", a little-endian uint32 byte length, a
UTF-8 JSON header {"config": ..., "vocab": [token, ...], "tensors":
[[name, [dims...]], ...]}, then each tensor's values as raw little-endian
float64 in header order.  Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import FormatError
from .model import ModelConfig, ModelParams, assemble_params
from .text import Vocabulary

MAGIC = b"AMCNN1"


def save_checkpoint(params: ModelParams, config: ModelConfig,
                    vocab: Vocabulary, path: str) -> None:
    named = params.named_tensors()
    header = {
        "config": config.to_dict(),
        "vocab": list(vocab.id_to_token),
        "tensors": [[name, list(t.shape)] for name, t in named],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for _, t in named:
            fh.write(np.ascontiguousarray(t.data, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> tuple:
    """Read (params, config, vocab); any structural inconsistency is a
    FormatError and no partial model escapes."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(raw) < offset + 4:
        raise FormatError(f"{path}: truncated header length")
    (header_len,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    if len(raw) < offset + header_len:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header: {exc}") from None
    offset += header_len
    for key in ("config", "vocab", "tensors"):
        if key not in header:
            raise FormatError(f"{path}: header missing {key!r}")
    try:
        config = ModelConfig(**header["config"])
        config.validate()
    except TypeError as exc:
        raise FormatError(f"{path}: bad config: {exc}") from None
    vocab = Vocabulary.from_tokens(header["vocab"])

    params = assemble_params(config, len(vocab))
    named = params.named_tensors()
    listed = [(name, tuple(shape)) for name, shape in header["tensors"]]
    expected = [(name, t.shape) for name, t in named]
    if listed != expected:
        raise FormatError(f"{path}: tensor table does not match config-derived layout")

    for name, t in named:
        nbytes = t.size * 8
        if len(raw) < offset + nbytes:
            raise FormatError(f"{path}: truncated payload at tensor {name!r}")
        t.data[...] = np.frombuffer(raw[offset:offset + nbytes],
                                    dtype="<f8").reshape(t.shape)
        offset += nbytes
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return params, config, vocab
