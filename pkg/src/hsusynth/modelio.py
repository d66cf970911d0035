"""Binary model file: a JSON header line followed by raw float64 matrices.

Layout::

    HSUMODEL\\n
    <header json, one line>\\n
    <payload: little-endian float64, matrices in header order, row-major>

The header carries the format version, the full vocabulary, the training
configuration, each matrix's name/shape/offset and a SHA-256 of the
payload.  Writing is deterministic, so save -> load -> save reproduces the
file byte for byte.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .encoding import Vocabulary
from .network import Model, TrainConfig, config_dict, dims_for
from .units import HsuParameters, parameter_shapes

MAGIC = b"HSUMODEL\n"
FORMAT_VERSION = 1


class CorruptModel(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


def to_bytes(model: Model) -> bytes:
    names = sorted(model.params.arrays)
    matrices, chunks, offset = [], [], 0
    for name in names:
        arr = np.ascontiguousarray(model.params.arrays[name], dtype="<f8")
        matrices.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "vocabulary": model.vocab.to_dict(),
        "config": config_dict(model.config),
        "d_h": model.params.dims.d_h,
        "k": model.vocab.k,
        "d_max": model.vocab.d_max,
        "repeated_lines": [[list(line), count] for line, count in sorted(model.repeated_lines.items())],
        "iterations": model.iterations,
        "matrices": matrices,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":"))
    return MAGIC + text.encode("utf-8") + b"\n" + payload


def from_bytes(data: bytes) -> Model:
    try:
        return _decode(data)
    except (CorruptModel, VersionMismatch):
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed model file: {exc!r}") from None


def _decode(data: bytes) -> Model:
    if not data.startswith(MAGIC):
        raise CorruptModel("missing model file signature")
    end = data.find(b"\n", len(MAGIC))
    if end < 0:
        raise CorruptModel("header is not terminated")
    try:
        header = json.loads(data[len(MAGIC) : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModel(f"unreadable header: {exc}") from None
    if not isinstance(header, dict):
        raise CorruptModel("header is not an object")
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionMismatch(f"model format {header.get('format_version')}, expected {FORMAT_VERSION}")
    payload = data[end + 1 :]
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CorruptModel("payload checksum mismatch (truncated or altered file)")

    vocab = Vocabulary.from_dict(header["vocabulary"])
    config = TrainConfig(**header["config"])
    dims = dims_for(vocab, header["d_h"])
    values = np.frombuffer(payload, dtype="<f8")
    expected = parameter_shapes(dims)
    arrays = {}
    for entry in header["matrices"]:
        shape = tuple(entry["shape"])
        if expected.get(entry["name"]) != shape:
            raise CorruptModel(f"matrix {entry['name']} has unexpected shape {shape}")
        count = int(np.prod(shape))
        chunk = values[entry["offset"] : entry["offset"] + count]
        if chunk.size != count:
            raise CorruptModel(f"matrix {entry['name']} is truncated")
        arrays[entry["name"]] = chunk.reshape(shape).astype(float)
    if set(arrays) != set(expected):
        raise CorruptModel("model file is missing matrices")
    repeated = {tuple(line): count for line, count in header["repeated_lines"]}
    return Model(HsuParameters(dims, arrays), vocab, config, repeated, iterations=header["iterations"])


def save_model(model: Model, path: str | Path) -> bytes:
    data = to_bytes(model)
    Path(path).write_bytes(data)
    return data


def load_model(path: str | Path) -> Model:
    return from_bytes(Path(path).read_bytes())
