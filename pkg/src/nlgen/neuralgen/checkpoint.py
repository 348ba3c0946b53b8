"""Checkpoint directory: ``manifest.json`` plus little-endian float32 ``params.bin``."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from nlgen.errors import CheckpointError, CheckpointIoError, ShapeMismatch, VersionMismatch
from nlgen.neuralgen.model import Hyperparams, Seq2Seq, Vocab, param_shapes

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
PARAMS = "params.bin"
_DTYPE = np.dtype("<f4")


def save_checkpoint(model: Seq2Seq, path, extra: dict | None = None) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        index, offset = [], 0
        with open(path / PARAMS, "wb") as fh:
            for name in sorted(model.params):
                arr = np.ascontiguousarray(model.params[name], dtype=_DTYPE)
                fh.write(arr.tobytes())
                index.append({"name": name, "shape": list(arr.shape), "offset": offset})
                offset += arr.nbytes
        manifest = {
            "format_version": FORMAT_VERSION,
            "hyperparams": model.hyper.to_dict(),
            "vocab": {"source": model.src_vocab.itos if model.src_vocab else None,
                      "target": model.tgt_vocab.itos if model.tgt_vocab else None},
            "tensors": index,
            "n_bytes": offset,
            "extra": extra or {},
        }
        (path / MANIFEST).write_text(json.dumps(manifest, indent=1))
    except OSError as exc:
        raise CheckpointIoError(f"cannot write checkpoint {path}: {exc}") from exc
    return path


def _vocab(itos):
    if itos is None:
        return None
    v = Vocab()
    for t in itos[len(v):]:
        v.add(t)
    if v.itos != list(itos):
        raise CheckpointError("vocabulary does not start with the reserved symbols")
    return v


def load_checkpoint(path) -> Seq2Seq:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text())
        blob = (path / PARAMS).read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointIoError(f"cannot read checkpoint {path}: {exc}") from exc
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, expected {FORMAT_VERSION}")
    hyper = Hyperparams.from_dict(manifest["hyperparams"])
    expected = param_shapes(hyper)
    params = {}
    for entry in manifest["tensors"]:
        name, shape, off = entry["name"], tuple(entry["shape"]), entry["offset"]
        if expected.get(name) != shape:
            raise ShapeMismatch(f"{name}: stored shape {shape}, model expects {expected.get(name)}")
        n = int(np.prod(shape, dtype=np.int64)) * _DTYPE.itemsize
        if off < 0 or off + n > len(blob):
            raise CheckpointIoError(f"{PARAMS} truncated at tensor {name}")
        params[name] = np.frombuffer(blob, dtype=_DTYPE, count=n // _DTYPE.itemsize,
                                     offset=off).astype(np.float64).reshape(shape)
    if len(blob) != manifest.get("n_bytes", len(blob)):
        raise CheckpointIoError(f"{PARAMS} has {len(blob)} bytes, manifest says {manifest['n_bytes']}")
    missing = set(expected) - set(params)
    if missing:
        raise ShapeMismatch(f"missing tensors {sorted(missing)}")
    return Seq2Seq(hyper, params, _vocab(manifest["vocab"]["source"]), _vocab(manifest["vocab"]["target"]))


def read_manifest(path) -> dict:
    try:
        return json.loads((Path(path) / MANIFEST).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointIoError(f"cannot read manifest in {path}: {exc}") from exc
