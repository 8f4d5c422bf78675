"""Writers for the swinvib feature-file formats.

Implemented independently against the documented byte layout (see the
primary package's README): little-endian header
``magic(4s) version(u32) layer_index(u32) feature_dim(u32)
record_count(u64) has_labels(u8)`` followed by records of
``[label u8]? + D x float32``. Training files carry magic ``SVF1``,
inference files ``SVQ1``.
"""

import hashlib
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC_TRAIN = b"SVF1"
MAGIC_INFER = b"SVQ1"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIIQB")


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_feature_file(path, layer_index: int, features, labels=None) -> None:
    feats = np.ascontiguousarray(np.asarray(features, dtype="<f4"))
    if feats.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {feats.shape}")
    n, dim = feats.shape
    has_labels = labels is not None
    header = HEADER.pack(
        MAGIC_TRAIN if has_labels else MAGIC_INFER,
        FORMAT_VERSION, layer_index, dim, n, int(has_labels),
    )
    feat_bytes = feats.view(np.uint8).reshape(n, dim * 4)
    if has_labels:
        labels = np.asarray(labels, dtype=np.uint8)
        if labels.shape != (n,) or labels.max(initial=0) > 1:
            raise ValueError("labels must be one binary value per record")
        records = np.empty((n, 1 + dim * 4), dtype=np.uint8)
        records[:, 0] = labels
        records[:, 1:] = feat_bytes
    else:
        records = feat_bytes
    atomic_write_bytes(path, header + records.tobytes())


def read_feature_file(path):
    """Minimal reader for round-trip checks (the primary owns validation)."""
    raw = Path(path).read_bytes()
    magic, version, layer_index, dim, count, has_labels = HEADER.unpack_from(raw)
    record_size = dim * 4 + (1 if has_labels else 0)
    body = np.frombuffer(raw[HEADER.size:], dtype=np.uint8).reshape(count, record_size)
    if has_labels:
        labels = body[:, 0].copy()
        feats = np.ascontiguousarray(body[:, 1:]).view("<f4").reshape(count, dim)
    else:
        labels = None
        feats = np.ascontiguousarray(body).view("<f4").reshape(count, dim)
    return layer_index, feats, labels


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(path, *, model_name, n_layers, feature_dim, window_len,
                   files, extra=None) -> None:
    manifest = {
        "model_name": model_name,
        "n_layers": n_layers,
        "feature_dim": feature_dim,
        "window_len": window_len,
        "files": files,
    }
    if extra:
        manifest.update(extra)
    atomic_write_bytes(path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())


def file_entry(path, base_dir, layer: int, records: int) -> dict:
    return {
        "layer": layer,
        "path": str(Path(path).relative_to(base_dir)),
        "records": records,
        "sha256": sha256_file(path),
    }
