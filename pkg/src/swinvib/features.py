"""Attention-feature data model, binary feature files, and synthetic data.

File formats
------------
Training files (magic ``SVF1``, labeled) and inference files (magic
``SVQ1``, unlabeled) share one little-endian layout::

    magic         4 bytes  b"SVF1" | b"SVQ1"
    version       uint32   currently 1
    layer_index   uint32
    feature_dim   uint32   D
    record_count  uint64
    has_labels    uint8    1 for SVF1, 0 for SVQ1

followed by ``record_count`` records, each ``[label uint8]? + D float32``.
Features are float32 on disk and float64 in computation. A JSON manifest
bundles the per-layer files.
"""

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from . import windows as win
from .fileio import atomic_write_bytes, sha256_file, write_json
from .validation import FormatError, ValidationError

logger = logging.getLogger(__name__)

MAGIC_TRAIN = b"SVF1"
MAGIC_INFER = b"SVQ1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIQB")

DEFAULT_FEATURE_DIM = win.DEFAULT_WINDOW_LEN**2


@dataclass(frozen=True)
class FeatureRecord:
    """One window's feature vector for one backbone layer."""

    layer_index: int
    features: np.ndarray  # float32, length D
    label: int | None = None
    window_ref: str | None = None


def mean_heads(attention) -> np.ndarray:
    """Average a (heads, w, w) attention stack over the head axis."""
    arr = np.asarray(attention, dtype=np.float64)
    if arr.ndim != 3:
        raise ValidationError(f"attention must be 3-D (heads, w, w), got shape {arr.shape}")
    heads, rows, cols = arr.shape
    if heads < 1:
        raise ValidationError("attention needs at least one head")
    if rows != cols:
        raise ValidationError(f"per-head attention must be square, got {rows}x{cols}")
    return arr.mean(axis=0)


def featurize(g, target_dim: int) -> np.ndarray:
    """Row-major flatten of a square attention map, zero-padded or truncated to D."""
    arr = np.asarray(g, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"expected a 2-D map, got shape {arr.shape}")
    if target_dim < 1:
        raise ValidationError("target_dim must be >= 1")
    flat = arr.reshape(-1)
    if flat.size >= target_dim:
        return flat[:target_dim].copy()
    out = np.zeros(target_dim, dtype=np.float64)
    out[: flat.size] = flat
    return out


# ---------------------------------------------------------------------------
# binary feature files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureFile:
    layer_index: int
    feature_dim: int
    has_labels: bool
    features: np.ndarray  # (n, D) float32
    labels: np.ndarray | None  # (n,) uint8 when has_labels


def write_feature_file(path, layer_index: int, features, labels=None) -> None:
    feats = np.ascontiguousarray(np.asarray(features, dtype="<f4"))
    if feats.ndim != 2:
        raise ValidationError(f"features must be 2-D (n, D), got shape {feats.shape}")
    n, dim = feats.shape
    has_labels = labels is not None
    if has_labels:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ValidationError("labels must align one-to-one with feature rows")
        if not np.all(np.isin(labels, (0, 1))):
            raise ValidationError("labels must be binary")
        labels = labels.astype(np.uint8)
    magic = MAGIC_TRAIN if has_labels else MAGIC_INFER
    header = _HEADER.pack(magic, FORMAT_VERSION, layer_index, dim, n, int(has_labels))
    feat_bytes = feats.view(np.uint8).reshape(n, dim * 4)
    if has_labels:
        records = np.empty((n, 1 + dim * 4), dtype=np.uint8)
        records[:, 0] = labels
        records[:, 1:] = feat_bytes
    else:
        records = feat_bytes
    atomic_write_bytes(path, header + records.tobytes())


def read_feature_file(path) -> FeatureFile:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("header", f"file is {len(raw)} bytes, smaller than the header")
    magic, version, layer_index, dim, count, has_labels_flag = _HEADER.unpack_from(raw)
    if magic not in (MAGIC_TRAIN, MAGIC_INFER):
        raise FormatError("magic", f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError("version", f"unsupported version {version}")
    expect_labels = magic == MAGIC_TRAIN
    if bool(has_labels_flag) != expect_labels:
        raise FormatError(
            "has_labels", f"flag {has_labels_flag} inconsistent with magic {magic!r}"
        )
    if dim < 1:
        raise FormatError("feature_dim", f"feature_dim must be >= 1, got {dim}")
    record_size = dim * 4 + (1 if expect_labels else 0)
    payload = raw[_HEADER.size :]
    if len(payload) != count * record_size:
        raise FormatError(
            "record_count",
            f"record_count mismatch: header says {count} records "
            f"({count * record_size} bytes), payload has {len(payload)} bytes",
        )
    records = np.frombuffer(payload, dtype=np.uint8).reshape(count, record_size)
    if expect_labels:
        labels = records[:, 0].copy()
        if np.any(labels > 1):
            bad = int(np.argmax(labels > 1))
            raise FormatError("label", f"record {bad} has non-binary label {labels[bad]}")
        feats = np.ascontiguousarray(records[:, 1:]).view("<f4").reshape(count, dim)
    else:
        labels = None
        feats = np.ascontiguousarray(records).view("<f4").reshape(count, dim)
    return FeatureFile(
        layer_index=layer_index,
        feature_dim=dim,
        has_labels=expect_labels,
        features=feats,
        labels=labels,
    )


# ---------------------------------------------------------------------------
# feature sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Geometry of the LLM-free feature generator.

    Each layer gets a random unit direction (its source-purity axis) with
    two Gaussian clusters at +-cluster_separation/2 along it: single-source
    windows draw from the positive cluster, mixed windows from the negative
    one, both with isotropic ``noise_scale`` noise. The label structure is
    therefore linearly separable with margin ``cluster_separation`` between
    the class centers, learnable without any backbone.
    """

    n_layers: int = 4
    feature_dim: int = DEFAULT_FEATURE_DIM
    cluster_separation: float = 6.0
    noise_scale: float = 1.0
    mixed_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValidationError("n_layers must be >= 1")
        if self.feature_dim < 2:
            raise ValidationError("feature_dim must be >= 2")
        if not 0.0 <= self.mixed_fraction <= 1.0:
            raise ValidationError("mixed_fraction must lie in [0, 1]")
        if self.cluster_separation <= 0.0 or self.noise_scale <= 0.0:
            raise ValidationError("cluster_separation and noise_scale must be positive")


def layer_directions(spec: SyntheticSpec) -> np.ndarray:
    """Per-layer unit directions separating the two source clusters."""
    rng = np.random.default_rng(spec.seed)
    dirs = rng.normal(size=(spec.n_layers, spec.feature_dim))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


class SyntheticWindowSource:
    """Feature source that maps a window's source purity onto cluster draws.

    Windows whose tokens share one source tag sit at +separation/2 along each
    layer's purity axis, mixed windows at -separation/2. Stateful: consumes
    its own seeded noise stream.
    """

    def __init__(self, spec: SyntheticSpec, noise_seed: int | None = None):
        self.spec = spec
        self.n_layers = spec.n_layers
        self.feature_dim = spec.feature_dim
        self.directions = layer_directions(spec)
        self._rng = np.random.default_rng(spec.seed + 1 if noise_seed is None else noise_seed)

    def window_features(self, seq: win.TokenSequence, window: win.WindowSpec) -> np.ndarray:
        sign = -1.0 if len(set(seq.window_tags(window))) > 1 else 1.0
        half = self.spec.cluster_separation / 2.0
        centers = sign * half * self.directions
        noise = self._rng.normal(size=(self.n_layers, self.feature_dim))
        return centers + self.spec.noise_scale * noise


# ---------------------------------------------------------------------------
# training-set construction
# ---------------------------------------------------------------------------


@dataclass
class BuildReport:
    processed: int = 0
    skipped: int = 0
    per_label_counts: dict = field(default_factory=lambda: {0: 0, 1: 0})

    def as_dict(self) -> dict:
        return {
            "processed": self.processed,
            "skipped": self.skipped,
            "per_label_counts": {str(k): v for k, v in self.per_label_counts.items()},
        }


def _write_manifest(path, *, model_name, n_layers, feature_dim, window_len, files,
                    eval_files=None, extra=None) -> None:
    manifest = {
        "model_name": model_name,
        "n_layers": n_layers,
        "feature_dim": feature_dim,
        "window_len": window_len,
        "files": files,
    }
    if eval_files is not None:
        manifest["eval_files"] = eval_files
    if extra:
        manifest.update(extra)
    write_json(path, manifest)


def _file_entry(path, base_dir, layer, records) -> dict:
    return {
        "layer": layer,
        "path": str(path.relative_to(base_dir)),
        "records": records,
        "sha256": sha256_file(path),
    }


def build_training_sets(
    corpus,
    feature_source,
    out_dir,
    *,
    window_len: int = win.DEFAULT_WINDOW_LEN,
    block: int = win.DEFAULT_BLOCK,
    mixed_fraction: float = 0.5,
    seed: int = 0,
    model_name: str = "synthetic",
):
    """Draw one labeled training window per corpus sample, per backbone layer.

    Each sample contributes one context variant: its supplementary context,
    its conflicting context, or their block-interleaved mixture (drawn with
    probability ``mixed_fraction``; the rest split evenly). A random window
    of the variant is labeled by source purity and featurized for every
    layer, so all per-layer files share one label sequence. Samples shorter
    than the window are skipped with a warning.

    Returns ``(manifest_path, report)``.
    """
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_layers = feature_source.n_layers
    dim = feature_source.feature_dim
    per_layer: list[list[np.ndarray]] = [[] for _ in range(n_layers)]
    labels: list[int] = []
    report = BuildReport()

    for sample in corpus:
        u = rng.random()
        if u < mixed_fraction:
            seq = win.interleave_mixed(sample.supplementary, sample.conflicting, block=block)
        elif u < mixed_fraction + (1.0 - mixed_fraction) / 2.0:
            seq = sample.supplementary
        else:
            seq = sample.conflicting
        try:
            window = win.random_window(seq, length=window_len, seed=rng)
        except ValidationError as exc:
            logger.warning("skipping sample %s: %s", sample.id, exc)
            report.skipped += 1
            continue
        label = win.label_window(seq, window).label
        feats = feature_source.window_features(seq, window)
        if feats.shape != (n_layers, dim):
            raise ValidationError(
                f"feature source returned shape {feats.shape}, expected {(n_layers, dim)}"
            )
        for layer in range(n_layers):
            per_layer[layer].append(feats[layer])
        labels.append(label)
        report.processed += 1
        report.per_label_counts[label] += 1

    if report.processed == 0:
        raise ValidationError("no usable samples in the corpus")

    label_arr = np.array(labels, dtype=np.uint8)
    files = []
    for layer in range(n_layers):
        path = out_dir / f"train_layer{layer:02d}.svf"
        write_feature_file(path, layer, np.stack(per_layer[layer]), label_arr)
        files.append(_file_entry(path, out_dir, layer, report.processed))

    manifest_path = out_dir / "manifest.json"
    _write_manifest(
        manifest_path,
        model_name=model_name,
        n_layers=n_layers,
        feature_dim=dim,
        window_len=window_len,
        files=files,
        extra={"build_report": report.as_dict()},
    )
    return manifest_path, report


def generate_synthetic(
    spec: SyntheticSpec,
    out_dir,
    *,
    n_train: int = 2000,
    n_eval: int = 500,
    window_len: int = win.DEFAULT_WINDOW_LEN,
):
    """Write seeded synthetic training and held-out feature files plus a manifest.

    The manifest records the generating geometry (per-layer directions) and
    per-split label counts, making it a ground-truth record for downstream
    checks. Byte-identical across runs with the same spec.
    """
    from pathlib import Path

    if n_train < 1:
        raise ValidationError("n_train must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    directions = layer_directions(spec)
    half = spec.cluster_separation / 2.0

    def draw_split(n):
        labels = (rng.random(n) >= spec.mixed_fraction).astype(np.uint8)
        signs = np.where(labels == 1, 1.0, -1.0)  # single-source +, mixed -
        feats = np.zeros((spec.n_layers, n, spec.feature_dim), dtype=np.float64)
        for layer in range(spec.n_layers):
            noise = rng.normal(size=(n, spec.feature_dim))
            feats[layer] = signs[:, None] * half * directions[layer] + spec.noise_scale * noise
        return feats, labels

    train_feats, train_labels = draw_split(n_train)
    eval_feats, eval_labels = (None, None)
    if n_eval > 0:
        eval_feats, eval_labels = draw_split(n_eval)

    files, eval_files = [], []
    for layer in range(spec.n_layers):
        path = out_dir / f"train_layer{layer:02d}.svf"
        write_feature_file(path, layer, train_feats[layer], train_labels)
        files.append(_file_entry(path, out_dir, layer, n_train))
        if eval_feats is not None:
            epath = out_dir / f"eval_layer{layer:02d}.svf"
            write_feature_file(epath, layer, eval_feats[layer], eval_labels)
            eval_files.append(_file_entry(epath, out_dir, layer, n_eval))

    manifest_path = out_dir / "manifest.json"
    _write_manifest(
        manifest_path,
        model_name="synthetic",
        n_layers=spec.n_layers,
        feature_dim=spec.feature_dim,
        window_len=window_len,
        files=files,
        eval_files=eval_files if eval_files else None,
        extra={
            "synthetic": {
                "cluster_separation": spec.cluster_separation,
                "noise_scale": spec.noise_scale,
                "mixed_fraction": spec.mixed_fraction,
                "seed": spec.seed,
                "directions": [list(map(float, d)) for d in directions],
            },
            "label_counts": {
                "train": {
                    "0": int(np.sum(train_labels == 0)),
                    "1": int(np.sum(train_labels == 1)),
                },
                "eval": None
                if eval_labels is None
                else {
                    "0": int(np.sum(eval_labels == 0)),
                    "1": int(np.sum(eval_labels == 1)),
                },
            },
        },
    )
    return manifest_path
