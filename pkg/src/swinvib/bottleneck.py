"""Per-layer variational bottleneck classifier, trained from scratch.

The encoder maps a window's feature vector through a shared trunk
(affine, batch-norm, ReLU, dropout) into parallel mean / log-variance
heads; a reparameterized Gaussian sample feeds a three-stage decoder
ending in a single sigmoid unit. Training minimizes binary cross-entropy
plus ``beta`` times the KL divergence of the latent posterior from an
isotropic unit Gaussian. Gradients are hand-derived (see ``nn``) and
verified against central finite differences.

Checkpoint format (magic ``SVM1``, little-endian)::

    magic    4 bytes   b"SVM1"
    version  uint32    currently 1
    D, L, H1, H2, H3   uint32 each
    dropout  float64
    parameter tensors  float64, canonical order (see PARAM_ORDER)
    batch-norm running stats  float64, canonical order
"""

import logging
import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.metrics import roc_auc_score

from . import nn
from .fileio import atomic_write_bytes
from .validation import FormatError, ValidationError, as_binary_labels, as_feature_matrix

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"SVM1"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sI5Id")

PARAM_ORDER = (
    "trunk_w", "trunk_b", "bn1_gamma", "bn1_beta",
    "mu_w", "mu_b", "logvar_w", "logvar_b",
    "dec1_w", "dec1_b", "bn2_gamma", "bn2_beta",
    "dec2_w", "dec2_b", "bn3_gamma", "bn3_beta",
    "out_w", "out_b",
)
RUNNING_ORDER = ("bn1_mean", "bn1_var", "bn2_mean", "bn2_var", "bn3_mean", "bn3_var")


def default_sizes(feature_dim: int) -> tuple[int, int, int, int]:
    """(H1, L, H2, H3); full sizes for wide inputs, capped at 8*D below 256."""
    if feature_dim >= 256:
        return 2048, 512, 256, 128
    cap = 8 * feature_dim
    return min(2048, cap), min(512, cap), min(256, cap), min(128, cap)


def _param_shapes(d, latent, h1, h2, h3) -> dict[str, tuple]:
    return {
        "trunk_w": (d, h1), "trunk_b": (h1,), "bn1_gamma": (h1,), "bn1_beta": (h1,),
        "mu_w": (h1, latent), "mu_b": (latent,),
        "logvar_w": (h1, latent), "logvar_b": (latent,),
        "dec1_w": (latent, h2), "dec1_b": (h2,), "bn2_gamma": (h2,), "bn2_beta": (h2,),
        "dec2_w": (h2, h3), "dec2_b": (h3,), "bn3_gamma": (h3,), "bn3_beta": (h3,),
        "out_w": (h3, 1), "out_b": (1,),
    }


@dataclass
class VibModel:
    """Parameters and batch-norm state of one layer's bottleneck.

    ``params`` maps tensor names to views into one contiguous ``param_flat``
    vector so the optimizer can update everything in a few vector ops.
    """

    feature_dim: int
    latent_dim: int
    hidden: tuple[int, int, int]
    dropout_rate: float
    params: dict[str, np.ndarray]
    running: dict[str, np.ndarray]
    training: bool = False
    param_flat: np.ndarray | None = None


def _alloc_flat(shapes: dict[str, tuple]) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    total = sum(int(np.prod(s)) for s in shapes.values())
    flat = np.zeros(total)
    views = {}
    offset = 0
    for name in PARAM_ORDER:
        size = int(np.prod(shapes[name]))
        views[name] = flat[offset : offset + size].reshape(shapes[name])
        offset += size
    return flat, views


def _ensure_flat_params(model: VibModel) -> None:
    if model.param_flat is not None and all(
        model.params[n].base is model.param_flat for n in PARAM_ORDER
    ):
        return
    h1, h2, h3 = model.hidden
    shapes = _param_shapes(model.feature_dim, model.latent_dim, h1, h2, h3)
    flat, views = _alloc_flat(shapes)
    for name in PARAM_ORDER:
        views[name][...] = model.params[name]
    model.params = views
    model.param_flat = flat


def init_model(feature_dim: int, *, latent_dim: int | None = None,
               hidden: tuple[int, int, int] | None = None,
               dropout_rate: float = 0.5, seed: int = 0) -> VibModel:
    if feature_dim < 1:
        raise ValidationError("feature_dim must be >= 1")
    h1d, ld, h2d, h3d = default_sizes(feature_dim)
    latent = latent_dim if latent_dim is not None else ld
    h1, h2, h3 = hidden if hidden is not None else (h1d, h2d, h3d)
    if min(latent, h1, h2, h3) < 1:
        raise ValidationError("all layer sizes must be >= 1")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValidationError("dropout_rate must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    shapes = _param_shapes(feature_dim, latent, h1, h2, h3)
    flat, params = _alloc_flat(shapes)
    for name, shape in shapes.items():
        if name.endswith("_w"):
            fan_in = shape[0]
            # He scaling for the rectified stages, plain 1/sqrt(fan_in) for heads
            std = np.sqrt(2.0 / fan_in) if name in ("trunk_w", "dec1_w", "dec2_w") else 1.0 / np.sqrt(fan_in)
            params[name][...] = rng.normal(0.0, std, size=shape)
        elif name.endswith("_gamma"):
            params[name][...] = np.ones(shape)
    # start with a near-deterministic latent (sigma ~ exp(-3)) so the decoder
    # trains on the same signal the mean-only inference path will see
    params["logvar_b"][...] = -6.0
    running = {
        "bn1_mean": np.zeros(h1), "bn1_var": np.ones(h1),
        "bn2_mean": np.zeros(h2), "bn2_var": np.ones(h2),
        "bn3_mean": np.zeros(h3), "bn3_var": np.ones(h3),
    }
    return VibModel(feature_dim, latent, (h1, h2, h3), dropout_rate, params, running,
                    param_flat=flat)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def _as_batch(x, dim, name="g"):
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValidationError(f"{name} must have {dim} features, got shape {np.shape(x)}")
    return arr, single


def encode(model: VibModel, g):
    """Inference-mode encoder: running batch-norm stats, dropout disabled."""
    x, single = _as_batch(g, model.feature_dim)
    p, r = model.params, model.running
    t = x @ p["trunk_w"] + p["trunk_b"]
    h, _, _ = nn.batchnorm_forward(t, p["bn1_gamma"], p["bn1_beta"],
                                   r["bn1_mean"], r["bn1_var"], training=False)
    h = np.maximum(h, 0.0)
    mu = h @ p["mu_w"] + p["mu_b"]
    log_var = h @ p["logvar_w"] + p["logvar_b"]
    if single:
        return mu[0], log_var[0]
    return mu, log_var


def reparameterize(mu, log_var, noise):
    """z = mu + exp(log_var / 2) * noise."""
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if mu.shape != log_var.shape or mu.shape != noise.shape:
        raise ValidationError(
            f"mu, log_var and noise must share a shape, got {mu.shape}, {log_var.shape}, {noise.shape}"
        )
    return mu + np.exp(0.5 * log_var) * noise


def decode(model: VibModel, z):
    """Inference-mode decoder: probability that the window is single-source."""
    z, single = _as_batch(z, model.latent_dim, "z")
    logits = _decode_logits(model, z)
    probs = nn.sigmoid(logits)
    if single:
        return float(probs[0])
    return probs


def _decode_logits(model, z):
    p, r = model.params, model.running
    h, _, _ = nn.batchnorm_forward(z @ p["dec1_w"] + p["dec1_b"], p["bn2_gamma"], p["bn2_beta"],
                                   r["bn2_mean"], r["bn2_var"], training=False)
    h = np.maximum(h, 0.0)
    h, _, _ = nn.batchnorm_forward(h @ p["dec2_w"] + p["dec2_b"], p["bn3_gamma"], p["bn3_beta"],
                                   r["bn3_mean"], r["bn3_var"], training=False)
    h = np.maximum(h, 0.0)
    return (h @ p["out_w"] + p["out_b"]).reshape(-1)


def predict_probability(model: VibModel, g):
    """Deterministic inference path: decode the latent mean without sampling."""
    mu, _ = encode(model, g)
    return decode(model, mu)


def _forward_train(model, x, noise, masks, update_stats):
    """Training-mode forward pass; returns logits, (mu, log_var) and caches."""
    p, r = model.params, model.running
    caches = {}
    t, caches["trunk"] = nn.affine_forward(x, p["trunk_w"], p["trunk_b"])
    h, caches["bn1"], run1 = nn.batchnorm_forward(
        t, p["bn1_gamma"], p["bn1_beta"], r["bn1_mean"], r["bn1_var"], training=True)
    h, caches["relu1"] = nn.relu_forward(h)
    h, caches["drop1"] = nn.dropout_forward(h, masks[0])
    mu, caches["mu"] = nn.affine_forward(h, p["mu_w"], p["mu_b"])
    log_var, caches["logvar"] = nn.affine_forward(h, p["logvar_w"], p["logvar_b"])
    sigma = np.exp(0.5 * log_var)
    z = mu + sigma * noise
    caches["reparam"] = (sigma, noise)
    d, caches["dec1"] = nn.affine_forward(z, p["dec1_w"], p["dec1_b"])
    d, caches["bn2"], run2 = nn.batchnorm_forward(
        d, p["bn2_gamma"], p["bn2_beta"], r["bn2_mean"], r["bn2_var"], training=True)
    d, caches["relu2"] = nn.relu_forward(d)
    d, caches["drop2"] = nn.dropout_forward(d, masks[1])
    d, caches["dec2"] = nn.affine_forward(d, p["dec2_w"], p["dec2_b"])
    d, caches["bn3"], run3 = nn.batchnorm_forward(
        d, p["bn3_gamma"], p["bn3_beta"], r["bn3_mean"], r["bn3_var"], training=True)
    d, caches["relu3"] = nn.relu_forward(d)
    d, caches["drop3"] = nn.dropout_forward(d, masks[2])
    logits_2d, caches["out"] = nn.affine_forward(d, p["out_w"], p["out_b"])
    if update_stats:
        r["bn1_mean"], r["bn1_var"] = run1
        r["bn2_mean"], r["bn2_var"] = run2
        r["bn3_mean"], r["bn3_var"] = run3
    return logits_2d.reshape(-1), mu, log_var, caches


@dataclass(frozen=True)
class IbLossBreakdown:
    """Loss components of one batch: total = bce + beta * kl, exactly."""

    bce: float
    kl: float
    beta: float
    total: float

    def __post_init__(self):
        # non-finite components are the trainer's abort path, not an identity failure
        if np.isfinite(self.total) and self.total != self.bce + self.beta * self.kl:
            raise ValidationError("total must equal bce + beta * kl")


def _loss_terms(logits, mu, log_var, y):
    bce, dlogits = nn.bce_with_logits(logits, y)
    kl_per_sample = 0.5 * np.sum(mu**2 + np.exp(log_var) - log_var - 1.0, axis=1)
    return bce, float(np.mean(kl_per_sample)), dlogits


def _draw_noise_and_masks(model, rng, n):
    noise = rng.standard_normal((n, model.latent_dim))
    h1, h2, h3 = model.hidden
    rate = model.dropout_rate if model.training else 0.0
    if rate > 0.0:
        masks = (
            nn.dropout_mask(rng, (n, h1), rate),
            nn.dropout_mask(rng, (n, h2), rate),
            nn.dropout_mask(rng, (n, h3), rate),
        )
    else:
        masks = (None, None, None)
    return noise, masks


def ib_loss(model: VibModel, features, labels, beta: float, noise_seed: int = 0) -> IbLossBreakdown:
    """Evaluate the bottleneck loss on one batch without touching model state.

    Noise (and dropout masks, when the model is in training mode with a
    non-zero rate) are drawn from ``noise_seed``, so identical calls return
    identical values.
    """
    x = as_feature_matrix(features)
    y = as_binary_labels(labels).astype(np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValidationError("features and labels must align")
    if x.shape[0] == 0:
        raise ValidationError("batch must be non-empty")
    rng = np.random.default_rng(noise_seed)
    noise, masks = _draw_noise_and_masks(model, rng, x.shape[0])
    logits, mu, log_var, _ = _forward_train(model, x, noise, masks, update_stats=False)
    bce, kl, _ = _loss_terms(logits, mu, log_var, y)
    return IbLossBreakdown(bce=bce, kl=kl, beta=beta, total=bce + beta * kl)


def _loss_and_grads(model, x, y, beta, noise, masks, update_stats):
    logits, mu, log_var, caches = _forward_train(model, x, noise, masks, update_stats)
    bce, kl, dlogits = _loss_terms(logits, mu, log_var, y)
    n = x.shape[0]
    grads = {}

    d = dlogits.reshape(-1, 1)
    d, grads["out_w"], grads["out_b"] = nn.affine_backward(d, caches["out"])
    d = nn.dropout_backward(d, caches["drop3"])
    d = nn.relu_backward(d, caches["relu3"])
    d, grads["bn3_gamma"], grads["bn3_beta"] = nn.batchnorm_backward(d, caches["bn3"])
    d, grads["dec2_w"], grads["dec2_b"] = nn.affine_backward(d, caches["dec2"])
    d = nn.dropout_backward(d, caches["drop2"])
    d = nn.relu_backward(d, caches["relu2"])
    d, grads["bn2_gamma"], grads["bn2_beta"] = nn.batchnorm_backward(d, caches["bn2"])
    dz, grads["dec1_w"], grads["dec1_b"] = nn.affine_backward(d, caches["dec1"])

    sigma, noise_used = caches["reparam"]
    dmu = dz + beta * mu / n
    dlog_var = dz * noise_used * 0.5 * sigma + beta * 0.5 * (np.exp(log_var) - 1.0) / n

    dh_mu, grads["mu_w"], grads["mu_b"] = nn.affine_backward(dmu, caches["mu"])
    dh_lv, grads["logvar_w"], grads["logvar_b"] = nn.affine_backward(dlog_var, caches["logvar"])
    d = dh_mu + dh_lv
    d = nn.dropout_backward(d, caches["drop1"])
    d = nn.relu_backward(d, caches["relu1"])
    d, grads["bn1_gamma"], grads["bn1_beta"] = nn.batchnorm_backward(d, caches["bn1"])
    _, grads["trunk_w"], grads["trunk_b"] = nn.affine_backward(d, caches["trunk"])

    breakdown = IbLossBreakdown(bce=bce, kl=kl, beta=beta, total=bce + beta * kl)
    return breakdown, grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 1e-5
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    cross_validation_folds: int = 2
    latent_samples: int = 1  # reparameterization draws per example per step
    eval_every: int = 10     # epochs between held-out AUC evaluations
    refit_full: bool = False  # retrain the returned model on all rows after CV

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValidationError("beta must be > 0")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.cross_validation_folds < 2:
            raise ValidationError("cross_validation_folds must be >= 2")
        if self.batch_size < 1 or self.latent_samples < 1 or self.eval_every < 1:
            raise ValidationError("batch_size, latent_samples and eval_every must be >= 1")


def train_model(model: VibModel, x, y, cfg: TrainConfig, *,
                val=None, rng_seed: int = 0):
    """Minibatch Adam on the bottleneck loss.

    Returns ``(model, loss_trace, val_trace)`` where ``loss_trace`` holds
    per-epoch mean loss components and ``val_trace`` holds held-out AUC
    snapshots every ``cfg.eval_every`` epochs (and at the final epoch) when
    ``val`` is given. Aborts on a non-finite loss, naming the batch.
    """
    x = as_feature_matrix(x)
    y = as_binary_labels(y).astype(np.float64)
    n = x.shape[0]
    rng = np.random.default_rng(rng_seed)
    adam = nn.Adam(cfg.learning_rate)
    _ensure_flat_params(model)
    h1, h2, h3 = model.hidden
    grad_flat, grad_views = _alloc_flat(
        _param_shapes(model.feature_dim, model.latent_dim, h1, h2, h3))
    model.training = True
    loss_trace, val_trace = [], []
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        epoch_bce = epoch_kl = epoch_total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch_idx = perm[start : start + cfg.batch_size]
            xb, yb = x[batch_idx], y[batch_idx]
            if cfg.latent_samples == 1:
                noise, masks = _draw_noise_and_masks(model, rng, xb.shape[0])
                breakdown, grads = _loss_and_grads(
                    model, xb, yb, cfg.beta, noise, masks, update_stats=True)
            else:
                breakdown, grads = _multi_sample_step(model, xb, yb, cfg, rng)
            if not np.isfinite(breakdown.total):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch}, batch starting at {start}: "
                    f"bce={breakdown.bce!r} kl={breakdown.kl!r} "
                    f"(batch indices {batch_idx[:8].tolist()}...)"
                )
            for name in PARAM_ORDER:
                grad_views[name][...] = grads[name]
            adam.step(model.param_flat, grad_flat)
            weight = xb.shape[0] / n
            epoch_bce += breakdown.bce * weight
            epoch_kl += breakdown.kl * weight
            epoch_total += breakdown.total * weight
        loss_trace.append(
            {"epoch": epoch, "bce": epoch_bce, "kl": epoch_kl, "total": epoch_total}
        )
        if val is not None and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            model.training = False
            auc = float(roc_auc_score(val[1], predict_probability(model, val[0])))
            model.training = True
            val_trace.append({"epoch": epoch, "auc": auc})
    model.training = False
    return model, loss_trace, val_trace


def _multi_sample_step(model, xb, yb, cfg, rng):
    total_grads: dict[str, np.ndarray] = {}
    bce = kl = 0.0
    for _ in range(cfg.latent_samples):
        noise, masks = _draw_noise_and_masks(model, rng, xb.shape[0])
        breakdown, grads = _loss_and_grads(
            model, xb, yb, cfg.beta, noise, masks, update_stats=True)
        bce += breakdown.bce / cfg.latent_samples
        kl += breakdown.kl / cfg.latent_samples
        for name, g in grads.items():
            if name in total_grads:
                total_grads[name] += g / cfg.latent_samples
            else:
                total_grads[name] = g / cfg.latent_samples
    return IbLossBreakdown(bce=bce, kl=kl, beta=cfg.beta, total=bce + cfg.beta * kl), total_grads


def stratified_folds(y, k: int, seed: int = 0):
    """Deterministic stratified k-fold index split; every fold sees both classes."""
    y = np.asarray(y)
    counts = [int(np.sum(y == c)) for c in (0, 1)]
    if min(counts) < k:
        raise ValidationError(
            f"need at least {k} samples of each class for {k}-fold splits, got {counts}"
        )
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        for i, sample in enumerate(idx):
            folds[i % k].append(int(sample))
    out = []
    for i in range(k):
        val = np.array(sorted(folds[i]))
        train = np.array(sorted(j for f in folds[:i] + folds[i + 1 :] for j in f))
        out.append((train, val))
    return out


def gradient_check(model: VibModel, features, labels, beta: float,
                   noise_seed: int = 0, step: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    Only meaningful on tiny models (enforced: D <= 8, L <= 4) with dropout
    disabled and a fixed noise draw. The relative-error denominator is
    floored at 1e-3 so near-zero gradients are compared absolutely.
    """
    if model.feature_dim > 8 or model.latent_dim > 4:
        raise ValidationError("gradient_check expects a tiny model (D <= 8, L <= 4)")
    if model.dropout_rate != 0.0:
        raise ValidationError("gradient_check requires dropout disabled")
    x = as_feature_matrix(features)
    y = as_binary_labels(labels).astype(np.float64)
    noise = np.random.default_rng(noise_seed).standard_normal((x.shape[0], model.latent_dim))
    masks = (None, None, None)

    _, analytic = _loss_and_grads(model, x, y, beta, noise, masks, update_stats=False)

    def loss_at() -> float:
        logits, mu, log_var, _ = _forward_train(model, x, noise, masks, update_stats=False)
        bce, kl, _ = _loss_terms(logits, mu, log_var, y)
        return bce + beta * kl

    worst = 0.0
    for name in PARAM_ORDER:
        tensor = model.params[name]
        grad = analytic[name]
        it = np.nditer(tensor, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            original = tensor[idx]
            tensor[idx] = original + step
            upper = loss_at()
            tensor[idx] = original - step
            lower = loss_at()
            tensor[idx] = original
            numeric = (upper - lower) / (2.0 * step)
            a = float(grad[idx])
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-3)
            worst = max(worst, rel)
            it.iternext()
    return worst


# ---------------------------------------------------------------------------
# sklearn-style estimator
# ---------------------------------------------------------------------------


class VibClassifier(BaseEstimator):
    """Binary bottleneck classifier with a scikit-learn estimator surface.

    ``fit`` runs stratified cross-validation for held-out AUC reporting and
    keeps the best fold's model (or refits on all rows when
    ``refit_full=True``). ``predict_proba`` is deterministic: it decodes the
    latent mean without sampling.
    """

    def __init__(self, beta=1e-5, learning_rate=1e-3, epochs=200, batch_size=64,
                 seed=0, folds=2, latent_dim=None, hidden_sizes=None,
                 dropout_rate=0.5, latent_samples=1, eval_every=10,
                 refit_full=False):
        self.beta = beta
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed
        self.folds = folds
        self.latent_dim = latent_dim
        self.hidden_sizes = hidden_sizes
        self.dropout_rate = dropout_rate
        self.latent_samples = latent_samples
        self.eval_every = eval_every
        self.refit_full = refit_full

    def _config(self) -> TrainConfig:
        return TrainConfig(
            beta=self.beta, learning_rate=self.learning_rate, epochs=self.epochs,
            batch_size=self.batch_size, seed=self.seed,
            cross_validation_folds=self.folds, latent_samples=self.latent_samples,
            eval_every=self.eval_every, refit_full=self.refit_full,
        )

    def fit(self, X, y):
        X = as_feature_matrix(X)
        y = as_binary_labels(y)
        if X.shape[0] != y.shape[0]:
            raise ValidationError("X and y must have the same number of rows")
        if np.unique(y).size < 2:
            raise ValidationError("training data contains a single class")
        counts = np.bincount(y, minlength=2)
        if max(counts) > 10 * max(1, min(counts)):
            logger.warning(
                "class imbalance beyond 10:1 (counts %s); training proceeds unweighted",
                counts.tolist(),
            )
        cfg = self._config()
        dim = X.shape[1]

        def fresh_model(seed):
            return init_model(
                dim, latent_dim=self.latent_dim, hidden=self.hidden_sizes,
                dropout_rate=self.dropout_rate, seed=seed,
            )

        self.fold_aucs_ = []
        self.fold_traces_ = []
        fold_models = []
        for k, (train_idx, val_idx) in enumerate(
            stratified_folds(y, cfg.cross_validation_folds, seed=cfg.seed)
        ):
            model, trace, val_trace = train_model(
                fresh_model(cfg.seed + 101 + k), X[train_idx], y[train_idx], cfg,
                val=(X[val_idx], y[val_idx]), rng_seed=cfg.seed + 201 + k,
            )
            self.fold_aucs_.append(val_trace[-1]["auc"])
            self.fold_traces_.append({"loss": trace, "val": val_trace})
            fold_models.append(model)

        if cfg.refit_full:
            model, trace, _ = train_model(
                fresh_model(cfg.seed + 100), X, y, cfg, rng_seed=cfg.seed + 200)
            self.model_ = model
            self.loss_trace_ = trace
        else:
            best = int(np.argmax(self.fold_aucs_))
            self.model_ = fold_models[best]
            self.loss_trace_ = self.fold_traces_[best]["loss"]
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = dim
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise ValidationError("this VibClassifier instance is not fitted yet")

    def predict_proba(self, X):
        self._check_fitted()
        p1 = np.asarray(predict_probability(self.model_, as_feature_matrix(X)))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(np.int64)

    def acceptance_probability(self, X):
        """Probability of the single-source class, as a flat vector."""
        return self.predict_proba(X)[:, 1]


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_model(model: VibModel, path) -> None:
    h1, h2, h3 = model.hidden
    header = _CKPT_HEADER.pack(
        CHECKPOINT_MAGIC, CHECKPOINT_VERSION, model.feature_dim, model.latent_dim,
        h1, h2, h3, model.dropout_rate,
    )
    blobs = [header]
    for name in PARAM_ORDER:
        blobs.append(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())
    for name in RUNNING_ORDER:
        blobs.append(np.ascontiguousarray(model.running[name], dtype="<f8").tobytes())
    atomic_write_bytes(path, b"".join(blobs))


def load_model(path) -> VibModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CKPT_HEADER.size:
        raise FormatError("header", "file smaller than the checkpoint header")
    magic, version, dim, latent, h1, h2, h3, dropout = _CKPT_HEADER.unpack_from(raw)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError("magic", f"bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise FormatError("version", f"unsupported version {version}")
    shapes = _param_shapes(dim, latent, h1, h2, h3)
    running_shapes = {
        "bn1_mean": (h1,), "bn1_var": (h1,),
        "bn2_mean": (h2,), "bn2_var": (h2,),
        "bn3_mean": (h3,), "bn3_var": (h3,),
    }
    expected = sum(int(np.prod(s)) for s in shapes.values())
    expected += sum(int(np.prod(s)) for s in running_shapes.values())
    payload = raw[_CKPT_HEADER.size :]
    if len(payload) != expected * 8:
        raise FormatError(
            "payload",
            f"expected {expected * 8} parameter bytes, found {len(payload)}",
        )
    flat = np.frombuffer(payload, dtype="<f8")
    params, running = {}, {}
    offset = 0
    for name in PARAM_ORDER:
        size = int(np.prod(shapes[name]))
        params[name] = flat[offset : offset + size].reshape(shapes[name]).copy()
        offset += size
    for name in RUNNING_ORDER:
        size = int(np.prod(running_shapes[name]))
        running[name] = flat[offset : offset + size].reshape(running_shapes[name]).copy()
        offset += size
    return VibModel(dim, latent, (h1, h2, h3), dropout, params, running, training=False)
