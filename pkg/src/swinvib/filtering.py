"""Inference-time window filtering and prompt assembly.

An ensemble of per-layer bottlenecks scores every window of a retrieved
context; the weighted mean acceptance probability is compared (inclusively)
against the threshold ``xi`` and the surviving windows are concatenated
with the query into the final prompt. Scoring decodes each layer's latent
mean directly, so it is deterministic and batchable across windows.
"""

from dataclasses import dataclass

import numpy as np

from . import windows as win
from .bottleneck import VibModel, decode, encode, load_model
from .validation import ValidationError

DEFAULT_XI = 0.68
FALLBACK_POLICIES = ("keep-top-1", "empty-context", "pass-through")


@dataclass(frozen=True)
class LayerEnsemble:
    """Trained per-layer bottlenecks with aggregation weights and threshold."""

    models: tuple[VibModel, ...]
    weights: np.ndarray
    xi: float = DEFAULT_XI

    def __post_init__(self):
        if not self.models:
            raise ValidationError("an ensemble needs at least one model")
        dims = {(m.feature_dim, m.latent_dim) for m in self.models}
        if len(dims) != 1:
            raise ValidationError(f"models disagree on (D, L): {sorted(dims)}")
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.shape != (len(self.models),):
            raise ValidationError("weights must align with models")
        if np.any(weights < 0.0) or abs(float(weights.sum()) - 1.0) > 1e-9:
            raise ValidationError("weights must be non-negative and sum to 1")
        # closed interval: xi=0 accepts everything, xi=1 forces the fallback
        if not 0.0 <= self.xi <= 1.0:
            raise ValidationError(f"xi must lie in [0, 1], got {self.xi}")
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_models(cls, models, weights=None, xi: float = DEFAULT_XI) -> "LayerEnsemble":
        models = list(models)
        if weights is None:
            weights = np.full(len(models), 1.0 / max(len(models), 1))
        return cls(models=tuple(models), weights=np.asarray(weights, dtype=np.float64), xi=xi)

    @classmethod
    def from_checkpoints(cls, paths, weights=None, xi: float = DEFAULT_XI) -> "LayerEnsemble":
        return cls.from_models([load_model(p) for p in paths], weights=weights, xi=xi)

    @property
    def n_layers(self) -> int:
        return len(self.models)

    @property
    def feature_dim(self) -> int:
        return self.models[0].feature_dim


@dataclass(frozen=True)
class FilterDecision:
    """Per-window scoring outcome: layer probabilities, their weighted mean, verdict."""

    window: win.WindowSpec | None
    per_layer_probs: np.ndarray
    p_hat: float
    accepted: bool


def _layer_probability(model: VibModel, feats: np.ndarray) -> np.ndarray:
    mu, _ = encode(model, feats)  # latent mean only; sampling is skipped at inference
    return np.atleast_1d(decode(model, mu))


def score_window(ensemble: LayerEnsemble, features, window=None) -> FilterDecision:
    """Score one window from its per-layer feature stack of shape (N, D)."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape != (ensemble.n_layers, ensemble.feature_dim):
        raise ValidationError(
            f"expected features of shape {(ensemble.n_layers, ensemble.feature_dim)}, "
            f"got {feats.shape}"
        )
    probs = np.array([
        _layer_probability(model, feats[n])[0]
        for n, model in enumerate(ensemble.models)
    ])
    p_hat = float(probs @ ensemble.weights)
    return FilterDecision(window=window, per_layer_probs=probs, p_hat=p_hat,
                          accepted=p_hat >= ensemble.xi)


def score_windows(ensemble: LayerEnsemble, features, windows=None) -> list[FilterDecision]:
    """Batched scoring of K windows from a (K, N, D) feature stack.

    One forward pass per layer over all windows; per-window cost is
    independent of K.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 3 or feats.shape[1:] != (ensemble.n_layers, ensemble.feature_dim):
        raise ValidationError(
            f"expected a (K, {ensemble.n_layers}, {ensemble.feature_dim}) stack, "
            f"got {feats.shape}"
        )
    k = feats.shape[0]
    probs = np.empty((k, ensemble.n_layers))
    for n, model in enumerate(ensemble.models):
        probs[:, n] = _layer_probability(model, feats[:, n, :])
    p_hat = probs @ ensemble.weights
    accepted = p_hat >= ensemble.xi
    if windows is None:
        windows = [None] * k
    return [
        FilterDecision(window=w, per_layer_probs=probs[i], p_hat=float(p_hat[i]),
                       accepted=bool(accepted[i]))
        for i, w in enumerate(windows)
    ]


@dataclass(frozen=True)
class FilterResult:
    decisions: tuple[FilterDecision, ...]
    accepted_windows: tuple[win.WindowSpec, ...]
    prompt: str
    fallback_used: bool


def assemble_prompt(query: str, context: win.TokenSequence, accepted, separator: str = " ") -> str:
    """Query, then the accepted windows' tokens in original order."""
    pieces = [query]
    for window in accepted:
        pieces.append(" ".join(str(t) for t in context.window_tokens(window)))
    return separator.join(pieces)


def filter_context(
    ensemble: LayerEnsemble,
    query: str,
    context: win.TokenSequence,
    feature_source,
    *,
    window_len: int = win.DEFAULT_WINDOW_LEN,
    stride: int | None = None,
    fallback: str = "keep-top-1",
    separator: str = " ",
) -> FilterResult:
    """Partition, score, filter, and assemble the prompt for one context.

    When no window clears ``xi`` the fallback policy applies: ``keep-top-1``
    keeps the single highest-scoring window, ``empty-context`` keeps none,
    ``pass-through`` keeps all windows unfiltered.
    """
    if fallback not in FALLBACK_POLICIES:
        raise ValidationError(f"unknown fallback policy {fallback!r}; use one of {FALLBACK_POLICIES}")
    if len(context) == 0:
        raise ValidationError("context must be non-empty")
    windows = win.partition_windows(context, length=window_len, stride=stride)
    feats = np.stack([feature_source.window_features(context, w) for w in windows])
    decisions = score_windows(ensemble, feats, windows)
    accepted = [d.window for d in decisions if d.accepted]
    fallback_used = False
    if not accepted:
        fallback_used = True
        if fallback == "keep-top-1":
            best = max(decisions, key=lambda d: d.p_hat)
            accepted = [best.window]
        elif fallback == "pass-through":
            accepted = [d.window for d in decisions]
        else:  # empty-context
            accepted = []
    prompt = assemble_prompt(query, context, accepted, separator=separator)
    return FilterResult(
        decisions=tuple(decisions),
        accepted_windows=tuple(accepted),
        prompt=prompt,
        fallback_used=fallback_used,
    )


def decisions_to_records(decisions) -> list[dict]:
    """JSON-lines friendly form: {window_index, per_layer_probs, p_hat, accepted}."""
    records = []
    for d in decisions:
        records.append({
            "window_index": None if d.window is None else d.window.window_index,
            "per_layer_probs": [float(p) for p in d.per_layer_probs],
            "p_hat": d.p_hat,
            "accepted": d.accepted,
        })
    return records
