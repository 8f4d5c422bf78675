"""Grid sweeps over threshold, compression weight, and window length.

Each sweep row evaluates the filter on a synthetic token corpus whose
ground truth is each window's source purity. Analog metrics mirror the
response-level ones: a decision is *correct* when accept/reject matches
purity, *uncertain* when the ensemble score sits within a small band of
the threshold; the accuracy / uncertain-rate pair feeds the base-2 response
entropy, and the mean negative log-probability of the decisions taken
plays the role of answer-level uncertainty.
"""

import itertools
import time
from dataclasses import dataclass

import numpy as np

from . import windows as win
from .filtering import LayerEnsemble, score_windows
from .uncertainty import ResponseTally, total_response_entropy
from .validation import ValidationError

DEFAULT_UNCERTAINTY_BAND = 0.02
SWEEP_KEYS = ("xi", "beta", "window_len")


def make_eval_contexts(n_contexts: int, windows_per_context: int,
                       window_len: int = win.DEFAULT_WINDOW_LEN,
                       mixed_fraction: float = 0.5, seed: int = 0):
    """Synthetic contexts built from window-aligned pure or mixed segments."""
    if n_contexts < 1 or windows_per_context < 1:
        raise ValidationError("need at least one context and one window")
    rng = np.random.default_rng(seed)
    block = max(1, window_len // 2)
    contexts = []
    counter = 0
    for _ in range(n_contexts):
        tokens, tags = [], []
        for _ in range(windows_per_context):
            mixed = rng.random() < mixed_fraction and window_len > 1
            if mixed:
                for pos in range(window_len):
                    tags.append(win.SUPPLEMENTARY if (pos // block) % 2 == 0 else win.CONFLICTING)
                    tokens.append(f"t{counter}")
                    counter += 1
            else:
                tag = win.SUPPLEMENTARY if rng.random() < 0.5 else win.CONFLICTING
                for _ in range(window_len):
                    tags.append(tag)
                    tokens.append(f"t{counter}")
                    counter += 1
        contexts.append(win.TokenSequence(tuple(tokens), tuple(tags)))
    return contexts


@dataclass(frozen=True)
class ScoredCorpus:
    """Raw ensemble scores and purity ground truth for one (beta, window_len) setting."""

    p_hat: np.ndarray
    pure: np.ndarray  # bool, True when the window is single-source
    scoring_seconds: float

    @property
    def n_windows(self) -> int:
        return int(self.p_hat.size)


def score_corpus(ensemble: LayerEnsemble, contexts, feature_source,
                 window_len: int = win.DEFAULT_WINDOW_LEN) -> ScoredCorpus:
    """Score every window of every context; only the scoring calls are timed."""
    p_hats, pures = [], []
    elapsed = 0.0
    for context in contexts:
        windows = win.partition_windows(context, length=window_len)
        feats = np.stack([feature_source.window_features(context, w) for w in windows])
        start = time.perf_counter()
        decisions = score_windows(ensemble, feats, windows)
        elapsed += time.perf_counter() - start
        p_hats.extend(d.p_hat for d in decisions)
        pures.extend(not w.mixed for w in windows)
    return ScoredCorpus(
        p_hat=np.array(p_hats), pure=np.array(pures, dtype=bool), scoring_seconds=elapsed)


def decision_metrics(scored: ScoredCorpus, xi: float,
                     uncertainty_band: float = DEFAULT_UNCERTAINTY_BAND) -> dict:
    """Accuracy / uncertainty analogs of one threshold setting."""
    accepted = scored.p_hat >= xi
    uncertain = np.abs(scored.p_hat - xi) < uncertainty_band
    correct = accepted == scored.pure
    acc = float(np.mean(correct & ~uncertain))
    uar = float(np.mean(uncertain))
    tre = total_response_entropy(ResponseTally(acc=acc, uar=uar))
    p_choice = np.where(accepted, scored.p_hat, 1.0 - scored.p_hat)
    mean_psi = float(np.mean(-np.log(np.clip(p_choice, 1e-12, None))))
    return {"acc": acc, "uar": uar, "tre": tre, "mean_psi": mean_psi}


def run_sweep(grid: dict, *, contexts, source_factory, ensemble_factory,
              defaults: dict | None = None,
              uncertainty_band: float = DEFAULT_UNCERTAINTY_BAND) -> list[dict]:
    """Evaluate every grid combination; one output row per setting.

    ``grid`` maps any of {"xi", "beta", "window_len"} to value lists.
    ``source_factory(window_len)`` returns a fresh feature source and
    ``ensemble_factory(beta)`` a trained ensemble (called once per beta).
    Scoring happens once per (beta, window_len); thresholds reuse the scores,
    exactly as a deployed filter would.
    """
    if not grid:
        raise ValidationError("sweep grid must be non-empty")
    unknown = set(grid) - set(SWEEP_KEYS)
    if unknown:
        raise ValidationError(f"unknown sweep keys {sorted(unknown)}; expected {SWEEP_KEYS}")
    defaults = {"xi": 0.68, "beta": 1e-5, "window_len": win.DEFAULT_WINDOW_LEN, **(defaults or {})}
    xis = list(grid.get("xi", [defaults["xi"]]))
    betas = list(grid.get("beta", [defaults["beta"]]))
    lens = list(grid.get("window_len", [defaults["window_len"]]))

    rows = []
    for beta, window_len in itertools.product(betas, lens):
        ensemble = ensemble_factory(beta)
        scored = score_corpus(ensemble, contexts, source_factory(int(window_len)),
                              window_len=int(window_len))
        for xi in xis:
            metrics = decision_metrics(scored, float(xi), uncertainty_band)
            rows.append({
                "xi": float(xi), "beta": float(beta), "window_len": int(window_len),
                **metrics,
                "n_windows": scored.n_windows,
                "scoring_seconds": scored.scoring_seconds,
                "per_window_ms": 1000.0 * scored.scoring_seconds / scored.n_windows,
            })
    return rows


def scoring_cost_curve(ensemble: LayerEnsemble, feature_dim: int, counts,
                       seed: int = 0, repeats: int = 5) -> list[dict]:
    """Per-window scoring cost at increasing window counts (min over repeats).

    Feature generation is excluded; this isolates the bottleneck scoring
    cost, which is expected to be constant per window.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for count in counts:
        feats = rng.standard_normal((int(count), ensemble.n_layers, feature_dim))
        score_windows(ensemble, feats)  # warm-up
        best = min(
            _timed_scoring(ensemble, feats) for _ in range(repeats)
        )
        rows.append({
            "n_windows": int(count),
            "seconds": best,
            "per_window_ms": 1000.0 * best / int(count),
        })
    return rows


def _timed_scoring(ensemble, feats) -> float:
    start = time.perf_counter()
    score_windows(ensemble, feats)
    return time.perf_counter() - start
