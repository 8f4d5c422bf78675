"""Attention capture and token-likelihood extraction from a causal LM.

Windows of the corpus contexts run through the frozen backbone; per-layer
attention maps are head-averaged, flattened and padded to the feature
dimension, then written as training (``SVF1``) or inference (``SVQ1``)
feature files the downstream filter trains on. Token log-likelihoods of
generated or teacher-forced answers are captured in natural log for the
mean answer-uncertainty metric.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .backbones import load_backbone
from .formats import file_entry, write_feature_file, write_manifest

logger = logging.getLogger(__name__)

MODES = ("window-isolated", "full-context-sliced")
ROW_SUM_TOL = 1e-4


@dataclass
class ExtractorConfig:
    model: str = "tiny:gpt2"
    device: str = "cpu"
    mode: str = "window-isolated"
    window_len: int = 7
    feature_dim: int | None = None  # defaults to window_len**2
    block: int = 4
    mixed_fraction: float = 0.5
    seed: int = 0
    max_new_tokens: int = 8
    tiny_layers: int = 4
    tiny_heads: int = 4
    tiny_embd: int = 32
    tiny_vocab: int = 211

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")

    @property
    def dim(self) -> int:
        return self.feature_dim if self.feature_dim else self.window_len**2


def mean_heads(attention: np.ndarray) -> np.ndarray:
    """Arithmetic mean over the head axis of a (heads, w, w) stack."""
    att = np.asarray(attention, dtype=np.float64)
    if att.ndim != 3 or att.shape[1] != att.shape[2]:
        raise ValueError(f"expected (heads, w, w), got {att.shape}")
    return att.mean(axis=0)


def featurize(matrix: np.ndarray, dim: int) -> np.ndarray:
    """Row-major flatten, zero-padded or truncated to ``dim``."""
    flat = np.asarray(matrix, dtype=np.float64).reshape(-1)
    if flat.size >= dim:
        return flat[:dim].copy()
    out = np.zeros(dim)
    out[: flat.size] = flat
    return out


class Extractor:
    def __init__(self, cfg: ExtractorConfig):
        self.cfg = cfg
        self.model, self.tokenizer, self.n_layers = load_backbone(
            cfg.model,
            tiny_layers=cfg.tiny_layers, tiny_heads=cfg.tiny_heads,
            tiny_embd=cfg.tiny_embd, tiny_vocab=cfg.tiny_vocab,
            seed=cfg.seed, device=cfg.device,
        )

    # -- attention ---------------------------------------------------------

    def _attentions(self, ids: list[int]) -> list[np.ndarray]:
        """Per-layer (heads, w, w) attention probabilities for one id sequence."""
        tensor = torch.tensor([ids], dtype=torch.long, device=self.cfg.device)
        with torch.no_grad():
            out = self.model(tensor, output_attentions=True)
        if not out.attentions:
            raise RuntimeError("backbone returned no attention maps")
        stacks = []
        for layer, att in enumerate(out.attentions):
            if att is None:
                raise RuntimeError(f"attention capture unavailable for layer {layer}")
            arr = att[0].to(torch.float64).cpu().numpy()
            row_sums = arr.sum(axis=-1)
            worst = float(np.abs(row_sums - 1.0).max())
            if worst > ROW_SUM_TOL:
                raise RuntimeError(
                    f"layer {layer} attention rows deviate from 1 by {worst:.2e}")
            stacks.append(arr)
        return stacks

    def window_feature_stack(self, tokens, start: int, length: int) -> np.ndarray:
        """(n_layers, dim) features of one window of ``tokens``."""
        cfg = self.cfg
        if cfg.mode == "window-isolated":
            ids, _ = self.tokenizer.encode_tokens(tokens[start : start + length])
            per_layer = self._attentions(ids)
        else:
            ids, spans = self.tokenizer.encode_tokens(tokens)
            lo = spans[start][0]
            hi = spans[start + length - 1][1]
            per_layer = [att[:, lo:hi, lo:hi] for att in self._attentions(ids)]
        return np.stack([featurize(mean_heads(att), cfg.dim) for att in per_layer])

    # -- training features (one random labeled window per sample) ----------

    def extract_training_features(self, corpus_rows, out_dir) -> tuple[Path, dict]:
        cfg = self.cfg
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        rng = np.random.default_rng(cfg.seed)
        per_layer: list[list[np.ndarray]] = [[] for _ in range(self.n_layers)]
        labels: list[int] = []
        report = {"processed": 0, "skipped": 0, "per_label_counts": {"0": 0, "1": 0}}

        for row in corpus_rows:
            tokens, flags = self._draw_variant(row, rng)
            if len(tokens) < cfg.window_len:
                logger.warning("skipping sample %s: %d tokens < window length %d",
                               row.get("id"), len(tokens), cfg.window_len)
                report["skipped"] += 1
                continue
            start = int(rng.integers(0, len(tokens) - cfg.window_len + 1))
            label = int(len(set(flags[start : start + cfg.window_len])) == 1)
            stack = self.window_feature_stack(tokens, start, cfg.window_len)
            for layer in range(self.n_layers):
                per_layer[layer].append(stack[layer])
            labels.append(label)
            report["processed"] += 1
            report["per_label_counts"][str(label)] += 1

        if not labels:
            raise ValueError("no usable samples in the corpus")
        label_arr = np.array(labels, dtype=np.uint8)
        files = []
        for layer in range(self.n_layers):
            path = out_dir / f"train_layer{layer:02d}.svf"
            write_feature_file(path, layer, np.stack(per_layer[layer]), label_arr)
            files.append(file_entry(path, out_dir, layer, len(labels)))
        manifest_path = out_dir / "manifest.json"
        write_manifest(
            manifest_path,
            model_name=cfg.model, n_layers=self.n_layers, feature_dim=cfg.dim,
            window_len=cfg.window_len, files=files,
            extra={"build_report": report, "mode": cfg.mode},
        )
        return manifest_path, report

    def _draw_variant(self, row, rng):
        sup = [str(t) for t in self._tokens(row, "supplementary_tokens")]
        con = [str(t) for t in self._tokens(row, "conflicting_tokens")]
        u = rng.random()
        if u < self.cfg.mixed_fraction:
            return self._interleave(sup, con)
        if u < self.cfg.mixed_fraction + (1.0 - self.cfg.mixed_fraction) / 2.0:
            return sup, ["s"] * len(sup)
        return con, ["c"] * len(con)

    @staticmethod
    def _tokens(row, field):
        value = row[field]
        return value.split() if isinstance(value, str) else list(value)

    def _interleave(self, sup, con):
        tokens, flags = [], []
        cursors = [0, 0]
        sources = ((sup, "s"), (con, "c"))
        turn = 0
        while cursors[0] < len(sup) or cursors[1] < len(con):
            seq, flag = sources[turn]
            pos = cursors[turn]
            if pos < len(seq):
                end = min(pos + self.cfg.block, len(seq))
                tokens.extend(seq[pos:end])
                flags.extend(flag * (end - pos))
                cursors[turn] = end
            turn = 1 - turn
        return tokens, flags

    # -- inference features (every window of one context) ------------------

    def extract_inference_features(self, tokens, out_dir) -> Path:
        cfg = self.cfg
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        tokens = [str(t) for t in tokens]
        if not tokens:
            raise ValueError("context is empty")
        windows = [(s, min(cfg.window_len, len(tokens) - s))
                   for s in range(0, len(tokens), cfg.window_len)]
        stacks = np.stack([
            self.window_feature_stack(tokens, start, length)
            for start, length in windows
        ])
        files = []
        for layer in range(self.n_layers):
            path = out_dir / f"infer_layer{layer:02d}.svq"
            write_feature_file(path, layer, stacks[:, layer, :])
            files.append(file_entry(path, out_dir, layer, len(windows)))
        manifest_path = out_dir / "infer_manifest.json"
        write_manifest(
            manifest_path,
            model_name=cfg.model, n_layers=self.n_layers, feature_dim=cfg.dim,
            window_len=cfg.window_len, files=files,
            extra={"n_windows": len(windows), "mode": cfg.mode},
        )
        return manifest_path

    # -- token log-likelihoods ---------------------------------------------

    def _log_softmax(self, ids: list[int]) -> torch.Tensor:
        tensor = torch.tensor([ids], dtype=torch.long, device=self.cfg.device)
        with torch.no_grad():
            logits = self.model(tensor).logits[0].to(torch.float64)
        return torch.log_softmax(logits, dim=-1)

    def answer_logprobs(self, prompt: str, answer: str | None = None) -> dict:
        """Natural-log token probabilities of a forced or greedily generated answer."""
        bos = self.tokenizer.bos_token_id
        prefix = [bos] if bos is not None else []
        prompt_ids = prefix + self.tokenizer.encode_text(prompt)
        if not prompt_ids:
            raise ValueError("prompt produced no tokens and no BOS is available")
        if answer is not None:
            answer_ids = self.tokenizer.encode_text(answer)
            if not answer_ids:
                raise ValueError("forced answer produced no tokens")
            logprobs = self._log_softmax(prompt_ids + answer_ids)
            values = [
                float(logprobs[len(prompt_ids) - 1 + k, tok])
                for k, tok in enumerate(answer_ids)
            ]
            return {"token_ids": answer_ids, "logprobs": values}
        ids = list(prompt_ids)
        token_ids, values = [], []
        for _ in range(self.cfg.max_new_tokens):
            logprobs = self._log_softmax(ids)
            nxt = int(torch.argmax(logprobs[-1]))
            values.append(float(logprobs[-1, nxt]))
            token_ids.append(nxt)
            ids.append(nxt)
        if not token_ids:
            raise ValueError("generation produced no tokens")
        return {"token_ids": token_ids, "logprobs": values}

    def extract_answer_logprobs(self, records) -> list[dict]:
        """One result (or error entry) per {id, prompt, answer?} record."""
        results = []
        for row in records:
            try:
                out = self.answer_logprobs(row["prompt"], row.get("answer"))
                results.append({"id": row.get("id"), **out})
            except Exception as exc:  # keep the batch going, record the failure
                logger.warning("logprob extraction failed for %s: %s", row.get("id"), exc)
                results.append({"id": row.get("id"), "error": str(exc)})
        return results


def read_corpus(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
