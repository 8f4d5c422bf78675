"""Backbone loading and token-to-id mapping.

``tiny:gpt2`` builds a seeded, randomly initialized GPT-2-architecture
model locally (no hub access needed) with a deterministic hash
vocabulary; any other identifier is fetched with the transformers auto
classes, which requires hub connectivity.
"""

import hashlib

import torch
from transformers import GPT2Config, GPT2LMHeadModel

TINY_PREFIX = "tiny:"


class HashTokenizer:
    """Stable whitespace-token vocabulary via hashing; id 0 is reserved as BOS."""

    def __init__(self, vocab_size: int):
        if vocab_size < 8:
            raise ValueError("vocab_size must be at least 8")
        self.vocab_size = vocab_size
        self.bos_token_id = 0

    def token_id(self, token) -> int:
        digest = hashlib.sha1(str(token).encode("utf-8")).digest()
        return 1 + int.from_bytes(digest[:4], "little") % (self.vocab_size - 1)

    def encode_tokens(self, tokens) -> tuple[list[int], list[tuple[int, int]]]:
        """Per-token encoding; spans are trivially one id per token."""
        ids = [self.token_id(t) for t in tokens]
        return ids, [(i, i + 1) for i in range(len(ids))]

    def encode_text(self, text: str) -> list[int]:
        return self.encode_tokens(text.split())[0]


class HubTokenizerAdapter:
    """Per-token encoding through a real tokenizer, tracking id spans."""

    def __init__(self, tokenizer):
        self.tokenizer = tokenizer
        self.bos_token_id = tokenizer.bos_token_id

    def encode_tokens(self, tokens):
        ids: list[int] = []
        spans: list[tuple[int, int]] = []
        for i, token in enumerate(tokens):
            piece = (" " if i else "") + str(token)
            piece_ids = self.tokenizer(piece, add_special_tokens=False)["input_ids"]
            spans.append((len(ids), len(ids) + len(piece_ids)))
            ids.extend(piece_ids)
        return ids, spans

    def encode_text(self, text: str) -> list[int]:
        return self.tokenizer(text, add_special_tokens=False)["input_ids"]


def load_backbone(model_id: str, *, tiny_layers=4, tiny_heads=4, tiny_embd=32,
                  tiny_vocab=211, max_positions=512, seed=0, device="cpu"):
    """Returns ``(model, tokenizer, n_layers)`` with attention capture enabled."""
    if model_id.startswith(TINY_PREFIX):
        torch.manual_seed(seed)
        config = GPT2Config(
            vocab_size=tiny_vocab,
            n_positions=max_positions,
            n_embd=tiny_embd,
            n_layer=tiny_layers,
            n_head=tiny_heads,
            bos_token_id=0,
            eos_token_id=0,
            attn_implementation="eager",
        )
        model = GPT2LMHeadModel(config)
        tokenizer = HashTokenizer(tiny_vocab)
        n_layers = tiny_layers
    else:
        from transformers import AutoModelForCausalLM, AutoTokenizer

        model = AutoModelForCausalLM.from_pretrained(
            model_id, attn_implementation="eager")
        tokenizer = HubTokenizerAdapter(AutoTokenizer.from_pretrained(model_id))
        n_layers = model.config.num_hidden_layers
    model.to(device)
    model.eval()
    return model, tokenizer, n_layers
