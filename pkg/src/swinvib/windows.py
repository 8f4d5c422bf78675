"""Token-level context segmentation, mixing, and source labeling.

A token is whatever unit the caller supplies (whitespace words by default,
model-tokenizer ids from an upstream extractor); every token carries a
source tag. Mixed contexts interleave the two sources in fixed-size blocks
so that, at the default block/window sizes, no window can be single-source.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .validation import ValidationError

logger = logging.getLogger(__name__)

SUPPLEMENTARY = "supplementary"
CONFLICTING = "conflicting"
_TAGS = (SUPPLEMENTARY, CONFLICTING)

DEFAULT_WINDOW_LEN = 7
DEFAULT_BLOCK = 4


@dataclass(frozen=True)
class TokenSequence:
    """Ordered tokens with a per-token source tag."""

    tokens: tuple
    tags: tuple

    def __post_init__(self):
        tokens = tuple(self.tokens)
        tags = tuple(self.tags)
        if len(tokens) != len(tags):
            raise ValidationError(
                f"tokens and tags must have equal length ({len(tokens)} != {len(tags)})"
            )
        bad = {t for t in tags if t not in _TAGS}
        if bad:
            raise ValidationError(f"unknown source tags {sorted(bad)}; expected one of {_TAGS}")
        object.__setattr__(self, "tokens", tokens)
        object.__setattr__(self, "tags", tags)

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_source(cls, tokens, tag: str) -> "TokenSequence":
        tokens = tuple(tokens)
        return cls(tokens, (tag,) * len(tokens))

    def window_tokens(self, window: "WindowSpec") -> tuple:
        return self.tokens[window.start : window.start + window.length]

    def window_tags(self, window: "WindowSpec") -> tuple:
        return self.tags[window.start : window.start + window.length]


@dataclass(frozen=True)
class WindowSpec:
    """A contiguous token span; ``mixed`` records whether its tags disagree."""

    start: int
    length: int
    window_index: int
    mixed: bool

    def __post_init__(self):
        if self.start < 0 or self.length < 1:
            raise ValidationError(f"invalid window span start={self.start} length={self.length}")


@dataclass(frozen=True)
class LabeledWindow:
    window: WindowSpec
    label: int  # 1 when every covered token shares one source tag


def tokenize(text: str) -> list[str]:
    """Default tokenizer: whitespace splitting."""
    return text.split()


def interleave_mixed(
    supplementary: TokenSequence,
    conflicting: TokenSequence,
    block: int = DEFAULT_BLOCK,
) -> TokenSequence:
    """Alternate fixed-size blocks from the two sources, supplementary first.

    When one source runs out its turns are skipped and the other's remainder
    is appended, so the output always holds every input token in order.
    """
    if block < 1:
        raise ValidationError(f"block must be >= 1, got {block}")
    if len(supplementary) == 0 and len(conflicting) == 0:
        raise ValidationError("at least one input sequence must be non-empty")
    tokens: list = []
    tags: list = []
    cursors = [0, 0]
    sources = (supplementary, conflicting)
    turn = 0
    while cursors[0] < len(sources[0]) or cursors[1] < len(sources[1]):
        src = sources[turn]
        pos = cursors[turn]
        if pos < len(src):
            end = min(pos + block, len(src))
            tokens.extend(src.tokens[pos:end])
            tags.extend(src.tags[pos:end])
            cursors[turn] = end
        turn = 1 - turn
    return TokenSequence(tuple(tokens), tuple(tags))


def _window_from_span(seq: TokenSequence, start: int, length: int, index: int) -> WindowSpec:
    tags = seq.tags[start : start + length]
    return WindowSpec(start=start, length=length, window_index=index, mixed=len(set(tags)) > 1)


def random_window(seq: TokenSequence, length: int = DEFAULT_WINDOW_LEN, seed=0) -> WindowSpec:
    """Uniformly random window of exactly ``length`` tokens; deterministic per seed."""
    if length < 1:
        raise ValidationError(f"window length must be >= 1, got {length}")
    if len(seq) < length:
        raise ValidationError(
            f"sequence of {len(seq)} tokens is shorter than window length {length}; "
            "pad the sequence or skip this sample"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    start = int(rng.integers(0, len(seq) - length + 1))
    return _window_from_span(seq, start, length, 0)


def partition_windows(
    seq: TokenSequence,
    length: int = DEFAULT_WINDOW_LEN,
    stride: int | None = None,
) -> list[WindowSpec]:
    """Cover the sequence with windows of ``length`` tokens.

    The default stride equals the length (non-overlapping partition); a final
    shorter window is kept rather than dropped or padded.
    """
    if length < 1:
        raise ValidationError(f"window length must be >= 1, got {length}")
    if len(seq) == 0:
        raise ValidationError("cannot window an empty sequence")
    stride = length if stride is None else stride
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    windows = []
    index = 0
    for start in range(0, len(seq), stride):
        span = min(length, len(seq) - start)
        windows.append(_window_from_span(seq, start, span, index))
        index += 1
    return windows


def label_window(seq: TokenSequence, window: WindowSpec) -> LabeledWindow:
    """Label 1 when the window's tokens come from a single source, else 0."""
    if window.start + window.length > len(seq):
        raise ValidationError("window extends past the end of its sequence")
    tags = seq.window_tags(window)
    return LabeledWindow(window=window, label=int(len(set(tags)) == 1))


@dataclass(frozen=True)
class CorpusSample:
    """One corpus row: a query with its supplementary and conflicting contexts."""

    id: str
    query: str
    supplementary: TokenSequence
    conflicting: TokenSequence


def _coerce_tokens(value, field: str):
    if isinstance(value, str):
        return tokenize(value)
    if isinstance(value, list):
        return value
    raise ValidationError(f"{field} must be a token list or a whitespace-separated string")


def read_corpus(path):
    """Iterate JSON-lines rows {id, query, supplementary_tokens, conflicting_tokens}."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"corpus line {lineno} is not valid JSON: {exc}") from exc
            missing = {"id", "query", "supplementary_tokens", "conflicting_tokens"} - row.keys()
            if missing:
                raise ValidationError(f"corpus line {lineno} is missing fields {sorted(missing)}")
            yield CorpusSample(
                id=str(row["id"]),
                query=str(row["query"]),
                supplementary=TokenSequence.from_source(
                    _coerce_tokens(row["supplementary_tokens"], "supplementary_tokens"),
                    SUPPLEMENTARY,
                ),
                conflicting=TokenSequence.from_source(
                    _coerce_tokens(row["conflicting_tokens"], "conflicting_tokens"),
                    CONFLICTING,
                ),
            )
