"""Response-level evaluation metrics for the multiple-choice harness.

Counts follow the answer-record semantics: ``S`` total answers, ``f_m`` /
``f_c`` answers attributed to memory / context, ``L`` closed-book-correct
answers, ``C_r`` correct answers, ``C_crt`` corrected (wrong closed-book,
right with context), ``C_def`` defended (right both times). Undefined
denominators yield explicit ``None`` markers, serialized as "undefined",
never a silent zero.
"""

import json
import re
from dataclasses import dataclass

import numpy as np

from .uncertainty import ResponseTally, TokenLikelihoods, mean_psi, total_response_entropy
from .validation import ValidationError

ANSWER_SOURCES = ("memory", "context", "uncertain")

UNDEFINED = "undefined"


@dataclass(frozen=True)
class AnswerRecord:
    """One evaluated answer."""

    id: str
    closed_book_correct: bool
    answer_source: str
    correct: bool
    token_logprobs: TokenLikelihoods | None = None

    def __post_init__(self):
        if self.answer_source not in ANSWER_SOURCES:
            raise ValidationError(
                f"answer_source must be one of {ANSWER_SOURCES}, got {self.answer_source!r}"
            )
        # correct/incorrect/uncertain must partition: an answer the model
        # did not commit to cannot be scored correct
        if self.answer_source == "uncertain" and self.correct:
            raise ValidationError(f"record {self.id}: an uncertain answer cannot be correct")

    @property
    def corrected(self) -> bool:
        return self.correct and not self.closed_book_correct

    @property
    def resisted(self) -> bool:
        return self.correct and self.closed_book_correct


@dataclass(frozen=True)
class MetricsReport:
    S: int
    f_m: int
    f_c: int
    L: int
    C_r: int
    C_crt: int
    C_def: int
    MPR: float
    CPR: float
    UAR: float
    ACC: float
    CR: float | None
    RR: float | None
    TRE: float
    mean_psi: float | None

    @property
    def has_undefined(self) -> bool:
        return self.CR is None or self.RR is None

    def as_dict(self) -> dict:
        def mark(v):
            return UNDEFINED if v is None else v

        return {
            "S": self.S, "f_m": self.f_m, "f_c": self.f_c, "L": self.L,
            "C_r": self.C_r, "C_crt": self.C_crt, "C_def": self.C_def,
            "MPR": self.MPR, "CPR": self.CPR, "UAR": self.UAR, "ACC": self.ACC,
            "CR": mark(self.CR), "RR": mark(self.RR),
            "TRE": self.TRE, "mean_psi": mark(self.mean_psi),
        }


def compute_report(records) -> MetricsReport:
    """Aggregate answer records into preference, accuracy and uncertainty rates."""
    records = list(records)
    if not records:
        raise ValidationError("need at least one answer record")
    s = len(records)
    f_m = sum(1 for r in records if r.answer_source == "memory")
    f_c = sum(1 for r in records if r.answer_source == "context")
    l_count = sum(1 for r in records if r.closed_book_correct)
    c_r = sum(1 for r in records if r.correct)
    c_crt = sum(1 for r in records if r.corrected)
    c_def = sum(1 for r in records if r.resisted)

    mpr = f_m / s
    cpr = f_c / s
    uar = (s - f_m - f_c) / s
    acc = c_r / s
    cr = None if s == l_count else c_crt / (s - l_count)
    rr = None if l_count == 0 else c_def / l_count
    tre = total_response_entropy(ResponseTally(acc=acc, uar=uar))
    likelihoods = [r.token_logprobs for r in records if r.token_logprobs is not None]
    psi = mean_psi(likelihoods) if likelihoods else None
    return MetricsReport(
        S=s, f_m=f_m, f_c=f_c, L=l_count, C_r=c_r, C_crt=c_crt, C_def=c_def,
        MPR=mpr, CPR=cpr, UAR=uar, ACC=acc, CR=cr, RR=rr, TRE=tre, mean_psi=psi,
    )


_ARTICLES = re.compile(r"\b(a|an|the)\b")
_TERMINAL_PUNCT = ".,;:!?\"'"


def _normalize_answer(text: str) -> str:
    out = text.lower().strip()
    out = out.rstrip(_TERMINAL_PUNCT)
    out = _ARTICLES.sub(" ", out)
    return " ".join(out.split())


def exact_match(prediction: str, gold: str) -> bool:
    """Case-, article-, whitespace- and terminal-punctuation-insensitive equality."""
    return _normalize_answer(prediction) == _normalize_answer(gold)


def psi_tre_correlation(runs) -> float | None:
    """Pearson correlation between per-run answer uncertainty and response entropy.

    Needs at least three runs; returns ``None`` (undefined marker) when
    either coordinate has zero variance.
    """
    runs = list(runs)
    if len(runs) < 3:
        raise ValidationError("need at least 3 runs for a correlation")
    x = np.array([float(r[0]) for r in runs])
    y = np.array([float(r[1]) for r in runs])
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.sum(dx * dx))
    syy = float(np.sum(dy * dy))
    # variance below rounding scale counts as zero
    tiny_x = len(x) * (1e-9 * max(1.0, float(np.abs(x).max()))) ** 2
    tiny_y = len(y) * (1e-9 * max(1.0, float(np.abs(y).max()))) ** 2
    if sxx <= tiny_x or syy <= tiny_y:
        return None
    return float(np.sum(dx * dy) / np.sqrt(sxx * syy))


def read_answer_records(path):
    """Parse JSON-lines answer records.

    Schema per line: {id, closed_book_correct, answer_source, correct,
    token_logprobs?} where token_logprobs is a list of natural-log
    probabilities of the generated answer tokens.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"answers line {lineno} is not valid JSON: {exc}") from exc
            missing = {"id", "closed_book_correct", "answer_source", "correct"} - row.keys()
            if missing:
                raise ValidationError(f"answers line {lineno} is missing fields {sorted(missing)}")
            logprobs = row.get("token_logprobs")
            yield AnswerRecord(
                id=str(row["id"]),
                closed_book_correct=bool(row["closed_book_correct"]),
                answer_source=row["answer_source"],
                correct=bool(row["correct"]),
                token_logprobs=None if logprobs is None else TokenLikelihoods(logprobs),
            )
