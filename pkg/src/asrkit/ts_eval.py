"""Word-level timestamp accuracy: matched-word deltas, tolerance curves,
and constant-bias estimation/correction."""

from __future__ import annotations

import dataclasses
import statistics
from typing import Sequence

from .alignment import align_words


class EmptyDeltasError(ValueError):
    """No matched words, so no deltas to aggregate."""


@dataclasses.dataclass(frozen=True)
class TimedWord:
    text: str
    start_s: float

    def __post_init__(self):
        if self.start_s < 0:
            raise ValueError(f"start_s must be >= 0, got {self.start_s}")


@dataclasses.dataclass(frozen=True)
class TsEvalResult:
    deltas_s: tuple[float, ...]
    matched: int
    total_ref: int
    median_bias_s: float


def timestamp_deltas(ref: Sequence[TimedWord], hyp: Sequence[TimedWord]) -> TsEvalResult:
    """Signed timestamp errors (predicted - reference) for matched words.

    Words are aligned by text; only match ops contribute a delta, so
    substituted, inserted, and deleted words are silently skipped.
    """
    a = align_words([w.text for w in ref], [w.text for w in hyp])
    deltas = []
    for op in a.ops:
        if op.kind == "match":
            deltas.append(hyp[op.hyp_index].start_s - ref[op.ref_index].start_s)
    median = float(statistics.median_low(deltas)) if deltas else 0.0
    return TsEvalResult(tuple(deltas), len(deltas), len(ref), median)


def accuracy_curve(
    deltas: Sequence[float], tolerances: Sequence[float]
) -> list[tuple[float, float]]:
    """Fraction of deltas with |d| <= t for each tolerance t (ascending)."""
    if len(deltas) == 0:
        raise EmptyDeltasError("accuracy curve over zero deltas")
    points = []
    for t in tolerances:
        frac = sum(1 for d in deltas if abs(d) <= t) / len(deltas)
        points.append((float(t), frac))
    return points


def estimate_bias(deltas: Sequence[float]) -> float:
    """Lower median of the signed deltas; negate it to get the correction."""
    if len(deltas) == 0:
        raise EmptyDeltasError("bias estimate over zero deltas")
    return float(statistics.median_low(deltas))


def apply_bias(words: Sequence[TimedWord], offset_s: float) -> list[TimedWord]:
    """Shift every start time by offset_s, clamped at zero."""
    return [TimedWord(w.text, max(0.0, w.start_s + offset_s)) for w in words]
