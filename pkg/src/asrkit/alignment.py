"""Word-level edit-distance alignment and WER.

The backtrace is deterministic: on equal-cost paths the priority is
match > substitute > delete > insert. Consecutive-error metrics are
computed over these op sequences, so the tie order is part of the contract.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Iterable, Optional, Sequence

EDGE_PUNCT = ".,;:!?\"'()[]{}<>-"


class EmptyInputError(ValueError):
    """Operation requires at least one element."""


class AllEmptyReferencesError(ValueError):
    """Corpus WER needs at least one pair with a non-empty reference."""


@dataclasses.dataclass(frozen=True)
class AlignmentOp:
    """One edit step. match/substitute carry both indices, insert only
    hyp_index, delete only ref_index."""

    kind: str
    ref_index: Optional[int] = None
    hyp_index: Optional[int] = None


@dataclasses.dataclass(frozen=True)
class Alignment:
    ops: tuple[AlignmentOp, ...]
    n_ref: int
    n_hyp: int


@dataclasses.dataclass(frozen=True)
class WerStats:
    substitutions: int
    deletions: int
    insertions: int
    matches: int
    n_ref: int
    wer: float


def normalize_words(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation at token edges.

    Internal apostrophes and hyphens survive ("it's" stays one word).
    Tokens that are pure punctuation vanish.
    """
    words = []
    for token in text.lower().split():
        token = token.strip(EDGE_PUNCT)
        if token:
            words.append(token)
    return words


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> Alignment:
    """Minimal-cost alignment of hyp against ref with unit edit costs.

    Ties during backtrace resolve as match > substitute > delete > insert,
    so repeated calls on the same pair return identical op sequences.
    """
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row, prev = dist[i], dist[i - 1]
        ref_word = ref[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (ref_word != hyp[j - 1])
            dele = prev[j] + 1
            ins = row[j - 1] + 1
            row[j] = min(sub, dele, ins)

    ops: list[AlignmentOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i][j] == dist[i - 1][j - 1]:
            ops.append(AlignmentOp("match", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            ops.append(AlignmentOp("substitute", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            ops.append(AlignmentOp("delete", ref_index=i - 1))
            i -= 1
        else:
            ops.append(AlignmentOp("insert", hyp_index=j - 1))
            j -= 1
    ops.reverse()
    return Alignment(tuple(ops), n, m)


def wer(a: Alignment) -> WerStats:
    """Per-alignment error counts and WER = (S + D + I) / n_ref.

    An empty reference with a non-empty hypothesis yields wer = +inf
    (counts are still populated); empty against empty yields 0.0.
    """
    s = sum(1 for op in a.ops if op.kind == "substitute")
    d = sum(1 for op in a.ops if op.kind == "delete")
    i = sum(1 for op in a.ops if op.kind == "insert")
    m = sum(1 for op in a.ops if op.kind == "match")
    if a.n_ref > 0:
        rate = (s + d + i) / a.n_ref
    elif a.n_hyp > 0:
        rate = math.inf
    else:
        rate = 0.0
    return WerStats(s, d, i, m, a.n_ref, rate)


def corpus_wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> WerStats:
    """Micro-average WER: pool S, D, I and reference words across pairs,
    then divide once."""
    s = d = i = m = n_ref = 0
    for ref, hyp in pairs:
        stats = wer(align_words(ref, hyp))
        s += stats.substitutions
        d += stats.deletions
        i += stats.insertions
        m += stats.matches
        n_ref += stats.n_ref
    if n_ref == 0:
        raise AllEmptyReferencesError("corpus WER needs at least one non-empty reference")
    return WerStats(s, d, i, m, n_ref, (s + d + i) / n_ref)


def macro_average(set_wers: Sequence[float]) -> float:
    """Unweighted mean of per-set WERs."""
    if len(set_wers) == 0:
        raise EmptyInputError("macro average over zero sets")
    return float(sum(set_wers) / len(set_wers))
