"""Consecutive-error run extraction and per-hour hallucination-style rates.

A fabrication run is a maximal stretch of insert/substitute ops, an omission
run a maximal stretch of deletes, and an any_error run a maximal stretch of
any non-match op. A maximal run of length L >= N counts as ONE event for
threshold N, which makes the rate nonincreasing in N by construction.
"""

from __future__ import annotations

import dataclasses
import statistics
from typing import Iterable, Sequence

from .alignment import Alignment, EmptyInputError

QUALIFYING = {
    "fabrication": ("insert", "substitute"),
    "omission": ("delete",),
    "any_error": ("insert", "substitute", "delete"),
}


class ZeroDurationError(ValueError):
    """Rates need strictly positive total audio duration."""


class BaselineZeroError(ValueError):
    """Relative reduction is undefined for a zero baseline rate."""


@dataclasses.dataclass(frozen=True)
class ErrorRun:
    kind: str
    length: int
    start_op_index: int


@dataclasses.dataclass(frozen=True)
class HallucReport:
    n: int
    fr_per_hour: float
    or_per_hour: float
    hr_per_hour: float
    total_hours: float


@dataclasses.dataclass(frozen=True)
class AmbientStats:
    non_blank_rate: float
    mean_chars: float
    median_chars: float
    frac_ge_10_chars: float


def extract_runs(a: Alignment, kind: str) -> list[ErrorRun]:
    """Maximal runs of the qualifying op kinds in alignment order.

    Any non-qualifying op terminates a run, so a delete splits fabrication
    runs and an insert or substitute splits omission runs.
    """
    if kind not in QUALIFYING:
        raise ValueError(f"unknown run kind {kind!r}, expected one of {sorted(QUALIFYING)}")
    qualifying = QUALIFYING[kind]
    runs = []
    start = None
    for idx, op in enumerate(a.ops):
        if op.kind in qualifying:
            if start is None:
                start = idx
        elif start is not None:
            runs.append(ErrorRun(kind, idx - start, start))
            start = None
    if start is not None:
        runs.append(ErrorRun(kind, len(a.ops) - start, start))
    return runs


def consecutive_error_rate(
    alignments: Iterable[tuple[Alignment, float]], n: int, kind: str
) -> float:
    """Events per hour: maximal runs of the given kind with length >= n,
    pooled over the corpus, divided by pooled audio hours."""
    if n < 1:
        raise ValueError(f"threshold n must be >= 1, got {n}")
    count = 0
    hours = 0.0
    for a, audio_hours in alignments:
        count += sum(1 for run in extract_runs(a, kind) if run.length >= n)
        hours += audio_hours
    if hours <= 0:
        raise ZeroDurationError("total audio duration must be positive")
    return count / hours


def halluc_report(alignments: Sequence[tuple[Alignment, float]], n: int) -> HallucReport:
    """Fabrication, omission, and any-error rates at one threshold."""
    fr = consecutive_error_rate(alignments, n, "fabrication")
    orate = consecutive_error_rate(alignments, n, "omission")
    hr = consecutive_error_rate(alignments, n, "any_error")
    total_hours = float(sum(h for _, h in alignments))
    return HallucReport(n, fr, orate, hr, total_hours)


def relative_reduction(rate_ours: float, rate_theirs: float) -> float:
    """Percent reduction of ours against theirs: 100*(theirs-ours)/theirs."""
    if rate_theirs <= 0:
        raise BaselineZeroError("baseline rate must be positive")
    return 100.0 * (rate_theirs - rate_ours) / rate_theirs


def ambient_stats(hypotheses: Sequence[str]) -> AmbientStats:
    """Fabricated-output statistics for audio that should transcribe to nothing.

    A hypothesis is blank when it is empty after trimming whitespace.
    Character counts are taken on the raw non-blank strings; the median is
    the lower median for even counts.
    """
    if len(hypotheses) == 0:
        raise EmptyInputError("ambient stats over zero hypotheses")
    non_blank = [h for h in hypotheses if h.strip() != ""]
    rate = len(non_blank) / len(hypotheses)
    if non_blank:
        lengths = [len(h) for h in non_blank]
        mean_chars = sum(lengths) / len(lengths)
        median_chars = float(statistics.median_low(lengths))
        frac_ge_10 = sum(1 for n in lengths if n >= 10) / len(hypotheses)
    else:
        mean_chars = 0.0
        median_chars = 0.0
        frac_ge_10 = 0.0
    return AmbientStats(rate, mean_chars, median_chars, frac_ge_10)
