"""Synthetic code-switching benchmark construction and real-time-factor
measurement.

A code-switching sample alternates clips from two single-language pools
until the running duration exceeds a target drawn from [30, 180] seconds.
RTF is wall-clock time over audio time, reported per pipeline stage.
"""

from __future__ import annotations

import dataclasses
import time
from typing import Callable, Optional, Sequence

import numpy as np

from .audio_io import AudioBuffer

TARGET_MIN_S = 30.0
TARGET_MAX_S = 180.0
DEFAULT_SAMPLE_COUNT = 250


class SampleRateMismatchError(ValueError):
    """Parts of one sample must share a sample rate to concatenate."""


class ZeroAudioError(ValueError):
    """RTF is undefined for zero audio duration."""


class WorkloadFailureError(RuntimeError):
    """A benchmark stage raised; partial stage timings are attached."""

    def __init__(self, message: str, partial_wall_s: dict[str, float]):
        super().__init__(message)
        self.partial_wall_s = dict(partial_wall_s)


@dataclasses.dataclass(frozen=True)
class PoolEntry:
    audio_ref: str
    transcript: str
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")


@dataclasses.dataclass(frozen=True)
class CsPool:
    language: str
    entries: tuple[PoolEntry, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError(f"pool {self.language!r} is empty")


@dataclasses.dataclass(frozen=True)
class CsSample:
    parts: tuple[PoolEntry, ...]
    languages: tuple[str, ...]
    target_s: float
    total_s: float

    @property
    def transcript(self) -> str:
        return " ".join(p.transcript for p in self.parts)


@dataclasses.dataclass(frozen=True)
class RtfReport:
    wall_s_total: float
    audio_s_total: float
    rtf: float
    stage_rtfs: dict[str, float]


def build_cs_sample(
    pool_a: CsPool,
    pool_b: CsPool,
    rng: np.random.Generator,
    target_s: Optional[float] = None,
) -> CsSample:
    """Draw one alternating-language sample.

    The target duration comes from Uniform[30, 180] unless given explicitly.
    A fair coin picks the first pool; parts then alternate pools, each drawn
    uniformly with replacement, stopping as soon as the running total
    strictly exceeds the target. Dropping the last part therefore always
    brings the total back to at most the target.
    """
    if target_s is None:
        target_s = float(rng.uniform(TARGET_MIN_S, TARGET_MAX_S))
    current, other = (pool_a, pool_b) if int(rng.integers(0, 2)) == 0 else (pool_b, pool_a)
    parts: list[PoolEntry] = []
    languages: list[str] = []
    total = 0.0
    while total <= target_s:
        entry = current.entries[int(rng.integers(0, len(current.entries)))]
        parts.append(entry)
        languages.append(current.language)
        total += entry.duration_s
        current, other = other, current
    return CsSample(tuple(parts), tuple(languages), target_s, total)


def build_cs_set(
    pool_a: CsPool,
    pool_b: CsPool,
    count: int = DEFAULT_SAMPLE_COUNT,
    base_seed: int = 0,
) -> list[CsSample]:
    """Independent samples with per-sample derived seeds (base_seed + index),
    so any sample can be regenerated alone and the set order is immaterial."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [
        build_cs_sample(pool_a, pool_b, np.random.default_rng(base_seed + i))
        for i in range(count)
    ]


def concat_sample_audio(
    sample: CsSample, reader: Callable[[str], AudioBuffer]
) -> AudioBuffer:
    """Sample-accurate concatenation of all parts via the given reader."""
    buffers = [reader(part.audio_ref) for part in sample.parts]
    rates = {b.sample_rate_hz for b in buffers}
    if len(rates) > 1:
        raise SampleRateMismatchError(f"parts mix sample rates {sorted(rates)}")
    return AudioBuffer(
        np.concatenate([b.samples for b in buffers]), buffers[0].sample_rate_hz
    )


def rtf(wall_s: float, audio_s: float) -> float:
    """Real-time factor: wall-clock seconds per second of audio."""
    if audio_s <= 0:
        raise ZeroAudioError(f"audio duration must be positive, got {audio_s}")
    if wall_s < 0:
        raise ValueError(f"wall time must be >= 0, got {wall_s}")
    return wall_s / audio_s


def rtf_bench(
    stages: Sequence[tuple[str, Callable]],
    payloads: Sequence,
    audio_s: Sequence[float],
) -> RtfReport:
    """Time a staged workload over a dataset and report per-stage RTFs.

    Each stage maps a payload to the next stage's payload. Stages run one at
    a time over the whole dataset (never interleaved) under a monotonic
    clock, so per-stage wall times are contiguous and their RTFs sum exactly
    to the total. Setup outside the stage callables is not timed.
    """
    if len(payloads) != len(audio_s):
        raise ValueError("need one audio duration per payload")
    total_audio = float(sum(audio_s))
    if total_audio <= 0:
        raise ZeroAudioError("total audio duration must be positive")
    wall: dict[str, float] = {}
    outputs = list(payloads)
    for name, fn in stages:
        begin = time.perf_counter()
        try:
            outputs = [fn(item) for item in outputs]
        except Exception as exc:
            raise WorkloadFailureError(f"stage {name!r} failed: {exc}", wall) from exc
        wall[name] = time.perf_counter() - begin
    stage_rtfs = {name: w / total_audio for name, w in wall.items()}
    # total defined as the sum of stage RTFs so the decomposition is exact
    return RtfReport(
        wall_s_total=sum(wall.values()),
        audio_s_total=total_audio,
        rtf=sum(stage_rtfs.values()),
        stage_rtfs=stage_rtfs,
    )
