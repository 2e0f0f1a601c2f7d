"""Energy-based voice activity detection, long-form chunking, chunk merging,
and corpus filtering heuristics.

The chunker places boundaries at silence midpoints so batched decoding of
bounded-length windows can be stitched back into one transcript. Filters
implement duration/speech-ratio screening for untranscribed audio and
dual-transcript disagreement screening for machine-labeled audio.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .alignment import align_words, wer
from .audio_io import AudioBuffer
from .ts_eval import TimedWord

SPEECH_RATIO_MIN = 0.70
DURATION_MIN_S = 8.0
DURATION_MAX_S = 64.0
PSEUDO_WER_MAX = 0.20
DEFAULT_TS_BIAS_S = -0.065

# slack for float comparisons on second-valued boundaries
EPS = 1e-9


class EmptyAudioError(ValueError):
    """VAD needs at least one sample."""


class UnsortedChunksError(ValueError):
    """Chunk outputs must be ordered by chunk start time."""


@dataclasses.dataclass(frozen=True)
class VadConfig:
    frame_ms: int = 30
    energy_threshold_dbfs: float = -40.0
    hangover_frames: int = 2
    min_silence_s: float = 0.1
    min_chunk_s: float = 15.0
    max_chunk_s: float = 32.0

    def __post_init__(self):
        if not 10 <= self.frame_ms <= 50:
            raise ValueError(f"frame_ms must be in [10, 50], got {self.frame_ms}")
        if not 0 < self.min_silence_s < self.min_chunk_s < self.max_chunk_s:
            raise ValueError(
                "need 0 < min_silence_s < min_chunk_s < max_chunk_s, got "
                f"{self.min_silence_s}, {self.min_chunk_s}, {self.max_chunk_s}"
            )
        if self.hangover_frames < 0:
            raise ValueError("hangover_frames must be >= 0")


@dataclasses.dataclass(frozen=True)
class SpeechRegion:
    start_s: float
    end_s: float

    def __post_init__(self):
        if not 0 <= self.start_s < self.end_s:
            raise ValueError(f"bad region [{self.start_s}, {self.end_s}]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclasses.dataclass(frozen=True)
class ChunkSpec:
    start_s: float
    end_s: float
    padded_len_s: float

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclasses.dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    reason: str

    def __post_init__(self):
        if self.keep != (self.reason == "ok"):
            raise ValueError("reason must be 'ok' exactly when keep is true")


@dataclasses.dataclass(frozen=True)
class MergedTranscript:
    text: str
    words: tuple[TimedWord, ...]


def frame_dbfs(samples: np.ndarray) -> float:
    """RMS level of one frame in dBFS; silence maps to -inf."""
    rms = math.sqrt(float(np.mean(np.square(samples)))) if len(samples) else 0.0
    return 20.0 * math.log10(rms) if rms > 0 else -math.inf


def detect_speech(audio: AudioBuffer, cfg: VadConfig) -> list[SpeechRegion]:
    """Frame-level energy gate with hangover.

    A frame is speech iff its RMS in dBFS is at or above the threshold.
    Speech runs are extended to the right by hangover_frames, then regions
    separated by less than min_silence_s are merged. Region times are
    multiples of the frame length except at the audio end.
    """
    samples = audio.samples
    if len(samples) == 0:
        raise EmptyAudioError("cannot run VAD on empty audio")
    frame_len = max(1, int(audio.sample_rate_hz * cfg.frame_ms / 1000))
    frame_s = frame_len / audio.sample_rate_hz
    n_frames = (len(samples) + frame_len - 1) // frame_len

    speech = np.zeros(n_frames, dtype=bool)
    for k in range(n_frames):
        frame = samples[k * frame_len : (k + 1) * frame_len]
        speech[k] = frame_dbfs(frame) >= cfg.energy_threshold_dbfs

    # hangover: keep the gate open for a few frames after speech ends
    active = speech.copy()
    for shift in range(1, cfg.hangover_frames + 1):
        active[shift:] |= speech[:-shift]

    regions: list[SpeechRegion] = []
    start = None
    for k in range(n_frames):
        if active[k] and start is None:
            start = k
        elif not active[k] and start is not None:
            regions.append(_region(start, k, frame_s, audio.duration_s))
            start = None
    if start is not None:
        regions.append(_region(start, n_frames, frame_s, audio.duration_s))

    merged: list[SpeechRegion] = []
    for region in regions:
        if merged and region.start_s - merged[-1].end_s < cfg.min_silence_s - EPS:
            merged[-1] = SpeechRegion(merged[-1].start_s, region.end_s)
        else:
            merged.append(region)
    return merged


def _region(start_frame: int, end_frame: int, frame_s: float, duration_s: float) -> SpeechRegion:
    return SpeechRegion(start_frame * frame_s, min(end_frame * frame_s, duration_s))


def speech_existence_ratio(regions: Sequence[SpeechRegion], duration_s: float) -> float:
    """Fraction of the audio covered by detected speech."""
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    return sum(r.duration_s for r in regions) / duration_s


def filter_unsupervised(duration_s: float, speech_ratio: float) -> FilterVerdict:
    """Screen untranscribed audio: enough speech, sane duration.

    The ratio check runs first; the 8 and 64 second bounds are inclusive
    keeps.
    """
    if speech_ratio < SPEECH_RATIO_MIN:
        return FilterVerdict(False, "low_speech_ratio")
    if duration_s < DURATION_MIN_S:
        return FilterVerdict(False, "too_short")
    if duration_s > DURATION_MAX_S:
        return FilterVerdict(False, "too_long")
    return FilterVerdict(True, "ok")


def filter_pseudolabel(hyp_a: Sequence[str], hyp_b: Sequence[str]) -> FilterVerdict:
    """Screen machine-labeled audio by dual-transcript agreement.

    hyp_a acts as the WER reference; the sample is dropped when the WER
    strictly exceeds 0.20.
    """
    rate = wer(align_words(hyp_a, hyp_b)).wer
    if rate > PSEUDO_WER_MAX:
        return FilterVerdict(False, "pseudo_label_disagreement")
    return FilterVerdict(True, "ok")


def silence_gaps(regions: Sequence[SpeechRegion], duration_s: float) -> list[tuple[float, float]]:
    """Complement of the speech regions within [0, duration_s]."""
    gaps = []
    cursor = 0.0
    for region in regions:
        if region.start_s > cursor + EPS:
            gaps.append((cursor, region.start_s))
        cursor = max(cursor, region.end_s)
    if duration_s > cursor + EPS:
        gaps.append((cursor, duration_s))
    return gaps


def chunk_audio(
    audio: AudioBuffer, regions: Sequence[SpeechRegion], cfg: VadConfig
) -> list[ChunkSpec]:
    """Tile [0, duration] with chunks no longer than max_chunk_s.

    Scanning left to right, the next boundary is the midpoint of the first
    silence gap of at least min_silence_s whose midpoint lies more than
    min_chunk_s past the current chunk start (and within max_chunk_s of it).
    When no silence qualifies, the boundary is forced at max_chunk_s, or the
    remainder becomes the final chunk if it already fits.
    """
    duration = audio.duration_s
    gaps = [g for g in silence_gaps(regions, duration) if g[1] - g[0] >= cfg.min_silence_s - EPS]
    chunks: list[ChunkSpec] = []
    start = 0.0
    while duration - start > EPS:
        hard_end = start + cfg.max_chunk_s
        cut = None
        for g0, g1 in gaps:
            mid = (g0 + g1) / 2.0
            if mid - start > cfg.min_chunk_s and mid <= hard_end + EPS and mid < duration - EPS:
                cut = mid
                break
        if cut is None:
            cut = duration if duration <= hard_end + EPS else hard_end
        chunks.append(ChunkSpec(start, cut, cfg.max_chunk_s))
        start = cut
    return chunks


def merge_chunks(
    chunk_outputs: Sequence[tuple[ChunkSpec, Sequence[TimedWord]]],
    bias_offset_s: float = DEFAULT_TS_BIAS_S,
) -> MergedTranscript:
    """Stitch per-chunk transcripts into one globally timestamped transcript.

    Each local timestamp becomes local + chunk.start_s + bias_offset_s,
    clamped at zero; any residual non-monotonicity across chunk seams is
    clamped up to the previous word's time.
    """
    last_start = -math.inf
    for chunk, _ in chunk_outputs:
        if chunk.start_s < last_start:
            raise UnsortedChunksError("chunk outputs must be sorted by start_s")
        last_start = chunk.start_s

    words: list[TimedWord] = []
    prev_ts = 0.0
    for chunk, tokens in chunk_outputs:
        for token in tokens:
            ts = max(0.0, token.start_s + chunk.start_s + bias_offset_s)
            ts = max(ts, prev_ts)
            words.append(TimedWord(token.text, ts))
            prev_ts = ts
    return MergedTranscript(" ".join(w.text for w in words), tuple(words))
