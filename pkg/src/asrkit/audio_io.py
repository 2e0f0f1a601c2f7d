"""Minimal PCM16 WAV reading/writing, test-signal synthesis, and manifest ingestion.

Only RIFF/WAVE with 16-bit PCM (mono or stereo) is supported; everything else
is rejected with a typed error so the parser stays small and fuzz-testable.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INT16_FULL_SCALE = 32768.0


class NotWavError(ValueError):
    """File does not start with a RIFF/WAVE header."""


class UnsupportedFormatError(ValueError):
    """WAV file uses a codec or layout other than PCM16 mono/stereo."""


class TruncatedWavError(ValueError):
    """A chunk body is shorter than its declared size."""


class InvalidSynthSpecError(ValueError):
    """Synthesis segment spec is malformed (bad duration, frequency, amplitude)."""


@dataclasses.dataclass(frozen=True)
class AudioBuffer:
    """Mono PCM audio: float64 samples in [-1.0, 1.0] at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError("samples must be a 1-D array")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if samples.size and (np.max(np.abs(samples)) > 1.0):
            raise ValueError("samples must lie in [-1.0, 1.0]")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclasses.dataclass
class ManifestEntry:
    """One corpus record: where the audio lives plus its transcript metadata."""

    audio_path: str
    text: str
    duration_s: float
    language: str
    extras: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if not self.language:
            raise ValueError("language tag must be non-empty")
        self.language = self.language.lower()


def read_wav(path: str | Path) -> AudioBuffer:
    """Parse a PCM16 RIFF/WAVE file into a mono AudioBuffer.

    Stereo input is downmixed by per-frame channel averaging. int16 values
    are scaled by 1/32768.

    Raises:
        NotWavError: missing RIFF/WAVE magic.
        UnsupportedFormatError: non-PCM16 codec, odd channel count, or no fmt chunk.
        TruncatedWavError: a chunk body (including data) is shorter than declared.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise NotWavError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            if len(body) < 16:
                raise TruncatedWavError(f"{path}: fmt chunk shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < size:
                raise TruncatedWavError(
                    f"{path}: data chunk declares {size} bytes, only {len(body)} present"
                )
            pcm = body
        if len(body) < size:
            # non-data chunk running past EOF: nothing useful can follow
            break
        pos += 8 + size + (size & 1)

    if fmt is None:
        raise UnsupportedFormatError(f"{path}: no fmt chunk found")
    audio_format, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if audio_format != 1:
        raise UnsupportedFormatError(f"{path}: audio format code {audio_format}, want 1 (PCM)")
    if bits != 16:
        raise UnsupportedFormatError(f"{path}: {bits} bits per sample, want 16")
    if n_channels not in (1, 2):
        raise UnsupportedFormatError(f"{path}: {n_channels} channels, want 1 or 2")
    if sample_rate == 0:
        raise UnsupportedFormatError(f"{path}: zero sample rate")
    if pcm is None:
        raise TruncatedWavError(f"{path}: no data chunk found")

    frame_bytes = 2 * n_channels
    usable = len(pcm) - (len(pcm) % frame_bytes)
    values = np.frombuffer(pcm[:usable], dtype="<i2").astype(np.float64)
    if n_channels == 2:
        values = values.reshape(-1, 2).mean(axis=1)
    return AudioBuffer(values / INT16_FULL_SCALE, int(sample_rate))


def write_wav(buffer: AudioBuffer, path: str | Path) -> None:
    """Write an AudioBuffer as mono PCM16 WAV.

    Round-tripping through read_wav reproduces samples within int16
    quantization (max abs error 1/32768). IO problems surface as OSError.
    """
    quantized = np.clip(np.rint(buffer.samples * INT16_FULL_SCALE), -32768, 32767)
    pcm = quantized.astype("<i2").tobytes()
    sr = buffer.sample_rate_hz
    header = b"RIFF" + struct.pack("<I", 36 + len(pcm)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, sr, sr * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(pcm))
    Path(path).write_bytes(header + pcm)


def synth_audio(spec: Sequence[tuple], sample_rate_hz: int) -> AudioBuffer:
    """Synthesize a test signal from a sequence of segment tuples.

    Segment forms:
        ("silence", dur_s)
        ("tone", dur_s, freq_hz)            full-scale sine
        ("tone", dur_s, freq_hz, amplitude)
        ("noise", dur_s, amplitude, seed)   uniform noise in [-amplitude, amplitude]

    Deterministic given seeds; total duration is the sum of segment durations.
    """
    if sample_rate_hz <= 0:
        raise InvalidSynthSpecError("sample_rate_hz must be positive")
    pieces = []
    for seg in spec:
        kind, dur_s = seg[0], float(seg[1])
        if dur_s <= 0:
            raise InvalidSynthSpecError(f"segment duration must be positive, got {dur_s}")
        n = int(round(dur_s * sample_rate_hz))
        if kind == "silence":
            pieces.append(np.zeros(n))
        elif kind == "tone":
            freq = float(seg[2])
            amplitude = float(seg[3]) if len(seg) > 3 else 1.0
            if freq <= 0 or freq >= sample_rate_hz / 2:
                raise InvalidSynthSpecError(f"tone frequency {freq} outside (0, Nyquist)")
            if not 0.0 < amplitude <= 1.0:
                raise InvalidSynthSpecError(f"tone amplitude {amplitude} outside (0, 1]")
            t = np.arange(n) / sample_rate_hz
            pieces.append(amplitude * np.sin(2.0 * math.pi * freq * t))
        elif kind == "noise":
            amplitude = float(seg[2])
            seed = int(seg[3])
            if not 0.0 <= amplitude <= 1.0:
                raise InvalidSynthSpecError(f"noise amplitude {amplitude} outside [0, 1]")
            rng = np.random.default_rng(seed)
            pieces.append(rng.uniform(-amplitude, amplitude, n))
        else:
            raise InvalidSynthSpecError(f"unknown segment kind {kind!r}")
    samples = np.concatenate(pieces) if pieces else np.zeros(0)
    return AudioBuffer(samples, sample_rate_hz)


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read a JSONL manifest; unknown keys are preserved in entry.extras."""
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            try:
                entry = ManifestEntry(
                    audio_path=record.pop("audio_path", ""),
                    text=record.pop("text", ""),
                    duration_s=float(record.pop("duration_s")),
                    language=record.pop("language"),
                    extras=record,
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad manifest entry: {exc}") from exc
            entries.append(entry)
    return entries


def write_manifest(entries: Iterable[ManifestEntry], path: str | Path) -> None:
    """Write entries as one JSON object per line."""
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            record = {
                "audio_path": entry.audio_path,
                "text": entry.text,
                "duration_s": entry.duration_s,
                "language": entry.language,
            }
            record.update(entry.extras)
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
