"""Static-shape span masking, Gaussian mask filling, frozen random-projection
quantization targets, and the masked-prediction cross-entropy.

The mask start count is floor(n * p_mask) for every sequence length, so
downstream batch shapes never depend on the draw. The quantizer bank is
generated once from a seed and never trained; labels come from cosine
similarity between the projected feature and unit-normalized codebook rows.
"""

from __future__ import annotations

import dataclasses
import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_P_MASK = 0.01
DEFAULT_N_SPAN = 10
DEFAULT_SIGMA = 0.1
DEFAULT_N_HEADS = 8
DEFAULT_CODEBOOK_SIZE = 8192


class DimensionMismatchError(ValueError):
    """Feature dimension does not match the quantizer projection."""


class ShapeMismatchError(ValueError):
    """Logit and target shapes disagree."""


@dataclasses.dataclass(frozen=True)
class MaskConfig:
    p_mask: float = DEFAULT_P_MASK
    n_span: int = DEFAULT_N_SPAN
    sigma: float = DEFAULT_SIGMA
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.p_mask < 1:
            raise ValueError(f"p_mask must be in (0, 1), got {self.p_mask}")
        if self.n_span < 1:
            raise ValueError(f"n_span must be >= 1, got {self.n_span}")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


@dataclasses.dataclass(frozen=True)
class MaskPlan:
    """Chosen span starts and the resulting union of masked frame indices."""

    starts: tuple[int, ...]
    masked: tuple[int, ...]


@dataclasses.dataclass(frozen=True)
class QuantizerBank:
    """Frozen random projection plus per-head unit-row codebooks."""

    projection: np.ndarray
    codebooks: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "projection", np.asarray(self.projection, dtype=np.float64))
        object.__setattr__(self, "codebooks", np.asarray(self.codebooks, dtype=np.float64))
        if self.projection.ndim != 2 or self.codebooks.ndim != 3:
            raise ValueError("projection must be D x k, codebooks Q x V_cb x k")
        if self.codebooks.shape[2] != self.projection.shape[1]:
            raise ValueError("codebook rows must live in the projection output space")
        norms = np.linalg.norm(self.codebooks, axis=-1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            raise ValueError("codebook rows must be unit-norm within 1e-6")

    @property
    def n_heads(self) -> int:
        return self.codebooks.shape[0]

    @property
    def codebook_size(self) -> int:
        return self.codebooks.shape[1]


def sample_masks(n: int, cfg: MaskConfig, rng: np.random.Generator) -> MaskPlan:
    """Draw floor(n * p_mask) span starts uniformly with replacement.

    Each start masks [s, s + n_span) clipped at the sequence end; overlapping
    spans merge in the union, so |masked| <= |starts| * n_span.
    """
    if n < 1:
        raise ValueError(f"frame count must be >= 1, got {n}")
    n_starts = math.floor(n * cfg.p_mask)
    starts = rng.integers(0, n, size=n_starts)
    masked: set[int] = set()
    for s in starts:
        masked.update(range(int(s), min(int(s) + cfg.n_span, n)))
    return MaskPlan(tuple(int(s) for s in starts), tuple(sorted(masked)))


def apply_mask(
    features: np.ndarray, plan: MaskPlan, sigma: float, rng: np.random.Generator
) -> np.ndarray:
    """Replace masked rows with zero-mean Gaussian noise of std sigma.

    Unmasked rows are returned bit-identical; the input is never modified.
    """
    features = np.asarray(features, dtype=np.float64)
    out = features.copy()
    if not plan.masked:
        return out
    idx = np.asarray(plan.masked, dtype=np.intp)
    if idx.min() < 0 or idx.max() >= features.shape[0]:
        raise IndexError(
            f"mask index range [{idx.min()}, {idx.max()}] outside 0..{features.shape[0] - 1}"
        )
    out[idx] = rng.normal(0.0, sigma, size=(len(idx), features.shape[1]))
    return out


def make_quantizer_bank(
    feature_dim: int,
    code_dim: int,
    n_heads: int = DEFAULT_N_HEADS,
    codebook_size: int = DEFAULT_CODEBOOK_SIZE,
    seed: int = 0,
) -> QuantizerBank:
    """Build the frozen bank from a seed: projection entries are standard
    normal, codebook rows standard normal then L2-normalized. Draw order is
    projection first, then codebooks, so a seed pins the bank bit-for-bit."""
    if min(feature_dim, code_dim, n_heads, codebook_size) < 1:
        raise ValueError("all bank dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((feature_dim, code_dim))
    codebooks = rng.standard_normal((n_heads, codebook_size, code_dim))
    codebooks /= np.linalg.norm(codebooks, axis=-1, keepdims=True)
    return QuantizerBank(projection, codebooks, seed)


def quantize_targets(
    features: np.ndarray, plan: MaskPlan, bank: QuantizerBank
) -> np.ndarray:
    """Per-head labels for the masked frames of the ORIGINAL features.

    label[q, i] = argmax over codebook rows of cosine similarity with the
    projected masked frame (equivalently nearest unit row in Euclidean
    distance); ties resolve to the lowest row index. Returns an
    n_heads x |masked| int array; unmasked frames are never quantized.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != bank.projection.shape[0]:
        raise DimensionMismatchError(
            f"features are {features.shape}, projection wants dim {bank.projection.shape[0]}"
        )
    idx = np.asarray(plan.masked, dtype=np.intp)
    if len(idx) and (idx.min() < 0 or idx.max() >= features.shape[0]):
        raise IndexError("mask plan indexes past the feature matrix")
    projected = features[idx] @ bank.projection
    norms = np.linalg.norm(projected, axis=1, keepdims=True)
    # zero rows stay zero: cosine 0 against every code, label falls to index 0
    unit = projected / np.where(norms > 0, norms, 1.0)
    labels = np.empty((bank.n_heads, len(idx)), dtype=np.int64)
    for q in range(bank.n_heads):
        labels[q] = np.argmax(unit @ bank.codebooks[q].T, axis=1)
    return labels


def masked_prediction_loss(head_logits: np.ndarray, targets: np.ndarray) -> float:
    """Mean cross-entropy over heads and masked frames.

    head_logits is n_heads x |masked| x V_cb, targets n_heads x |masked|.
    An empty mask yields 0.0 (nothing to predict).
    """
    head_logits = np.asarray(head_logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if head_logits.ndim != 3 or head_logits.shape[:2] != targets.shape:
        raise ShapeMismatchError(
            f"logits {head_logits.shape} do not match targets {targets.shape}"
        )
    if targets.size == 0:
        return 0.0
    if targets.min() < 0 or targets.max() >= head_logits.shape[2]:
        raise ShapeMismatchError("targets index past the codebook axis")
    shift = head_logits - np.max(head_logits, axis=-1, keepdims=True)
    log_probs = shift - np.log(np.sum(np.exp(shift), axis=-1, keepdims=True))
    q_idx, m_idx = np.indices(targets.shape)
    picked = log_probs[q_idx, m_idx, targets]
    return float(-np.mean(picked))


def save_targets(labels: np.ndarray, path: str | Path) -> None:
    """Label-matrix file: '<3i' header (n_heads, n_masked, 0) then row-major int32."""
    arr = np.ascontiguousarray(labels, dtype="<i4")
    if arr.ndim != 2:
        raise ValueError(f"labels must be 2-D, got shape {arr.shape}")
    header = struct.pack("<3i", arr.shape[0], arr.shape[1], 0)
    Path(path).write_bytes(header + arr.tobytes())


def load_targets(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ValueError(f"{path}: too short for a targets header")
    n_heads, n_masked, _reserved = struct.unpack_from("<3i", data, 0)
    if n_heads < 1 or n_masked < 0:
        raise ValueError(f"{path}: bad header ({n_heads} x {n_masked})")
    if len(data) != 12 + 4 * n_heads * n_masked:
        raise ValueError(f"{path}: payload size mismatch")
    arr = np.frombuffer(data, dtype="<i4", offset=12, count=n_heads * n_masked)
    return arr.reshape(n_heads, n_masked).astype(np.int64)
