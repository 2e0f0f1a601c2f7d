"""Transducer loss in three interchangeable forms, greedy decoding with
timestamps, and the memory model that motivates the sequential scan.

One toy network backs every route: a tanh recurrence over the label history,
an additive joiner z = tanh(E_t + p_u), and a per-slice log-softmax over the
vocabulary with index 0 reserved for blank. The full-lattice route
materializes all T x (U+1) x V log-probabilities. The sequential route walks
frames one at a time, carrying a single forward-variable row as state, and
differentiates with an explicit reverse scan over frames, so its transient
footprint per step is one (U+1) x V slice instead of T of them. A brute-force
enumeration over all monotonic alignments serves as the ground-truth oracle
for small problems.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import struct
from bisect import bisect_right
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

# large-negative stand-in for log(0); survives logaddexp without NaNs
NEG_INF = -1e30

DEFAULT_FRAME_DURATION_S = 0.04
DEFAULT_MAX_TOKENS_PER_FRAME = 5
ENUM_SIZE_LIMIT = 14

ARRAY_FIELDS = (
    "encoder_out",
    "token_embeddings",
    "pred_recurrence",
    "pred_init",
    "joiner_weight",
    "joiner_bias",
)


class LabelOutOfRangeError(ValueError):
    """Label sequence contains blank (0) or an index outside the vocabulary."""


class LatticeTooLargeError(ValueError):
    """Problem too big for exhaustive alignment enumeration."""


class NonFiniteLossError(FloatingPointError):
    """Loss or a gradient overflowed; parameters have blown up."""


@dataclasses.dataclass(frozen=True)
class ToyTransducerModel:
    """Smallest fully differentiable transducer: encoder output is a free
    T x d input, the prediction network is a one-layer tanh recurrence, and
    the joiner adds the two views before a linear projection to V logits."""

    vocab_size: int
    hidden_dim: int
    encoder_out: np.ndarray
    token_embeddings: np.ndarray
    pred_recurrence: np.ndarray
    pred_init: np.ndarray
    joiner_weight: np.ndarray
    joiner_bias: np.ndarray

    def __post_init__(self):
        for name in ARRAY_FIELDS:
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            object.__setattr__(self, name, arr)
        v, d = self.vocab_size, self.hidden_dim
        if v < 2:
            raise ValueError(f"vocab_size must be >= 2 (index 0 is blank), got {v}")
        if d < 1 or self.encoder_out.ndim != 2 or self.encoder_out.shape[0] < 1:
            raise ValueError("need hidden_dim >= 1 and a non-empty T x d encoder output")
        t = self.encoder_out.shape[0]
        expected = {
            "encoder_out": (t, d),
            "token_embeddings": (v, d),
            "pred_recurrence": (d, d),
            "pred_init": (d,),
            "joiner_weight": (v, d),
            "joiner_bias": (v,),
        }
        for name, want in expected.items():
            got = getattr(self, name).shape
            if got != want:
                raise ValueError(f"{name} has shape {got}, want {want}")
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite values")

    @property
    def num_frames(self) -> int:
        return self.encoder_out.shape[0]


@dataclasses.dataclass(frozen=True)
class Lattice:
    """Fully materialized T x (U+1) x V log-probabilities, each (t, u) slice
    a normalized distribution."""

    log_probs: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=np.float64)
        object.__setattr__(self, "log_probs", lp)
        if lp.ndim != 3 or lp.shape[2] < 2:
            raise ValueError(f"log_probs must be T x (U+1) x V with V >= 2, got {lp.shape}")
        peak = np.max(lp, axis=-1, keepdims=True)
        lse = peak[..., 0] + np.log(np.sum(np.exp(lp - peak), axis=-1))
        if np.max(np.abs(lse)) > 1e-6:
            raise ValueError("each (t, u) slice must be log-normalized within 1e-6")


@dataclasses.dataclass
class ModelGrads:
    encoder_out: np.ndarray
    token_embeddings: np.ndarray
    pred_recurrence: np.ndarray
    pred_init: np.ndarray
    joiner_weight: np.ndarray
    joiner_bias: np.ndarray


@dataclasses.dataclass(frozen=True)
class LossResult:
    loss: float
    grads: ModelGrads


@dataclasses.dataclass(frozen=True)
class DecodeResult:
    tokens: tuple[int, ...]
    frame_indices: tuple[int, ...]
    timestamps_s: tuple[float, ...]


def _check_labels(y: Sequence[int], vocab_size: int) -> None:
    for u, label in enumerate(y):
        if not 1 <= label < vocab_size:
            raise LabelOutOfRangeError(
                f"label {label} at position {u} outside [1, {vocab_size})"
            )


def _log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    shift = logits - np.max(logits, axis=-1, keepdims=True)
    return shift - np.log(np.sum(np.exp(shift), axis=-1, keepdims=True))


def prediction_states(model: ToyTransducerModel, y: Sequence[int]) -> np.ndarray:
    """(U+1) x d states over label-history prefixes; row 0 is the initial state,
    row u is tanh(W_pred @ p_{u-1} + embedding(y_u))."""
    _check_labels(y, model.vocab_size)
    states = np.empty((len(y) + 1, model.hidden_dim))
    states[0] = model.pred_init
    for u, label in enumerate(y, start=1):
        pre = model.pred_recurrence @ states[u - 1] + model.token_embeddings[label]
        states[u] = np.tanh(pre)
    return states


def full_lattice(model: ToyTransducerModel, y: Sequence[int]) -> Lattice:
    """Materialize log-softmax joiner outputs for every (frame, label-prefix)
    pair. This is the memory-hungry baseline the sequential route avoids."""
    states = prediction_states(model, y)
    lp = np.empty((model.num_frames, len(y) + 1, model.vocab_size))
    for t in range(model.num_frames):
        z = np.tanh(model.encoder_out[t] + states)
        logits = z @ model.joiner_weight.T + model.joiner_bias
        lp[t] = _log_softmax_rows(logits)
    return Lattice(lp)


def _check_lattice_labels(lattice: Lattice, y: Sequence[int]) -> np.ndarray:
    lp = lattice.log_probs
    if lp.shape[1] != len(y) + 1:
        raise ValueError(f"lattice has {lp.shape[1]} label rows, want {len(y) + 1}")
    _check_labels(y, lp.shape[2])
    return lp


def rnnt_loss_oracle(lattice: Lattice, y: Sequence[int]) -> float:
    """Negative log-likelihood by dynamic programming over the full lattice.

    alpha(t, u) sums all alignments that consumed t frame advances and the
    first u labels; the loss is the final cell plus its outgoing blank.
    """
    lp = _check_lattice_labels(lattice, y)
    n_frames, n_rows, _ = lp.shape
    n_labels = n_rows - 1
    alpha = np.full((n_frames, n_rows), NEG_INF)
    alpha[0, 0] = 0.0
    for t in range(n_frames):
        for u in range(n_rows):
            if t == 0 and u == 0:
                continue
            from_blank = alpha[t - 1, u] + lp[t - 1, u, 0] if t > 0 else NEG_INF
            from_emit = alpha[t, u - 1] + lp[t, u - 1, y[u - 1]] if u > 0 else NEG_INF
            alpha[t, u] = np.logaddexp(from_blank, from_emit)
    loss = -(alpha[n_frames - 1, n_labels] + lp[n_frames - 1, n_labels, 0])
    # exact math keeps total path mass <= 1; shave rounding drift
    return max(float(loss), 0.0)


def enumerate_alignments_loss(lattice: Lattice, y: Sequence[int]) -> float:
    """Ground-truth loss by explicit enumeration of every monotonic alignment.

    An alignment is fixed by the nondecreasing frame indices at which the U
    labels are emitted; blanks fill each frame after its label emissions.
    Exponential in T + U, hence the size guard.
    """
    lp = _check_lattice_labels(lattice, y)
    n_frames, n_rows, _ = lp.shape
    n_labels = n_rows - 1
    if n_frames + n_labels > ENUM_SIZE_LIMIT:
        raise LatticeTooLargeError(
            f"T + U = {n_frames + n_labels} exceeds enumeration limit {ENUM_SIZE_LIMIT}"
        )
    total = NEG_INF
    for emit_frames in itertools.combinations_with_replacement(range(n_frames), n_labels):
        logp = 0.0
        for u, t_u in enumerate(emit_frames):
            logp += lp[t_u, u, y[u]]
        for t in range(n_frames):
            logp += lp[t, bisect_right(emit_frames, t), 0]
        total = np.logaddexp(total, logp)
    return max(float(-total), 0.0)


def rnnt_loss_sequential(
    model: ToyTransducerModel, y: Sequence[int], unroll: int = 1
) -> LossResult:
    """Loss and full parameter gradients without materializing the lattice.

    Forward: one row of forward variables is carried across frames; each
    frame computes one (U+1) x V joiner slice, folds in the within-frame
    label emissions, records the row, and advances through blank. Only the
    T x (U+1) row history and the (U+1) x d prediction states are retained.

    Backward: an explicit reverse scan over frames. Joiner slices are
    recomputed per frame (bitwise identical, all fixed-shape ops), edge
    weights are recovered from the stored rows, and the adjoint row flows
    backward through blank and emit edges exactly mirroring the forward
    recursion. Gradients for the prediction network then unroll backward
    over the label history.

    unroll only batches the tanh pre-activation across frames; results are
    bit-identical for any unroll value because every remaining op keeps a
    fixed shape.
    """
    if unroll < 1:
        raise ValueError(f"unroll must be >= 1, got {unroll}")
    y = [int(label) for label in y]
    states = prediction_states(model, y)
    n_labels = len(y)
    n_frames = model.num_frames
    enc = model.encoder_out
    w_out = model.joiner_weight
    b_out = model.joiner_bias

    a = np.full(n_labels + 1, NEG_INF)
    a[0] = 0.0
    alpha_hist = np.empty((n_frames, n_labels + 1))
    for t0 in range(0, n_frames, unroll):
        z_block = np.tanh(enc[t0 : t0 + unroll, None, :] + states[None, :, :])
        for i in range(z_block.shape[0]):
            lp = _log_softmax_rows(z_block[i] @ w_out.T + b_out)
            for u in range(1, n_labels + 1):
                a[u] = np.logaddexp(a[u], a[u - 1] + lp[u - 1, y[u - 1]])
            alpha_hist[t0 + i] = a
            a = a + lp[:, 0]
    loss = max(float(-a[n_labels]), 0.0)

    grads = ModelGrads(
        encoder_out=np.zeros_like(enc),
        token_embeddings=np.zeros_like(model.token_embeddings),
        pred_recurrence=np.zeros_like(model.pred_recurrence),
        pred_init=np.zeros_like(model.pred_init),
        joiner_weight=np.zeros_like(w_out),
        joiner_bias=np.zeros_like(b_out),
    )
    d_states = np.zeros_like(states)
    # adjoint of the carried row; seeded by loss = -(final cell + its blank)
    g = np.zeros(n_labels + 1)
    g[n_labels] = -1.0
    for t in range(n_frames - 1, -1, -1):
        z = np.tanh(enc[t] + states)
        lp = _log_softmax_rows(z @ w_out.T + b_out)
        slice_grad = np.zeros_like(lp)
        slice_grad[:, 0] = g
        row = alpha_hist[t]
        for u in range(n_labels, 0, -1):
            # emit-edge weight into (t, u); <= 1 since the row absorbed the edge
            w_emit = math.exp(row[u - 1] + lp[u - 1, y[u - 1]] - row[u])
            flow = g[u] * w_emit
            slice_grad[u - 1, y[u - 1]] += flow
            g[u - 1] += flow
            g[u] *= 1.0 - w_emit
        probs = np.exp(lp)
        d_logits = slice_grad - probs * slice_grad.sum(axis=1, keepdims=True)
        grads.joiner_bias += d_logits.sum(axis=0)
        grads.joiner_weight += d_logits.T @ z
        d_pre = (d_logits @ w_out) * (1.0 - z * z)
        grads.encoder_out[t] = d_pre.sum(axis=0)
        d_states += d_pre
    for u in range(n_labels, 0, -1):
        d_pre = d_states[u] * (1.0 - states[u] * states[u])
        grads.token_embeddings[y[u - 1]] += d_pre
        grads.pred_recurrence += np.outer(d_pre, states[u - 1])
        d_states[u - 1] += model.pred_recurrence.T @ d_pre
    grads.pred_init = d_states[0].copy()

    finite = np.isfinite(loss) and all(
        np.all(np.isfinite(getattr(grads, name))) for name in ARRAY_FIELDS
    )
    if not finite:
        raise NonFiniteLossError("loss or gradients are not finite")
    return LossResult(loss, grads)


def finite_difference_grads(
    model: ToyTransducerModel, y: Sequence[int], epsilon: float = 1e-4
) -> ModelGrads:
    """Central-difference gradients of the full-lattice loss for every field.

    Deliberately routed through the materialized lattice so it cross-checks
    the sequential route's analytic backward pass rather than itself.
    """

    def loss_with(field_name: str, index: int, delta: float) -> float:
        arrays = {name: np.array(getattr(model, name)) for name in ARRAY_FIELDS}
        arrays[field_name].flat[index] += delta
        probe = ToyTransducerModel(model.vocab_size, model.hidden_dim, **arrays)
        return rnnt_loss_oracle(full_lattice(probe, y), y)

    grads = {}
    for name in ARRAY_FIELDS:
        grad = np.zeros_like(getattr(model, name))
        for index in range(grad.size):
            up = loss_with(name, index, epsilon)
            down = loss_with(name, index, -epsilon)
            grad.flat[index] = (up - down) / (2.0 * epsilon)
        grads[name] = grad
    return ModelGrads(**grads)


def lattice_memory_bytes(
    batch_size: int, num_frames: int, num_labels: int, vocab_size: int, bytes_per_element: int
) -> int:
    """Bytes needed to materialize a B x T x U x V lattice of logits."""
    dims = (batch_size, num_frames, num_labels, vocab_size, bytes_per_element)
    if any(dim <= 0 for dim in dims):
        raise ValueError(f"all dimensions must be positive, got {dims}")
    return batch_size * num_frames * num_labels * vocab_size * bytes_per_element


def sequential_memory_bytes(
    batch_size: int, num_labels: int, vocab_size: int, bytes_per_element: int
) -> int:
    """Per-step footprint of the sequential scan: one B x U x V slice.

    Exactly lattice_memory_bytes / num_frames: the scan trades the frame
    axis of the stored lattice for recomputation.
    """
    return lattice_memory_bytes(batch_size, 1, num_labels, vocab_size, bytes_per_element)


def greedy_decode(
    model: ToyTransducerModel,
    frame_duration_s: float = DEFAULT_FRAME_DURATION_S,
    max_tokens_per_frame: int = DEFAULT_MAX_TOKENS_PER_FRAME,
) -> DecodeResult:
    """Frame-by-frame greedy decoding with token-level timestamps.

    At each frame the joiner argmax either emits a token (prediction state
    updates, frame stays) or is blank (frame advances). A per-frame emission
    cap bounds worst-case output length; hitting the cap advances the frame
    without consulting blank. Timestamps are frame_index * frame_duration_s.
    """
    if frame_duration_s <= 0:
        raise ValueError("frame_duration_s must be positive")
    if max_tokens_per_frame < 1:
        raise ValueError("max_tokens_per_frame must be >= 1")
    tokens: list[int] = []
    frames: list[int] = []
    state = model.pred_init
    for t in range(model.num_frames):
        for _ in range(max_tokens_per_frame):
            z = np.tanh(model.encoder_out[t] + state)
            logits = model.joiner_weight @ z + model.joiner_bias
            best = int(np.argmax(logits))
            if best == 0:
                break
            tokens.append(best)
            frames.append(t)
            state = np.tanh(
                model.pred_recurrence @ state + model.token_embeddings[best]
            )
    return DecodeResult(
        tuple(tokens),
        tuple(frames),
        tuple(t * frame_duration_s for t in frames),
    )


def batched_greedy_decode(
    models: Sequence[ToyTransducerModel],
    true_lengths: Optional[Sequence[int]] = None,
    frame_duration_s: float = DEFAULT_FRAME_DURATION_S,
    max_tokens_per_frame: int = DEFAULT_MAX_TOKENS_PER_FRAME,
) -> list[DecodeResult]:
    """Frame-synchronous greedy decoding over a batch.

    All samples advance through frame t together; each runs the same
    per-sample emission loop as greedy_decode, so results are bitwise
    identical to decoding one at a time. Samples padded to a common frame
    count pass their true length here; padding frames emit nothing.
    """
    if true_lengths is None:
        true_lengths = [m.num_frames for m in models]
    if len(true_lengths) != len(models):
        raise ValueError("need one true length per model")
    for model, length in zip(models, true_lengths):
        if not 0 <= length <= model.num_frames:
            raise ValueError(f"true length {length} outside [0, {model.num_frames}]")
    if max_tokens_per_frame < 1:
        raise ValueError("max_tokens_per_frame must be >= 1")
    states = [m.pred_init for m in models]
    tokens: list[list[int]] = [[] for _ in models]
    frames: list[list[int]] = [[] for _ in models]
    for t in range(max(true_lengths, default=0)):
        for i, model in enumerate(models):
            if t >= true_lengths[i]:
                continue
            for _ in range(max_tokens_per_frame):
                z = np.tanh(model.encoder_out[t] + states[i])
                logits = model.joiner_weight @ z + model.joiner_bias
                best = int(np.argmax(logits))
                if best == 0:
                    break
                tokens[i].append(best)
                frames[i].append(t)
                states[i] = np.tanh(
                    model.pred_recurrence @ states[i] + model.token_embeddings[best]
                )
    return [
        DecodeResult(
            tuple(tokens[i]),
            tuple(frames[i]),
            tuple(t * frame_duration_s for t in frames[i]),
        )
        for i in range(len(models))
    ]


def random_instance(
    rng: np.random.Generator,
    max_frames: int = 20,
    max_labels: int = 10,
    max_vocab: int = 16,
    max_dim: int = 8,
    scale: float = 0.5,
) -> tuple[ToyTransducerModel, list[int]]:
    """Seeded random (model, label sequence) pair for verification harnesses."""
    n_frames = int(rng.integers(1, max_frames + 1))
    n_labels = int(rng.integers(0, max_labels + 1))
    vocab = int(rng.integers(2, max_vocab + 1))
    dim = int(rng.integers(1, max_dim + 1))
    model = ToyTransducerModel(
        vocab_size=vocab,
        hidden_dim=dim,
        encoder_out=scale * rng.standard_normal((n_frames, dim)),
        token_embeddings=scale * rng.standard_normal((vocab, dim)),
        pred_recurrence=scale * rng.standard_normal((dim, dim)),
        pred_init=scale * rng.standard_normal(dim),
        joiner_weight=scale * rng.standard_normal((vocab, dim)),
        joiner_bias=scale * rng.standard_normal(vocab),
    )
    y = [int(label) for label in rng.integers(1, vocab, size=n_labels)]
    return model, y


def save_model(model: ToyTransducerModel, path: str | Path) -> None:
    """Flat little-endian serialization: '<3i' header (V, d, T) followed by
    row-major float64 arrays in declared field order."""
    header = struct.pack("<3i", model.vocab_size, model.hidden_dim, model.num_frames)
    payload = b"".join(
        np.ascontiguousarray(getattr(model, name), dtype="<f8").tobytes()
        for name in ARRAY_FIELDS
    )
    Path(path).write_bytes(header + payload)


def load_model(path: str | Path) -> ToyTransducerModel:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ValueError(f"{path}: too short for a model header")
    vocab, dim, n_frames = struct.unpack_from("<3i", data, 0)
    if vocab < 2 or dim < 1 or n_frames < 1:
        raise ValueError(f"{path}: bad header (V={vocab}, d={dim}, T={n_frames})")
    shapes = [
        (n_frames, dim), (vocab, dim), (dim, dim), (dim,), (vocab, dim), (vocab,),
    ]
    need = 12 + 8 * sum(int(np.prod(shape)) for shape in shapes)
    if len(data) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(data)}")
    arrays = []
    offset = 12
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        arrays.append(arr.reshape(shape).copy())
        offset += 8 * count
    return ToyTransducerModel(vocab, dim, *arrays)


def save_frames(frames: np.ndarray, path: str | Path) -> None:
    """Feature-matrix file: '<3i' header (rows, dim, 0) then row-major float32."""
    arr = np.ascontiguousarray(frames, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"frames must be 2-D, got shape {arr.shape}")
    header = struct.pack("<3i", arr.shape[0], arr.shape[1], 0)
    Path(path).write_bytes(header + arr.tobytes())


def load_frames(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise ValueError(f"{path}: too short for a frames header")
    rows, dim, _reserved = struct.unpack_from("<3i", data, 0)
    if rows < 1 or dim < 1:
        raise ValueError(f"{path}: bad header ({rows} x {dim})")
    if len(data) != 12 + 4 * rows * dim:
        raise ValueError(f"{path}: expected {12 + 4 * rows * dim} bytes, found {len(data)}")
    arr = np.frombuffer(data, dtype="<f4", offset=12, count=rows * dim)
    return arr.reshape(rows, dim).astype(np.float64)
