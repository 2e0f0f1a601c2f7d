"""Command-line entry point exposing every metric and pipeline as subcommands.

Exit codes: 0 success, 1 validation error (bad flags, malformed requests),
2 runtime error (unreadable files, failing workloads). Diagnostics go to
stderr; data goes to the output file or stdout only. Every output carries a
provenance header (tool version, seed, config hash) and is written
atomically, so interrupted runs never leave partial files at the target
path. Randomized subcommands require an explicit --seed; with fixed inputs
and seed, outputs are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .alignment import align_words, corpus_wer, macro_average, normalize_words, wer
from .audio_io import ManifestEntry, read_manifest, read_wav, write_wav
from .benchgen import CsPool, PoolEntry, build_cs_set, concat_sample_audio, rtf_bench
from .bestrq import MaskConfig, make_quantizer_bank, quantize_targets, sample_masks, save_targets
from .halluc import ambient_stats, halluc_report
from .transducer import (
    DecodeResult,
    enumerate_alignments_loss,
    finite_difference_grads,
    full_lattice,
    greedy_decode,
    load_frames,
    load_model,
    random_instance,
    rnnt_loss_oracle,
    rnnt_loss_sequential,
)
from .ts_eval import TimedWord, accuracy_curve, estimate_bias, timestamp_deltas
from .vad_segment import (
    VadConfig,
    chunk_audio,
    detect_speech,
    filter_pseudolabel,
    filter_unsupervised,
    merge_chunks,
)

SCHEMA_VERSION = 1


class CliError(Exception):
    """Invalid invocation or malformed request data; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _provenance(args: argparse.Namespace) -> dict:
    config = {
        key: value
        for key, value in sorted(vars(args).items())
        if key != "func" and not callable(value)
    }
    blob = json.dumps(config, sort_keys=True, default=str)
    return {
        "tool": "asrkit",
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config_sha256": hashlib.sha256(blob.encode("utf-8")).hexdigest(),
    }


def _atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json_report(path: str | Path, args: argparse.Namespace, body: dict) -> None:
    report = {"schema_version": SCHEMA_VERSION, "provenance": _provenance(args)}
    report.update(body)
    _atomic_write_text(path, json.dumps(report, indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: str | Path, args: argparse.Namespace, records: Sequence[dict]) -> None:
    lines = [json.dumps({"schema_version": SCHEMA_VERSION, "provenance": _provenance(args)})]
    lines.extend(json.dumps(record, ensure_ascii=False) for record in records)
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _write_csv(path: str | Path, args: argparse.Namespace, header: str, rows: Sequence[str]) -> None:
    lines = ["# provenance: " + json.dumps(_provenance(args)), header]
    lines.extend(rows)
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _read_jsonl(path: str | Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if "provenance" in record and "schema_version" in record:
                continue
            records.append(record)
    return records


def _pair_manifests(
    ref_path: str, hyp_path: str
) -> list[tuple[ManifestEntry, ManifestEntry]]:
    refs = read_manifest(ref_path)
    hyps = {entry.audio_path: entry for entry in read_manifest(hyp_path)}
    missing = [entry.audio_path for entry in refs if entry.audio_path not in hyps]
    if missing:
        raise CliError(f"hypothesis manifest is missing {len(missing)} paths, e.g. {missing[0]!r}")
    return [(entry, hyps[entry.audio_path]) for entry in refs]


def _group_key(entry: ManifestEntry) -> str:
    return str(entry.extras.get("dataset", entry.language))


def _cmd_wer(args: argparse.Namespace) -> int:
    pairs = _pair_manifests(args.ref, args.hyp)
    if not pairs:
        raise CliError("reference manifest is empty")
    word_pairs = [
        (normalize_words(ref.text), normalize_words(hyp.text)) for ref, hyp in pairs
    ]
    per_file = [wer(align_words(r, h)) for r, h in word_pairs]
    corpus = corpus_wer(word_pairs)

    groups: dict[str, list[tuple[list[str], list[str]]]] = {}
    for (ref, _), words in zip(pairs, word_pairs):
        groups.setdefault(_group_key(ref), []).append(words)
    group_wers = {name: corpus_wer(members).wer for name, members in sorted(groups.items())}
    macro = macro_average(list(group_wers.values()))

    if args.per_file:
        rows = [
            f"{ref.audio_path},{_group_key(ref)},{stats.n_ref},{stats.matches},"
            f"{stats.substitutions},{stats.deletions},{stats.insertions},{stats.wer}"
            for (ref, _), stats in zip(pairs, per_file)
        ]
        _write_csv(
            args.per_file,
            args,
            "audio_path,group,n_ref,matches,substitutions,deletions,insertions,wer",
            rows,
        )
    _write_json_report(
        args.summary,
        args,
        {
            "corpus": {
                "wer": corpus.wer,
                "n_ref": corpus.n_ref,
                "substitutions": corpus.substitutions,
                "deletions": corpus.deletions,
                "insertions": corpus.insertions,
                "matches": corpus.matches,
            },
            "group_wers": group_wers,
            "macro_average": macro,
            "n_files": len(pairs),
        },
    )
    return 0


def _parse_n_spec(spec: str) -> list[int]:
    try:
        if ".." in spec:
            low, high = spec.split("..", 1)
            values = list(range(int(low), int(high) + 1))
        else:
            values = [int(spec)]
    except ValueError as exc:
        raise CliError(f"bad --n value {spec!r}: use an integer or LOW..HIGH") from exc
    if not values or min(values) < 1:
        raise CliError(f"--n thresholds must be >= 1, got {spec!r}")
    return values


def _cmd_halluc(args: argparse.Namespace) -> int:
    thresholds = _parse_n_spec(args.n)
    pairs = _pair_manifests(args.ref, args.hyp)
    if not pairs:
        raise CliError("reference manifest is empty")
    alignments = [
        (
            align_words(normalize_words(ref.text), normalize_words(hyp.text)),
            ref.duration_s / 3600.0,
        )
        for ref, hyp in pairs
    ]
    reports = []
    for n in thresholds:
        report = halluc_report(alignments, n)
        reports.append(
            {
                "n": n,
                "fabrication_per_hour": report.fr_per_hour,
                "omission_per_hour": report.or_per_hour,
                "any_error_per_hour": report.hr_per_hour,
            }
        )
    total_hours = sum(hours for _, hours in alignments)
    _write_json_report(args.out, args, {"total_hours": total_hours, "rates": reports})
    return 0


def _cmd_ambient(args: argparse.Namespace) -> int:
    hyps = read_manifest(args.hyp)
    if not hyps:
        raise CliError("hypothesis manifest is empty")
    stats = ambient_stats([entry.text for entry in hyps])
    _write_json_report(
        args.out,
        args,
        {
            "n_responses": len(hyps),
            "non_blank_rate": stats.non_blank_rate,
            "mean_chars": stats.mean_chars,
            "median_chars": stats.median_chars,
            "frac_ge_10_chars": stats.frac_ge_10_chars,
        },
    )
    return 0


def _read_timed_manifest(path: str) -> dict[str, list[TimedWord]]:
    out: dict[str, list[TimedWord]] = {}
    for record in _read_jsonl(path):
        try:
            words = [TimedWord(w["text"], float(w["start_s"])) for w in record["words"]]
            out[record["audio_path"]] = words
        except (KeyError, TypeError, ValueError) as exc:
            raise CliError(f"{path}: bad timed-word record: {exc}") from exc
    return out


def _cmd_ts_eval(args: argparse.Namespace) -> int:
    try:
        tolerances = sorted(float(t) for t in args.tolerances.split(","))
    except ValueError as exc:
        raise CliError(f"bad --tolerances {args.tolerances!r}") from exc
    if not tolerances or min(tolerances) <= 0:
        raise CliError("tolerances must be positive")
    refs = _read_timed_manifest(args.ref)
    hyps = _read_timed_manifest(args.hyp)
    missing = [path for path in refs if path not in hyps]
    if missing:
        raise CliError(f"hypothesis manifest is missing {len(missing)} paths, e.g. {missing[0]!r}")
    deltas: list[float] = []
    matched = total_ref = 0
    for path, ref_words in refs.items():
        result = timestamp_deltas(ref_words, hyps[path])
        deltas.extend(result.deltas_s)
        matched += result.matched
        total_ref += result.total_ref
    curve = accuracy_curve(deltas, tolerances)
    _write_csv(
        args.out,
        args,
        "tolerance_s,fraction",
        [f"{tol},{frac}" for tol, frac in curve],
    )
    summary = {
        "matched": matched,
        "total_ref": total_ref,
        "median_bias_s": estimate_bias(deltas),
    }
    print(json.dumps(summary, sort_keys=True))
    return 0


def _vad_config_from(args: argparse.Namespace) -> VadConfig:
    try:
        return VadConfig(
            frame_ms=args.frame_ms,
            energy_threshold_dbfs=args.threshold_dbfs,
            hangover_frames=args.hangover,
            min_silence_s=args.min_silence,
            min_chunk_s=args.min_chunk,
            max_chunk_s=args.max_chunk,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _add_vad_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--frame-ms", type=int, default=30, help="VAD frame length in ms")
    parser.add_argument(
        "--threshold-dbfs", type=float, default=-40.0, help="speech energy threshold"
    )
    parser.add_argument("--hangover", type=int, default=2, help="VAD hangover frames")
    parser.add_argument("--min-silence", type=float, default=0.1, help="splittable silence (s)")
    parser.add_argument("--min-chunk", type=float, default=15.0, help="minimum chunk length (s)")
    parser.add_argument("--max-chunk", type=float, default=32.0, help="maximum chunk length (s)")


def _cmd_chunk(args: argparse.Namespace) -> int:
    cfg = _vad_config_from(args)
    audio = read_wav(args.infile)
    regions = detect_speech(audio, cfg)
    chunks = chunk_audio(audio, regions, cfg)
    records = [
        {"start_s": c.start_s, "end_s": c.end_s, "padded_len_s": c.padded_len_s}
        for c in chunks
    ]
    _write_jsonl(args.out, args, records)
    return 0


def _cmd_filter(args: argparse.Namespace) -> int:
    entries = read_manifest(args.manifest)
    if args.mode == "unsupervised":
        for entry in entries:
            if "speech_ratio" not in entry.extras:
                raise CliError(
                    f"unsupervised mode needs a speech_ratio field on every entry; "
                    f"{entry.audio_path!r} has none"
                )
    else:
        for entry in entries:
            if "text_b" not in entry.extras:
                raise CliError(
                    f"pseudo mode needs a text_b field (second transcript) on every entry; "
                    f"{entry.audio_path!r} has none"
                )
    kept, rejected = [], []
    for entry in entries:
        if args.mode == "unsupervised":
            verdict = filter_unsupervised(entry.duration_s, float(entry.extras["speech_ratio"]))
        else:
            verdict = filter_pseudolabel(
                normalize_words(entry.text), normalize_words(str(entry.extras["text_b"]))
            )
        if verdict.keep:
            kept.append(entry)
        else:
            extras = dict(entry.extras)
            extras["reject_reason"] = verdict.reason
            rejected.append(dataclasses.replace(entry, extras=extras))

    def manifest_record(entry: ManifestEntry) -> dict:
        record = {
            "audio_path": entry.audio_path,
            "text": entry.text,
            "duration_s": entry.duration_s,
            "language": entry.language,
        }
        record.update(entry.extras)
        return record

    _write_jsonl(args.out, args, [manifest_record(e) for e in kept])
    _write_jsonl(args.rejected, args, [manifest_record(e) for e in rejected])
    print(
        json.dumps({"kept": len(kept), "rejected": len(rejected)}, sort_keys=True)
    )
    return 0


def _decode_record(result: DecodeResult) -> dict:
    return {
        "tokens": list(result.tokens),
        "frame_indices": list(result.frame_indices),
        "timestamps_s": list(result.timestamps_s),
        "text": " ".join(str(tok) for tok in result.tokens),
    }


def _cmd_decode_sim(args: argparse.Namespace) -> int:
    if args.frame_duration <= 0:
        raise CliError("--frame-duration must be positive")
    if args.max_tokens_per_frame < 1:
        raise CliError("--max-tokens-per-frame must be >= 1")
    model = load_model(args.model)
    if args.frames:
        frames = load_frames(args.frames)
        model = dataclasses.replace(model, encoder_out=frames)
    result = greedy_decode(model, args.frame_duration, args.max_tokens_per_frame)
    _write_jsonl(args.out, args, [_decode_record(result)])
    return 0


def _cmd_rnnt_check(args: argparse.Namespace) -> int:
    if args.trials < 1 or args.grad_trials < 0:
        raise CliError("--trials must be >= 1 and --grad-trials >= 0")
    if args.unroll < 1:
        raise CliError("--unroll must be >= 1")
    rng = np.random.default_rng(args.seed)
    max_rel_loss = 0.0
    max_enum_diff = 0.0
    enum_checked = 0
    unroll_bitwise = True
    for _ in range(args.trials):
        model, labels = random_instance(rng, args.max_t, args.max_u)
        seq = rnnt_loss_sequential(model, labels, unroll=args.unroll)
        if args.unroll != 1:
            base = rnnt_loss_sequential(model, labels, unroll=1)
            unroll_bitwise &= seq.loss == base.loss and all(
                np.array_equal(getattr(seq.grads, f.name), getattr(base.grads, f.name))
                for f in dataclasses.fields(seq.grads)
            )
        lattice = full_lattice(model, labels)
        oracle = rnnt_loss_oracle(lattice, labels)
        denom = oracle if oracle > 0 else 1.0
        max_rel_loss = max(max_rel_loss, abs(seq.loss - oracle) / denom)
        if model.num_frames + len(labels) <= 12:
            exhaustive = enumerate_alignments_loss(lattice, labels)
            max_enum_diff = max(max_enum_diff, abs(oracle - exhaustive))
            enum_checked += 1

    max_grad_rel = 0.0
    grad_rng = np.random.default_rng(args.seed + 1)
    for _ in range(args.grad_trials):
        model, labels = random_instance(grad_rng, 6, 4, 6, 3)
        analytic = rnnt_loss_sequential(model, labels).grads
        numeric = finite_difference_grads(model, labels)
        for field in dataclasses.fields(analytic):
            a = getattr(analytic, field.name)
            b = getattr(numeric, field.name)
            scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-2)
            max_grad_rel = max(max_grad_rel, float(np.max(np.abs(a - b) / scale)))

    body = {
        "trials": args.trials,
        "max_rel_loss_diff": max_rel_loss,
        "enum_checked": enum_checked,
        "max_enum_abs_diff": max_enum_diff,
        "grad_trials": args.grad_trials,
        "max_grad_rel_err": max_grad_rel,
        "unroll": args.unroll,
        "unroll_bitwise_equal": unroll_bitwise,
        "passed": bool(
            max_rel_loss <= 1e-6
            and max_enum_diff <= 1e-9
            and max_grad_rel <= 1e-4
            and unroll_bitwise
        ),
    }
    report = {"schema_version": SCHEMA_VERSION, "provenance": _provenance(args)}
    report.update(body)
    if args.out:
        _write_json_report(args.out, args, body)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if body["passed"] else 2


def _cmd_bestrq_targets(args: argparse.Namespace) -> int:
    try:
        cfg = MaskConfig(p_mask=args.p_mask, n_span=args.span, sigma=args.sigma, seed=args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    if args.heads < 1 or args.code_dim < 1 or args.codebook_size < 1:
        raise CliError("--heads, --code-dim, and --codebook-size must be >= 1")
    features = load_frames(args.features)
    rng = np.random.default_rng(cfg.seed)
    plan = sample_masks(features.shape[0], cfg, rng)
    bank = make_quantizer_bank(
        features.shape[1], args.code_dim, args.heads, args.codebook_size, seed=cfg.seed
    )
    labels = quantize_targets(features, plan, bank)
    tmp = Path(str(args.out) + ".part")
    save_targets(labels, tmp)
    os.replace(tmp, args.out)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "provenance": _provenance(args),
        "n_frames": int(features.shape[0]),
        "n_starts": len(plan.starts),
        "n_masked": len(plan.masked),
        "heads": args.heads,
        "codebook_size": args.codebook_size,
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _load_pool(path: str) -> CsPool:
    entries = read_manifest(path)
    if not entries:
        raise CliError(f"pool manifest {path!r} is empty")
    languages = {entry.language for entry in entries}
    if len(languages) != 1:
        raise CliError(f"pool manifest {path!r} mixes languages {sorted(languages)}")
    return CsPool(
        entries[0].language,
        tuple(PoolEntry(e.audio_path, e.text, e.duration_s) for e in entries),
    )


def _cmd_cs_build(args: argparse.Namespace) -> int:
    if args.count < 1:
        raise CliError("--count must be >= 1")
    pool_a = _load_pool(args.pool_a)
    pool_b = _load_pool(args.pool_b)
    if pool_a.language == pool_b.language:
        raise CliError("pools must have different languages")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = build_cs_set(pool_a, pool_b, args.count, base_seed=args.seed)
    records = []
    for i, sample in enumerate(samples):
        name = f"cs_{i:04d}.wav"
        wav_path = out_dir / name
        buffer = concat_sample_audio(sample, read_wav)
        tmp = wav_path.with_suffix(".wav.part")
        write_wav(buffer, tmp)
        os.replace(tmp, wav_path)
        boundaries = []
        cursor = 0.0
        for part in sample.parts[:-1]:
            cursor += part.duration_s
            boundaries.append(cursor)
        records.append(
            {
                "audio_path": str(wav_path),
                "text": sample.transcript,
                "duration_s": buffer.duration_s,
                "language": f"{pool_a.language}-{pool_b.language}",
                "target_s": sample.target_s,
                "total_s": sample.total_s,
                "n_parts": len(sample.parts),
                "part_languages": list(sample.languages),
                "part_refs": [part.audio_ref for part in sample.parts],
                "boundaries_s": boundaries,
            }
        )
    _write_jsonl(out_dir / "manifest.jsonl", args, records)
    print(json.dumps({"samples": len(samples), "out_dir": str(out_dir)}, sort_keys=True))
    return 0


def _featurize(samples: np.ndarray, sample_rate_hz: int, frame_duration_s: float, dim: int) -> np.ndarray:
    """Per-frame RMS in feature column 0, zeros elsewhere; the simplest
    signal-dependent encoder stand-in for simulation and timing runs."""
    frame_len = max(1, int(round(frame_duration_s * sample_rate_hz)))
    n_frames = (len(samples) + frame_len - 1) // frame_len
    features = np.zeros((n_frames, dim))
    for t in range(n_frames):
        block = samples[t * frame_len : (t + 1) * frame_len]
        features[t, 0] = math.sqrt(float(np.mean(np.square(block))))
    return features


def _decode_chunks(audio, chunks, model, frame_duration_s, max_tokens_per_frame):
    outputs = []
    sr = audio.sample_rate_hz
    for chunk in chunks:
        lo = int(round(chunk.start_s * sr))
        hi = int(round(chunk.end_s * sr))
        segment = audio.samples[lo:hi]
        if len(segment) == 0:
            outputs.append((chunk, []))
            continue
        features = _featurize(segment, sr, frame_duration_s, model.hidden_dim)
        chunk_model = dataclasses.replace(model, encoder_out=features)
        result = greedy_decode(chunk_model, frame_duration_s, max_tokens_per_frame)
        words = [
            TimedWord(str(tok), ts) for tok, ts in zip(result.tokens, result.timestamps_s)
        ]
        outputs.append((chunk, words))
    return outputs


def _cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _vad_config_from(args)
    if args.frame_duration <= 0:
        raise CliError("--frame-duration must be positive")
    if args.max_tokens_per_frame < 1:
        raise CliError("--max-tokens-per-frame must be >= 1")
    audio = read_wav(args.infile)
    model = load_model(args.model)
    if len(audio.samples) == 0:
        merged_text, merged_words, chunks = "", [], []
    else:
        regions = detect_speech(audio, cfg)
        chunks = chunk_audio(audio, regions, cfg)
        outputs = _decode_chunks(
            audio, chunks, model, args.frame_duration, args.max_tokens_per_frame
        )
        merged = merge_chunks(outputs, args.bias)
        merged_text = merged.text
        merged_words = [{"text": w.text, "start_s": w.start_s} for w in merged.words]
    _write_jsonl(
        args.out,
        args,
        [
            {
                "audio_path": args.infile,
                "text": merged_text,
                "words": merged_words,
                "n_chunks": len(chunks),
            }
        ],
    )
    return 0


def _cmd_rtf(args: argparse.Namespace) -> int:
    stage_names = [name.strip() for name in args.stages.split(",") if name.strip()]
    known = {"read", "chunk", "decode"}
    unknown = [name for name in stage_names if name not in known]
    if unknown:
        raise CliError(f"unknown stages {unknown}; choose from {sorted(known)}")
    if not stage_names:
        raise CliError("need at least one stage")
    if "decode" in stage_names and not args.model:
        raise CliError("the decode stage needs --model")
    cfg = _vad_config_from(args)
    model = load_model(args.model) if args.model else None
    entries = read_manifest(args.manifest)
    if not entries:
        raise CliError("manifest is empty")

    def stage_read(path: str):
        return read_wav(path)

    def stage_chunk(audio):
        regions = detect_speech(audio, cfg)
        return audio, chunk_audio(audio, regions, cfg)

    def stage_decode(payload):
        audio, chunks = payload
        return _decode_chunks(
            audio, chunks, model, args.frame_duration, args.max_tokens_per_frame
        )

    registry = {"read": stage_read, "chunk": stage_chunk, "decode": stage_decode}
    stages = [(name, registry[name]) for name in stage_names]
    if stage_names[0] == "read":
        payloads: list = [entry.audio_path for entry in entries]
    else:
        payloads = [read_wav(entry.audio_path) for entry in entries]
        if stage_names[0] == "decode":
            payloads = [stage_chunk(buffer) for buffer in payloads]
    audio_s = [entry.duration_s for entry in entries]
    report = rtf_bench(stages, payloads, audio_s)
    _write_json_report(
        args.out,
        args,
        {
            "wall_s_total": report.wall_s_total,
            "audio_s_total": report.audio_s_total,
            "rtf": report.rtf,
            "stage_rtfs": report.stage_rtfs,
            "n_files": len(entries),
        },
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asrkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"asrkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("wer", help="score hypothesis manifests against references")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--per-file", default=None, help="optional per-file CSV")
    p.add_argument("--summary", required=True, help="summary JSON path")
    p.set_defaults(func=_cmd_wer)

    p = sub.add_parser("halluc", help="consecutive-error rates per hour")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--n", default="1..9", help="threshold, e.g. 5 or 1..9")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_halluc)

    p = sub.add_parser("ambient", help="fabrication stats on should-be-silent audio")
    p.add_argument("--hyp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ambient)

    p = sub.add_parser("ts-eval", help="timestamp accuracy curve and bias")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--tolerances", default="0.02,0.05,0.1,0.2,0.5")
    p.add_argument("--out", required=True, help="curve CSV path")
    p.set_defaults(func=_cmd_ts_eval)

    p = sub.add_parser("chunk", help="VAD-driven long-form chunking")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    _add_vad_flags(p)
    p.set_defaults(func=_cmd_chunk)

    p = sub.add_parser("filter", help="corpus filtering verdicts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", choices=["unsupervised", "pseudo"], required=True)
    p.add_argument("--out", required=True, help="kept entries JSONL")
    p.add_argument("--rejected", required=True, help="rejected entries JSONL")
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("decode-sim", help="greedy decode of a serialized toy model")
    p.add_argument("--model", required=True)
    p.add_argument("--frames", default=None, help="optional feature file replacing the model's encoder output")
    p.add_argument("--out", required=True)
    p.add_argument("--frame-duration", type=float, default=0.04)
    p.add_argument("--max-tokens-per-frame", type=int, default=5)
    p.set_defaults(func=_cmd_decode_sim)

    p = sub.add_parser("rnnt-check", help="loss/gradient verification harness")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--max-t", type=int, default=20)
    p.add_argument("--max-u", type=int, default=10)
    p.add_argument("--grad-trials", type=int, default=5)
    p.add_argument("--unroll", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--report", choices=["json"], default="json")
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(func=_cmd_rnnt_check)

    p = sub.add_parser("bestrq-targets", help="masking plan + frozen-quantizer labels")
    p.add_argument("--features", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--p-mask", type=float, default=0.01)
    p.add_argument("--span", type=int, default=10)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--code-dim", type=int, default=16)
    p.add_argument("--codebook-size", type=int, default=8192)
    p.add_argument("--out", required=True, help="targets binary path")
    p.set_defaults(func=_cmd_bestrq_targets)

    p = sub.add_parser("cs-build", help="synthesize a code-switching test set")
    p.add_argument("--pool-a", required=True)
    p.add_argument("--pool-b", required=True)
    p.add_argument("--count", type=int, default=250)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_cs_build)

    p = sub.add_parser("rtf", help="real-time-factor benchmark over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--stages", default="chunk,decode")
    p.add_argument("--model", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--frame-duration", type=float, default=0.04)
    p.add_argument("--max-tokens-per-frame", type=int, default=5)
    _add_vad_flags(p)
    p.set_defaults(func=_cmd_rtf)

    p = sub.add_parser("pipeline", help="chunk, decode, and merge one audio file")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bias", type=float, default=-0.065, help="timestamp offset applied at merge (s)")
    p.add_argument("--frame-duration", type=float, default=0.04)
    p.add_argument("--max-tokens-per-frame", type=int, default=5)
    _add_vad_flags(p)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
