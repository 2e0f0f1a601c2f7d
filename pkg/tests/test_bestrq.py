import math

import numpy as np
import pytest

from asrkit.bestrq import (
    DEFAULT_P_MASK,
    DimensionMismatchError,
    MaskConfig,
    MaskPlan,
    QuantizerBank,
    ShapeMismatchError,
    apply_mask,
    load_targets,
    make_quantizer_bank,
    masked_prediction_loss,
    quantize_targets,
    sample_masks,
    save_targets,
)


class TestSampleMasks:
    def test_start_count_is_floor(self):
        rng = np.random.default_rng(0)
        cfg = MaskConfig()
        assert len(sample_masks(3200, cfg, rng).starts) == 32
        assert len(sample_masks(99, cfg, rng).starts) == 0
        assert len(sample_masks(150, cfg, rng).starts) == 1

    def test_masked_union_bounds(self):
        rng = np.random.default_rng(1)
        cfg = MaskConfig()
        for _ in range(200):
            n = int(rng.integers(100, 4000))
            plan = sample_masks(n, cfg, rng)
            expected_starts = math.floor(n * cfg.p_mask)
            assert len(plan.starts) == expected_starts
            assert len(plan.masked) <= expected_starts * cfg.n_span
            assert all(0 <= i < n for i in plan.masked)
            assert list(plan.masked) == sorted(set(plan.masked))

    def test_union_matches_manual_expansion(self):
        rng = np.random.default_rng(2)
        cfg = MaskConfig(n_span=4)
        n = 50
        plan = sample_masks(n, cfg, rng)
        manual = set()
        for s in plan.starts:
            manual.update(range(s, min(s + 4, n)))
        assert set(plan.masked) == manual

    def test_spans_clip_at_sequence_end(self):
        cfg = MaskConfig(p_mask=0.5, n_span=10)
        rng = np.random.default_rng(3)
        for _ in range(50):
            plan = sample_masks(4, cfg, rng)
            assert all(i < 4 for i in plan.masked)

    def test_zero_frames_rejected(self):
        with pytest.raises(ValueError):
            sample_masks(0, MaskConfig(), np.random.default_rng(0))

    @pytest.mark.parametrize(
        "kwargs", [{"p_mask": 0.0}, {"p_mask": 1.0}, {"n_span": 0}, {"sigma": 0.0}]
    )
    def test_bad_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            MaskConfig(**kwargs)


class TestApplyMask:
    def test_unmasked_rows_bit_identical(self):
        rng = np.random.default_rng(5)
        feats = rng.standard_normal((40, 6))
        plan = MaskPlan(starts=(3,), masked=(3, 4, 5))
        out = apply_mask(feats, plan, 0.1, np.random.default_rng(7))
        keep = [i for i in range(40) if i not in plan.masked]
        assert np.array_equal(out[keep], feats[keep])
        assert not np.array_equal(out[3], feats[3])

    def test_input_never_modified(self):
        feats = np.ones((10, 2))
        before = feats.copy()
        apply_mask(feats, MaskPlan((0,), (0, 1)), 0.1, np.random.default_rng(0))
        assert np.array_equal(feats, before)

    def test_fill_statistics(self):
        # sigma within 5% on 1e5 draws
        n, d = 2000, 50
        feats = np.zeros((n, d))
        plan = MaskPlan(tuple(range(n)), tuple(range(n)))
        out = apply_mask(feats, plan, 0.1, np.random.default_rng(11))
        fill = out.reshape(-1)
        assert fill.size == 100_000
        assert abs(float(np.mean(fill))) < 0.01
        assert abs(float(np.std(fill)) - 0.1) < 0.005

    def test_empty_plan_is_copy(self):
        feats = np.ones((5, 2))
        out = apply_mask(feats, MaskPlan((), ()), 0.1, np.random.default_rng(0))
        assert np.array_equal(out, feats)
        assert out is not feats

    def test_out_of_range_index_rejected(self):
        with pytest.raises(IndexError):
            apply_mask(np.ones((5, 2)), MaskPlan((9,), (9,)), 0.1, np.random.default_rng(0))


class TestQuantizerBank:
    def test_seed_pins_bank_bitwise(self):
        a = make_quantizer_bank(16, 4, n_heads=3, codebook_size=32, seed=9)
        b = make_quantizer_bank(16, 4, n_heads=3, codebook_size=32, seed=9)
        assert np.array_equal(a.projection, b.projection)
        assert np.array_equal(a.codebooks, b.codebooks)
        c = make_quantizer_bank(16, 4, n_heads=3, codebook_size=32, seed=10)
        assert not np.array_equal(a.projection, c.projection)

    def test_codebook_rows_unit_norm(self):
        bank = make_quantizer_bank(8, 5, n_heads=2, codebook_size=64, seed=1)
        norms = np.linalg.norm(bank.codebooks, axis=-1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_non_unit_codebooks_rejected(self):
        with pytest.raises(ValueError):
            QuantizerBank(np.eye(3), 2.0 * np.ones((1, 4, 3)), seed=0)

    def test_shapes(self):
        bank = make_quantizer_bank(12, 6, n_heads=4, codebook_size=17, seed=2)
        assert bank.projection.shape == (12, 6)
        assert bank.codebooks.shape == (4, 17, 6)
        assert bank.n_heads == 4 and bank.codebook_size == 17


class TestQuantizeTargets:
    def test_determinism(self):
        rng = np.random.default_rng(13)
        feats = rng.standard_normal((60, 10))
        plan = MaskPlan((0,), tuple(range(0, 60, 3)))
        bank = make_quantizer_bank(10, 4, n_heads=3, codebook_size=50, seed=0)
        a = quantize_targets(feats, plan, bank)
        b = quantize_targets(feats, plan, bank)
        assert np.array_equal(a, b)
        assert a.shape == (3, len(plan.masked))

    def test_positive_scale_invariance(self):
        rng = np.random.default_rng(17)
        feats = rng.standard_normal((30, 8))
        plan = MaskPlan((0,), tuple(range(30)))
        bank = make_quantizer_bank(8, 4, n_heads=2, codebook_size=40, seed=3)
        base = quantize_targets(feats, plan, bank)
        for scale in (1e-3, 0.5, 7.0, 1e3):
            assert np.array_equal(quantize_targets(scale * feats, plan, bank), base)

    def test_per_row_scale_invariance(self):
        rng = np.random.default_rng(19)
        feats = rng.standard_normal((25, 6))
        plan = MaskPlan((0,), tuple(range(25)))
        bank = make_quantizer_bank(6, 3, n_heads=2, codebook_size=30, seed=4)
        base = quantize_targets(feats, plan, bank)
        scales = rng.uniform(0.01, 100.0, size=(25, 1))
        assert np.array_equal(quantize_targets(scales * feats, plan, bank), base)

    def test_matches_explicit_cosine_argmax(self):
        rng = np.random.default_rng(23)
        feats = rng.standard_normal((12, 5))
        plan = MaskPlan((0,), (1, 4, 7))
        bank = make_quantizer_bank(5, 3, n_heads=2, codebook_size=20, seed=5)
        labels = quantize_targets(feats, plan, bank)
        for col, frame in enumerate(plan.masked):
            p = feats[frame] @ bank.projection
            for q in range(2):
                sims = [
                    float(np.dot(p, c) / (np.linalg.norm(p) * np.linalg.norm(c)))
                    for c in bank.codebooks[q]
                ]
                assert labels[q, col] == int(np.argmax(sims))

    def test_empty_mask_gives_empty_labels(self):
        bank = make_quantizer_bank(4, 2, n_heads=2, codebook_size=8, seed=6)
        labels = quantize_targets(np.ones((5, 4)), MaskPlan((), ()), bank)
        assert labels.shape == (2, 0)

    def test_dim_mismatch_rejected(self):
        bank = make_quantizer_bank(4, 2, n_heads=1, codebook_size=8, seed=7)
        with pytest.raises(DimensionMismatchError):
            quantize_targets(np.ones((5, 3)), MaskPlan((), ()), bank)


class TestMaskedPredictionLoss:
    def test_uniform_logits_give_log_v(self):
        logits = np.zeros((2, 6, 8))
        targets = np.zeros((2, 6), dtype=np.int64)
        assert masked_prediction_loss(logits, targets) == pytest.approx(
            math.log(8), abs=1e-12
        )

    def test_perfect_prediction_loss_goes_to_zero(self):
        targets = np.array([[1, 3], [0, 2]])
        logits = np.zeros((2, 2, 4))
        for q in range(2):
            for i in range(2):
                logits[q, i, targets[q, i]] = 50.0
        assert masked_prediction_loss(logits, targets) < 1e-10

    def test_empty_mask_is_zero(self):
        assert masked_prediction_loss(np.zeros((3, 0, 5)), np.zeros((3, 0))) == 0.0

    def test_matches_manual_mean(self):
        rng = np.random.default_rng(29)
        logits = rng.standard_normal((2, 4, 6))
        targets = rng.integers(0, 6, size=(2, 4))
        got = masked_prediction_loss(logits, targets)
        acc = []
        for q in range(2):
            for i in range(4):
                row = logits[q, i]
                lse = math.log(sum(math.exp(x) for x in row))
                acc.append(-(row[targets[q, i]] - lse))
        assert got == pytest.approx(sum(acc) / len(acc), rel=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeMismatchError):
            masked_prediction_loss(np.zeros((2, 3, 4)), np.zeros((2, 2)))
        with pytest.raises(ShapeMismatchError):
            masked_prediction_loss(np.zeros((2, 3, 4)), np.full((2, 3), 9))


class TestTargetsFile:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(31)
        labels = rng.integers(0, 8192, size=(8, 33)).astype(np.int64)
        path = tmp_path / "t.bin"
        save_targets(labels, path)
        np.testing.assert_array_equal(load_targets(path), labels)

    def test_empty_mask_round_trip(self, tmp_path):
        path = tmp_path / "e.bin"
        save_targets(np.zeros((8, 0), dtype=np.int64), path)
        assert load_targets(path).shape == (8, 0)

    def test_size_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        save_targets(np.zeros((2, 3), dtype=np.int64), path)
        path.write_bytes(path.read_bytes() + b"\x00\x00")
        with pytest.raises(ValueError):
            load_targets(path)


def test_default_mask_rate_lands_in_band():
    """floor(n * 0.01) spans of 10 frames minus overlap: the realized masked
    fraction at n=3200 concentrates between 8% and 10%."""
    rng = np.random.default_rng(37)
    cfg = MaskConfig()
    assert cfg.p_mask == DEFAULT_P_MASK
    fractions = []
    for _ in range(200):
        plan = sample_masks(3200, cfg, rng)
        fractions.append(len(plan.masked) / 3200.0)
    mean = float(np.mean(fractions))
    assert 0.08 <= mean <= 0.10
