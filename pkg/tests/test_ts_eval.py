import numpy as np
import pytest

from asrkit.ts_eval import (
    EmptyDeltasError,
    TimedWord,
    accuracy_curve,
    apply_bias,
    estimate_bias,
    timestamp_deltas,
)


def _timed(texts, times):
    return [TimedWord(t, s) for t, s in zip(texts, times)]


class TestTimestampDeltas:
    def test_only_matches_contribute(self):
        ref = _timed(["a", "b", "c"], [1.0, 2.0, 3.0])
        hyp = _timed(["a", "x", "c"], [1.1, 2.5, 2.9])
        res = timestamp_deltas(ref, hyp)
        assert res.matched == 2
        assert res.total_ref == 3
        np.testing.assert_allclose(res.deltas_s, [0.1, -0.1], atol=1e-12)

    def test_insertion_does_not_shift_pairing(self):
        ref = _timed(["a", "b"], [1.0, 2.0])
        hyp = _timed(["a", "zz", "b"], [1.0, 1.5, 2.25])
        res = timestamp_deltas(ref, hyp)
        assert res.matched == 2
        assert res.deltas_s[1] == pytest.approx(0.25)

    def test_no_matches(self):
        res = timestamp_deltas(_timed(["a"], [1.0]), _timed(["b"], [1.0]))
        assert res.matched == 0
        assert res.deltas_s == ()
        assert res.median_bias_s == 0.0

    def test_median_is_lower_median(self):
        ref = _timed(["a", "b", "c", "d"], [1.0, 2.0, 3.0, 4.0])
        hyp = _timed(["a", "b", "c", "d"], [1.1, 2.2, 3.3, 4.4])
        res = timestamp_deltas(ref, hyp)
        # deltas ~ [0.1, 0.2, 0.3, 0.4]; lower median is the second one.
        assert res.median_bias_s == pytest.approx(0.2)

    def test_negative_start_rejected(self):
        with pytest.raises(ValueError):
            TimedWord("a", -0.5)


class TestAccuracyCurve:
    def test_fractions(self):
        pts = accuracy_curve([-0.05, 0.1, 0.2], [0.05, 0.1, 0.5])
        assert pts == [(0.05, 1 / 3), (0.1, 2 / 3), (0.5, 1.0)]

    def test_boundary_is_inclusive(self):
        pts = accuracy_curve([0.1], [0.1])
        assert pts == [(0.1, 1.0)]

    def test_nondecreasing_and_saturates(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            deltas = rng.normal(0, 0.2, size=int(rng.integers(1, 40)))
            tols = np.sort(rng.uniform(0, 1.0, size=6))
            tols = list(tols) + [float(np.max(np.abs(deltas)))]
            fracs = [f for _, f in accuracy_curve(deltas, sorted(tols))]
            assert all(a <= b for a, b in zip(fracs, fracs[1:]))
            assert fracs[-1] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyDeltasError):
            accuracy_curve([], [0.1])


class TestBias:
    def test_estimate_and_correct(self):
        rng = np.random.default_rng(9)
        starts = np.sort(rng.uniform(1.0, 50.0, size=21))
        texts = ["w%d" % i for i in range(21)]
        ref = _timed(texts, starts)
        hyp = _timed(texts, starts + 0.1)
        bias = estimate_bias(timestamp_deltas(ref, hyp).deltas_s)
        assert bias == pytest.approx(0.1, abs=1e-9)
        fixed = apply_bias(hyp, -bias)
        residual = estimate_bias(timestamp_deltas(ref, fixed).deltas_s)
        assert abs(residual) <= 1e-9

    def test_apply_bias_clamps_at_zero(self):
        out = apply_bias(_timed(["a", "b"], [0.02, 5.0]), -0.065)
        assert out[0].start_s == 0.0
        assert out[1].start_s == pytest.approx(4.935)

    def test_empty_rejected(self):
        with pytest.raises(EmptyDeltasError):
            estimate_bias([])
