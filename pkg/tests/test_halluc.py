import numpy as np
import pytest

from asrkit.alignment import Alignment, AlignmentOp, align_words
from asrkit.halluc import (
    BaselineZeroError,
    EmptyInputError,
    ZeroDurationError,
    ambient_stats,
    consecutive_error_rate,
    extract_runs,
    halluc_report,
    relative_reduction,
)


def _ali(kinds):
    """Build an Alignment from a kind sequence; indices are not used by the
    run extractor so they can be synthetic."""
    ops = []
    ri = hi = 0
    for k in kinds:
        r = ri if k in ("match", "substitute", "delete") else None
        h = hi if k in ("match", "substitute", "insert") else None
        ops.append(AlignmentOp(kind=k, ref_index=r, hyp_index=h))
        if r is not None:
            ri += 1
        if h is not None:
            hi += 1
    return Alignment(ops=tuple(ops), n_ref=ri, n_hyp=hi)


class TestExtractRuns:
    def test_maximal_runs_fabrication(self):
        kinds = ["insert", "substitute", "match", "insert", "match", "insert", "insert"]
        runs = extract_runs(_ali(kinds), "fabrication")
        assert [(r.length, r.start_op_index) for r in runs] == [(2, 0), (1, 3), (2, 5)]

    def test_delete_breaks_fabrication_run(self):
        runs = extract_runs(_ali(["insert", "delete", "insert"]), "fabrication")
        assert [r.length for r in runs] == [1, 1]

    def test_omission_counts_only_deletes(self):
        runs = extract_runs(_ali(["delete", "delete", "substitute", "delete"]), "omission")
        assert [r.length for r in runs] == [2, 1]

    def test_any_error_pools_all_three(self):
        runs = extract_runs(
            _ali(["insert", "delete", "substitute", "match", "delete"]), "any_error"
        )
        assert [r.length for r in runs] == [3, 1]

    def test_all_match_yields_nothing(self):
        assert extract_runs(_ali(["match", "match"]), "fabrication") == []

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            extract_runs(_ali(["match"]), "mistake")


class TestConsecutiveErrorRate:
    def test_counts_runs_of_at_least_n(self):
        # Run lengths 3 and 1; with n=2 only the first counts.
        ali = _ali(["insert", "insert", "insert", "match", "insert"])
        rate = consecutive_error_rate([(ali, 0.5)], n=2, kind="fabrication")
        assert rate == 1.0 / 0.5

    def test_pools_counts_and_hours(self):
        a = _ali(["insert", "insert"])
        b = _ali(["insert", "insert", "match", "insert", "insert"])
        rate = consecutive_error_rate([(a, 0.25), (b, 0.75)], n=2, kind="fabrication")
        assert rate == 3.0 / 1.0

    def test_zero_hours_rejected(self):
        with pytest.raises(ZeroDurationError):
            consecutive_error_rate([(_ali(["match"]), 0.0)], n=1, kind="any_error")

    def test_n_below_one_rejected(self):
        with pytest.raises(ValueError):
            consecutive_error_rate([(_ali(["match"]), 1.0)], n=0, kind="any_error")

    def test_monotone_in_n(self):
        rng = np.random.default_rng(11)
        vocab = ["a", "b", "c", "d"]
        for _ in range(50):
            pairs = []
            for _ in range(4):
                ref = [vocab[int(rng.integers(0, 4))] for _ in range(int(rng.integers(0, 15)))]
                hyp = [vocab[int(rng.integers(0, 4))] for _ in range(int(rng.integers(0, 15)))]
                pairs.append((align_words(ref, hyp), 0.5))
            rates = [
                consecutive_error_rate(pairs, n=n, kind="any_error") for n in range(1, 7)
            ]
            assert all(x >= y for x, y in zip(rates, rates[1:]))


class TestHallucReport:
    def test_fields(self):
        # Fabrication runs: (I,I) and (S,I); omission runs: (D); any_error: one
        # run covering all five ops.
        ali = _ali(["insert", "insert", "delete", "substitute", "insert"])
        rep = halluc_report([(ali, 0.5)], n=1)
        assert rep.total_hours == 0.5
        assert rep.fr_per_hour == 2.0 / 0.5
        assert rep.or_per_hour == 1.0 / 0.5
        assert rep.hr_per_hour == 1.0 / 0.5
        assert rep.n == 1


class TestRelativeReduction:
    def test_percent(self):
        assert relative_reduction(rate_ours=2.0, rate_theirs=8.0) == 75.0

    def test_zero_baseline_rejected(self):
        with pytest.raises(BaselineZeroError):
            relative_reduction(rate_ours=1.0, rate_theirs=0.0)

    def test_negative_when_worse(self):
        assert relative_reduction(rate_ours=3.0, rate_theirs=2.0) == -50.0


class TestAmbientStats:
    def test_known_mixture(self):
        hyps = ["", "   ", "abcde", "0123456789x", "hi"]
        stats = ambient_stats(hyps)
        assert stats.non_blank_rate == 3.0 / 5.0
        # char counts over non-blank outputs: 5, 11, 2
        assert stats.mean_chars == pytest.approx((5 + 11 + 2) / 3.0)
        assert stats.median_chars == 5
        assert stats.frac_ge_10_chars == 1.0 / 5.0

    def test_all_blank(self):
        stats = ambient_stats(["", "  "])
        assert stats.non_blank_rate == 0.0
        assert stats.mean_chars == 0.0
        assert stats.median_chars == 0
        assert stats.frac_ge_10_chars == 0.0

    def test_median_low_on_even_count(self):
        stats = ambient_stats(["ab", "abcd"])
        assert stats.median_chars == 2

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            ambient_stats([])
