"""Tests for tail counting, Wilson bands and the rate estimator."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from experiments.statistics import (
    CURVE_HEADER,
    DETAIL_HEADER,
    TailCounts,
    band_report,
    build_curve,
    rate_transform,
    report_passes,
    scaled_deviations,
    wilson_interval,
)

from conftest import make_sample


GRID = (0.0, 0.5, 1.0, 2.0)


def test_wilson_interval():
    lo, hi = wilson_interval(50, 100, 0.95)
    assert lo == pytest.approx(0.40383, abs=1e-4)
    assert hi == pytest.approx(0.59617, abs=1e-4)
    assert wilson_interval(0, 100)[0] == 0.0
    assert wilson_interval(100, 100)[1] == 1.0
    with pytest.raises(ValueError):
        wilson_interval(5, 3)


def test_rate_transform():
    assert rate_transform(1.0, 100, 10.0) == 0.0
    assert rate_transform(0.0, 100, 10.0) == math.inf
    assert rate_transform(math.exp(-1.0), 100, 10.0) == pytest.approx(1.0)


def test_scaled_deviations():
    samples = [make_sample(7.0), make_sample(5.0), make_sample(1.0, hit=False)]
    deviations = scaled_deviations(samples, 6.0, 100, 10.0)
    np.testing.assert_allclose(deviations[:2], [10.0, -10.0])
    assert deviations[2] == math.inf


class TestTailCounts:

    def test_censored_counts_in_upper_tail_only(self):
        samples = [
            make_sample(6.0 + 0.07),          # d = 0.7
            make_sample(6.0 - 0.15),          # d = -1.5
            make_sample(6.0 + 0.25),          # d = 2.5
            make_sample(3.0, hit=False, reason="horizon"),
            make_sample(0.4, hit=False, reason="extinct"),
        ]
        counts = TailCounts.from_samples(samples, GRID, 6.0, 100, 10.0)
        assert counts.upper.tolist() == [4, 4, 3, 3]
        assert counts.lower.tolist() == [1, 1, 1, 0]
        assert counts.two_sided.tolist() == [5, 5, 4, 3]
        assert (counts.replicas, counts.hits, counts.extinct, counts.horizon) == (5, 3, 1, 1)
        assert counts.censored_fraction == pytest.approx(0.4)

    def test_merge_matches_pooling(self):
        first = [make_sample(6.0 + 0.01 * k) for k in range(-5, 5)]
        second = [make_sample(6.0 + 0.02 * k) for k in range(-3, 7)]
        pooled = TailCounts.from_samples(first + second, GRID, 6.0, 100, 10.0)
        merged = TailCounts.from_samples(first, GRID, 6.0, 100, 10.0) + TailCounts.from_samples(second, GRID, 6.0, 100, 10.0)
        assert merged == pooled

    def test_empty_is_identity(self):
        counts = TailCounts.from_samples([make_sample(6.5)], GRID, 6.0, 100, 10.0)
        assert TailCounts.empty(GRID) + counts == counts

    def test_grids_must_match(self):
        with pytest.raises(ValueError):
            TailCounts.empty(GRID).merge(TailCounts.empty((0.0, 1.0)))

    @given(st.lists(st.lists(st.integers(0, 50), min_size=4, max_size=4), min_size=3, max_size=3))
    @settings(max_examples=50, deadline=None)
    def test_merge_is_associative(self, rows):
        a, b, c = (
            TailCounts(GRID, np.array(row, dtype=np.int64), np.array(row[::-1], dtype=np.int64), replicas=60, hits=sum(row) % 60)
            for row in rows
        )
        assert (a + b) + c == a + (b + c)
        assert a + b == b + a


def _curve(upper, lower, replicas=1000, n=10_000, a_n=10_000 ** 0.9, rate=None):
    counts = TailCounts(GRID, np.array(upper, dtype=np.int64), np.array(lower, dtype=np.int64), replicas=replicas, hits=replicas)
    rate = rate if rate is not None else [t * t / 2100.0 for t in GRID]
    return build_curve(counts, n, a_n, rate)


class TestCurve:

    def test_band_brackets_estimate(self):
        curve = _curve([500, 300, 100, 10], [500, 310, 90, 12])
        assert np.all(curve.band_lo <= curve.upper_estimate)
        assert np.all(curve.upper_estimate <= curve.band_hi)
        assert np.all(curve.lower_band_lo <= curve.lower_estimate)
        assert np.all(curve.lower_estimate <= curve.lower_band_hi)

    def test_zero_count_gives_infinite_estimate(self):
        curve = _curve([500, 100, 10, 0], [500, 100, 10, 0])
        assert curve.upper_estimate[-1] == math.inf
        assert curve.band_hi[-1] == math.inf

    def test_rows_match_headers(self):
        curve = _curve([500, 300, 100, 10], [500, 310, 90, 12])
        assert all(len(row) == len(CURVE_HEADER) for row in curve.rows())
        assert all(len(row) == len(DETAIL_HEADER) for row in curve.detail_rows())
        assert curve.rows()[1][:3] == (0.5, 300, 310)

    def test_band_report(self):
        scale = 10_000 / (10_000 ** 0.9) ** 2
        # upper estimates sit exactly on the rate
        upper = [500, 300, 100, 50]
        rate = [-scale * math.log(c / 1000) for c in upper]
        curve = _curve(upper, [100, 500, 20, 0], rate=rate)
        report = band_report(curve, min_count=30)
        assert [row.upper_contains for row in report] == [True, True, True, True]
        assert report[2].lower_contains is None
        assert report[3].lower_contains is None
        assert report[0].lower_contains is False
        assert not report_passes(report)
