import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stallwatch.background import (
    MIN_PARTIAL_FRACTION,
    derive_seed,
    median_frame,
    sample_indices,
    window_bounds,
)
from stallwatch.errors import DimensionMismatch, EmptyInput

from conftest import make_frame


class TestSeed:
    def test_deterministic(self):
        assert derive_seed(0, "v1", 0) == derive_seed(0, "v1", 0)

    def test_sensitive_to_all_inputs(self):
        base = derive_seed(0, "v1", 0)
        assert derive_seed(1, "v1", 0) != base
        assert derive_seed(0, "v2", 0) != base
        assert derive_seed(0, "v1", 300) != base


class TestSampling:
    def test_count_is_ceil(self):
        assert len(sample_indices(range(100), 0.10, seed=1)) == 10
        assert len(sample_indices(range(101), 0.10, seed=1)) == 11
        assert len(sample_indices(range(5), 0.10, seed=1)) == 1

    def test_sorted_unique_within_window(self):
        window = range(300, 600)
        picks = sample_indices(window, 0.10, seed=7)
        assert picks == sorted(picks)
        assert len(set(picks)) == len(picks)
        assert all(i in window for i in picks)

    def test_same_seed_same_picks(self):
        a = sample_indices(range(1000), 0.10, seed=42)
        b = sample_indices(range(1000), 0.10, seed=42)
        assert a == b

    def test_empty_window(self):
        with pytest.raises(EmptyInput):
            sample_indices(range(0), 0.10, seed=0)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            sample_indices(range(10), 0.0, seed=0)

    @given(st.integers(1, 500), st.floats(0.01, 1.0), st.integers(0, 2**31))
    @settings(max_examples=100, deadline=None)
    def test_count_property(self, n, fraction, seed):
        picks = sample_indices(range(n), fraction, seed)
        assert len(picks) == math.ceil(fraction * n)


class TestMedian:
    def test_three_frames_pixelwise(self):
        frames = [make_frame([[v]]) for v in (9, 1, 5)]
        assert median_frame(frames) == make_frame([[5]])

    def test_even_count_lower_middle(self):
        frames = [make_frame([[v]]) for v in (1, 2, 3, 4)]
        assert median_frame(frames) == make_frame([[2]])

    def test_transient_erased(self):
        # 9 frames of bright "traffic", 12 of dark "road": majority wins
        frames = [make_frame([[255]])] * 9 + [make_frame([[40]])] * 12
        assert median_frame(frames) == make_frame([[40]])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            median_frame([])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            median_frame([make_frame([[1]]), make_frame([[1, 2]])])

    def test_output_value_was_observed(self, rng):
        frames = [make_frame(rng.integers(0, 256, (4, 4))) for _ in range(6)]
        med = median_frame(frames).pixels
        stack = np.stack([f.pixels for f in frames])
        assert ((stack == med).any(axis=0)).all()


class TestWindows:
    def test_exact_partition(self):
        # 3000 frames at 10 fps, 30 s windows -> ten 300-frame windows
        bounds = window_bounds(3000, 10.0, 30.0)
        assert len(bounds) == 10
        assert bounds[0] == (0, 300) and bounds[-1] == (2700, 3000)

    def test_single_long_window(self):
        assert window_bounds(3000, 10.0, 300.0) == [(0, 3000)]

    def test_tiny_tail_merged(self):
        # 3010 frames: the 10-frame tail is under 10% of a 300-frame window
        bounds = window_bounds(3010, 10.0, 30.0)
        assert len(bounds) == 10
        assert bounds[-1] == (2700, 3010)

    def test_big_tail_kept(self):
        bounds = window_bounds(3100, 10.0, 30.0)
        assert len(bounds) == 11
        assert bounds[-1] == (3000, 3100)

    def test_merge_threshold_boundary(self):
        # tail of exactly 10% is kept, just under is merged
        wlen = 300
        keep = window_bounds(wlen + int(MIN_PARTIAL_FRACTION * wlen), 10.0, 30.0)
        assert len(keep) == 2
        merge = window_bounds(wlen + int(MIN_PARTIAL_FRACTION * wlen) - 1, 10.0, 30.0)
        assert len(merge) == 1

    @given(st.integers(1, 5000), st.floats(1.0, 60.0), st.floats(1.0, 400.0))
    @settings(max_examples=200, deadline=None)
    def test_partition_property(self, frame_count, fps, window_s):
        bounds = window_bounds(frame_count, fps, window_s)
        assert bounds[0][0] == 0
        assert bounds[-1][1] == frame_count
        for (a0, a1), (b0, b1) in zip(bounds, bounds[1:]):
            assert a1 == b0
        assert all(s < e for s, e in bounds)
