import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stallwatch.anomaly import (
    Candidate,
    DecisionParams,
    SupportProfile,
    coalesce_events,
    decide,
    extract_candidates,
    iou,
    merge_candidates,
    support_profile,
)
from stallwatch.media import AnomalyEvent, BBox, Detection
from stallwatch.roadmask import Mask


def det(x, y, w=16, h=6, score=1.0, frame=0, label="car"):
    return Detection(frame_index=frame, class_label=label, score=score,
                     bbox=BBox(x, y, w, h))


def full_mask(w=320, h=240):
    return Mask(np.ones((h, w), dtype=bool))


boxes = st.builds(BBox, st.integers(0, 300), st.integers(0, 300),
                  st.integers(1, 100), st.integers(1, 100))


class TestIou:
    def test_identity(self):
        b = BBox(3, 4, 10, 20)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 5, 5), BBox(10, 10, 5, 5)) == 0.0

    def test_touching_edges_zero(self):
        assert iou(BBox(0, 0, 5, 5), BBox(5, 0, 5, 5)) == 0.0

    def test_half_shift(self):
        # 10x10 boxes shifted by half the width: 50 / 150 overlap
        assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)) == pytest.approx(1 / 3)

    @given(boxes, boxes)
    @settings(max_examples=300, deadline=None)
    def test_symmetry_and_bounds(self, a, b):
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == iou(b, a)


class TestExtract:
    def test_gates(self):
        params = DecisionParams()
        mask = full_mask()
        frame_area = 320 * 240
        good = det(10, 10, 16, 6)
        low_score = det(40, 10, 16, 6, score=0.4)
        tiny = det(70, 10, 5, 5)  # 25 px < 0.001 * 76800
        cands = extract_candidates([(0.0, [good, low_score, tiny])], mask,
                                   params, frame_area, min_overlap=0.2)
        assert [c.bbox for c in cands] == [good.bbox]

    def test_off_road_rejected(self):
        bits = np.zeros((240, 320), dtype=bool)
        bits[100:130, :] = True
        cands = extract_candidates([(0.0, [det(10, 10), det(10, 110)])],
                                   Mask(bits), DecisionParams(), 320 * 240,
                                   min_overlap=0.2)
        assert [c.bbox for c in cands] == [BBox(10, 110, 16, 6)]


class TestMerge:
    def test_recurring_box_collapses(self):
        cands = [Candidate(BBox(10, 10, 16, 6), 0.9, first_seen=w * 30.0)
                 for w in range(4)]
        merged = merge_candidates(cands, iou_merge=0.5)
        assert len(merged) == 1
        assert merged[0].windows_seen == 4
        assert merged[0].first_seen == 0.0

    def test_distinct_boxes_kept(self):
        cands = [Candidate(BBox(10, 10, 16, 6), 0.9, 0.0),
                 Candidate(BBox(200, 10, 16, 6), 0.9, 0.0)]
        assert len(merge_candidates(cands, 0.5)) == 2

    def test_best_score_kept(self):
        cands = [Candidate(BBox(10, 10, 16, 6), 0.6, 0.0),
                 Candidate(BBox(11, 10, 16, 6), 0.9, 30.0)]
        merged = merge_candidates(cands, 0.5)
        assert merged[0].score == 0.9
        assert merged[0].bbox == BBox(11, 10, 16, 6)

    def test_input_not_mutated(self):
        cands = [Candidate(BBox(10, 10, 16, 6), 0.9, 0.0),
                 Candidate(BBox(10, 10, 16, 6), 0.9, 30.0)]
        merge_candidates(cands, 0.5)
        assert all(c.windows_seen == 1 for c in cands)


class TestSupport:
    def test_overlapping_frames_collected(self):
        cand = Candidate(BBox(10, 10, 16, 6), 1.0, 0.0)
        fg = [det(10, 10, frame=5), det(10, 10, frame=7),
              det(200, 10, frame=6)]
        profile = support_profile(cand, fg, iou_support=0.3)
        assert profile.supporting_frames == (5, 7)

    def test_duplicates_deduplicated(self):
        cand = Candidate(BBox(10, 10, 16, 6), 1.0, 0.0)
        fg = [det(10, 10, frame=5), det(11, 10, frame=5)]
        profile = support_profile(cand, fg, iou_support=0.3)
        assert profile.supporting_frames == (5,)


def make_profile(cand, frames):
    return SupportProfile(candidate=cand, supporting_frames=tuple(frames))


class TestDecide:
    fps = 10.0

    def _cand(self, windows_seen=5):
        return Candidate(BBox(10, 10, 16, 6), 0.9, 0.0, windows_seen=windows_seen)

    def test_accept_long_dense_support(self):
        cand = self._cand()
        frames = range(1000, 2500)
        ev = decide(cand, make_profile(cand, frames), DecisionParams(),
                    self.fps, "v1")
        assert ev is not None
        assert ev.start == pytest.approx(100.0)
        assert ev.end == pytest.approx(249.9)

    def test_too_few_frames(self):
        cand = self._cand()
        ev = decide(cand, make_profile(cand, range(1000, 1009)),
                    DecisionParams(), self.fps, "v1")
        assert ev is None

    def test_sparse_support_rejected(self):
        cand = self._cand()
        frames = range(0, 1000, 5)  # density 0.2 < 0.3
        ev = decide(cand, make_profile(cand, frames), DecisionParams(),
                    self.fps, "v1")
        assert ev is None

    def test_single_window_sighting_rejected(self):
        cand = self._cand(windows_seen=1)
        ev = decide(cand, make_profile(cand, range(1000, 2500)),
                    DecisionParams(), self.fps, "v1", n_windows=10)
        assert ev is None

    def test_window_floor_capped_for_short_videos(self):
        # a video with a single background window cannot show two sightings
        cand = self._cand(windows_seen=1)
        ev = decide(cand, make_profile(cand, range(1000, 2500)),
                    DecisionParams(), self.fps, "v1", n_windows=1)
        assert ev is not None

    def test_gate_monotonicity(self, rng):
        """Tightening any threshold never turns a rejection into an accept."""
        for _ in range(200):
            frames = sorted(rng.choice(3000, size=rng.integers(5, 400),
                                       replace=False).tolist())
            cand = Candidate(BBox(10, 10, 16, 6), 0.9, 0.0,
                             windows_seen=int(rng.integers(1, 6)))
            base = DecisionParams()
            loose = decide(cand, make_profile(cand, frames), base,
                           self.fps, "v1", n_windows=10)
            tight = DecisionParams(
                min_support_seconds=base.min_support_seconds + float(rng.uniform(0, 5)),
                min_support_density=min(1.0, base.min_support_density + float(rng.uniform(0, 0.5))),
                min_windows=base.min_windows + int(rng.integers(0, 3)),
            )
            strict = decide(cand, make_profile(cand, frames), tight,
                            self.fps, "v1", n_windows=10)
            if loose is None:
                assert strict is None


class TestCoalesce:
    def _ev(self, start, end, x=10, conf=0.9):
        return AnomalyEvent("v1", start, end, BBox(x, 10, 16, 6), conf)

    def test_overlapping_same_box_merged(self):
        out = coalesce_events([self._ev(10, 40), self._ev(30, 60)], 0.5)
        assert len(out) == 1
        assert out[0].start == 10 and out[0].end == 60

    def test_disjoint_in_time_kept(self):
        out = coalesce_events([self._ev(10, 20), self._ev(50, 60)], 0.5)
        assert len(out) == 2

    def test_overlap_in_time_different_box_kept(self):
        out = coalesce_events([self._ev(10, 40, x=10), self._ev(20, 50, x=200)], 0.5)
        assert len(out) == 2

    def test_confidence_is_max(self):
        out = coalesce_events([self._ev(10, 40, conf=0.6),
                               self._ev(30, 60, conf=0.8)], 0.5)
        assert out[0].confidence == 0.8
