import math

import pytest

from stallwatch.errors import DuplicateGroundTruth, UndefinedScore
from stallwatch.media import AnomalyEvent, BBox, GroundTruthEntry
from stallwatch.scoring import (
    MatchResult,
    RMSE_CAP_S,
    f1,
    match,
    rmse,
    s4,
    score_report,
)


def pred(start, end=None, vid="v1", conf=0.9):
    return AnomalyEvent(vid, start, end if end is not None else start + 30.0,
                        BBox(0, 0, 1, 1), conf)


def gt(start, end=None, vid="v1"):
    return GroundTruthEntry(vid, start, end if end is not None else start + 30.0)


class TestMatch:
    def test_exact_match(self):
        m = match([pred(100.0)], [gt(100.0)])
        assert (m.tp, m.false_positives, m.false_negatives) == (1, 0, 0)
        assert m.true_positives[0][2] == 0.0

    def test_window_boundary(self):
        assert match([pred(110.0)], [gt(100.0)]).tp == 1
        assert match([pred(110.1)], [gt(100.0)]).tp == 0

    def test_closest_first(self):
        # pred at 104 should pair with gt 100 (err 4), leaving gt 110
        # for the pred at 112 (err 2 claims gt 110 first)
        m = match([pred(104.0), pred(112.0)], [gt(100.0), gt(110.0)])
        assert m.tp == 2
        errs = sorted(err for _, _, err in m.true_positives)
        assert errs == [2.0, 4.0]

    def test_one_pred_cannot_match_twice(self):
        m = match([pred(100.0)], [gt(99.0), gt(101.0)])
        assert (m.tp, m.false_positives, m.false_negatives) == (1, 0, 1)

    def test_videos_do_not_cross(self):
        m = match([pred(100.0, vid="a")], [gt(100.0, vid="b")])
        assert (m.tp, m.false_positives, m.false_negatives) == (0, 1, 1)

    def test_duplicate_ground_truth(self):
        with pytest.raises(DuplicateGroundTruth):
            match([], [gt(100.0), gt(100.0)])


class TestMetrics:
    def test_f1_frozen(self):
        m = MatchResult(true_positives=[(None, None, 0.0)] * 3,
                        false_positives=1, false_negatives=0)
        assert f1(m) == pytest.approx(6 / 7)

    def test_f1_zero_when_no_tp(self):
        m = MatchResult(false_positives=2, false_negatives=1)
        assert f1(m) == 0.0

    def test_f1_undefined_when_empty(self):
        with pytest.raises(UndefinedScore):
            f1(MatchResult())

    def test_rmse_frozen(self):
        m = MatchResult(true_positives=[(None, None, 3.0), (None, None, 4.0)])
        assert rmse(m) == pytest.approx(math.sqrt(12.5))

    def test_rmse_cap_when_no_tp(self):
        assert rmse(MatchResult(false_positives=1)) == RMSE_CAP_S

    def test_s4_perfect(self):
        nrmse, comp = s4(1.0, 0.0)
        assert nrmse == 0.0 and comp == 1.0

    def test_s4_zero_f1(self):
        assert s4(0.0, 50.0)[1] == 0.0

    def test_s4_rmse_above_cap_clamped(self):
        nrmse, comp = s4(1.0, 500.0)
        assert nrmse == 1.0 and comp == 0.0


class TestReport:
    def test_per_video_breakdown(self):
        preds = [pred(100.0, vid="a"), pred(50.0, vid="b"), pred(200.0, vid="b")]
        gts = [gt(101.0, vid="a"), gt(52.0, vid="b")]
        rep = score_report(preds, gts)
        assert rep.tp == 2 and rep.fp == 1 and rep.fn == 0
        assert rep.per_video["a"]["start_errors"] == [1.0]
        assert rep.per_video["b"] == {"tp": 1, "fp": 1, "fn": 0,
                                      "start_errors": [2.0]}

    def test_totals_consistent(self):
        preds = [pred(10.0), pred(100.0), pred(500.0)]
        gts = [gt(12.0), gt(103.0), gt(300.0)]
        rep = score_report(preds, gts)
        assert rep.tp + rep.fp == len(preds)
        assert rep.tp + rep.fn == len(gts)
        nrmse, comp = s4(rep.f1, rep.rmse)
        assert rep.nrmse == pytest.approx(nrmse)
        assert rep.s4 == pytest.approx(comp)
