import numpy as np
import pytest
import torch

from conftest import make_record, micro_preset
from shotclass.data import VideoRecord
from shotclass.metrics import (
    BinaryCounts,
    MetricError,
    PredictionRecord,
    accuracy,
    combine_view_scores,
    confusion_matrix,
    ensemble_predict,
    error_rate,
    per_class_accuracy,
    predict_single_clip,
    read_predictions,
    render_confusion,
    write_predictions,
)
from shotclass.model import build_slowfast


class TestPredictionRecord:
    def test_argmax_mismatch_rejected(self):
        with pytest.raises(MetricError, match="not the argmax"):
            PredictionRecord("v", 0, 0, (0.1, 0.9))

    def test_tie_resolves_to_lowest_index(self):
        rec = PredictionRecord("v", 1, 0, (0.5, 0.5))
        assert not rec.correct
        with pytest.raises(MetricError, match="not the argmax"):
            PredictionRecord("v", 1, 1, (0.5, 0.5))

    def test_empty_scores_rejected(self):
        with pytest.raises(MetricError, match="empty score vector"):
            PredictionRecord("v", 0, 0, ())

    def test_views_used_floor(self):
        with pytest.raises(MetricError, match="views_used"):
            PredictionRecord("v", 0, 0, (0.9, 0.1), views_used=0)


class TestAggregates:
    def test_hand_counted_accuracy(self):
        records = [
            make_record("a", 0, (0.9, 0.1)),
            make_record("b", 1, (0.9, 0.1)),
            make_record("c", 1, (0.1, 0.9)),
            make_record("d", 0, (0.1, 0.9)),
        ]
        assert accuracy(records) == 50.0
        assert error_rate(records) == 50.0

    def test_empty_sets_rejected(self):
        with pytest.raises(MetricError, match="empty"):
            accuracy([])
        with pytest.raises(MetricError, match="empty"):
            error_rate([])

    def test_binary_counts(self):
        c = BinaryCounts(tp=3, tn=2, fp=1, fn=4)
        assert c.total == 10
        assert c.accuracy() == 50.0
        assert c.accuracy() + c.error_rate() == 100.0
        with pytest.raises(MetricError, match="nonnegative"):
            BinaryCounts(1, 1, -1, 1)
        with pytest.raises(MetricError, match="no outcomes"):
            BinaryCounts(0, 0, 0, 0).accuracy()


class TestConfusion:
    def test_grid_placement(self):
        records = [
            make_record("a", 0, (0.9, 0.1, 0.0)),
            make_record("b", 0, (0.1, 0.9, 0.0)),
            make_record("c", 2, (0.1, 0.0, 0.9)),
        ]
        cm = confusion_matrix(records, ("x", "y", "z"))
        assert cm.counts == ((1, 1, 0), (0, 0, 0), (0, 0, 1))
        assert cm.total == 3
        assert cm.trace == 2

    def test_label_out_of_range(self):
        rec = make_record("a", 5, (0.9, 0.1))
        with pytest.raises(MetricError, match="outside class range"):
            confusion_matrix([rec], ("x", "y"))

    def test_per_class_none_for_absent_class(self):
        cm = confusion_matrix([make_record("a", 0, (0.9, 0.1))], ("x", "y"))
        assert per_class_accuracy(cm) == [100.0, None]

    def test_render_layout(self):
        cm = confusion_matrix(
            [make_record("a", 0, (0.9, 0.1)), make_record("b", 1, (0.9, 0.1))],
            ("x", "y"))
        assert render_confusion(cm) == (
            "true\\pred\tx\ty\n"
            "x\t1\t0\n"
            "y\t1\t0\n"
        )


class TestCombineScores:
    def test_probability_rows_use_softmax(self):
        raw = np.random.default_rng(3).normal(size=(6, 5))
        got = combine_view_scores(raw)
        want = torch.softmax(torch.tensor(raw), dim=1).sum(dim=0).numpy()
        assert np.allclose(got, want, atol=1e-12)

    def test_logit_domain_is_plain_sum(self):
        raw = [(0.6, 0.4)] * 5 + [(0.1, 0.9)]
        assert combine_view_scores(raw, sum_domain="logit") == pytest.approx([3.1, 2.9])

    def test_bad_domain(self):
        with pytest.raises(MetricError, match="sum_domain"):
            combine_view_scores([[1.0, 2.0]], sum_domain="odds")

    def test_bad_shape(self):
        with pytest.raises(MetricError, match="views, classes"):
            combine_view_scores([1.0, 2.0])


@pytest.fixture(scope="module")
def scorer():
    cfg = micro_preset(num_classes=3)
    torch.manual_seed(1)
    model = build_slowfast(cfg).eval()
    record = VideoRecord(id="clip", path="unused.npy", class_label="b",
                         player_id="p01", frame_count=70, duration=2.3)
    rng = np.random.default_rng(5)
    frames = rng.integers(0, 255, size=(70, 40, 52, 3), dtype=np.uint8)
    return cfg, model, record, frames


class TestModelScoring:
    def test_ensemble_prediction_shape(self, scorer):
        cfg, model, record, frames = scorer
        pred = ensemble_predict(model, record, ("a", "b", "c"),
                                config=cfg, frames=frames)
        assert pred.views_used == 6
        assert pred.true_label == 1
        assert len(pred.score_vector) == 3
        # six softmax rows summed
        assert sum(pred.score_vector) == pytest.approx(6.0, abs=1e-6)

    def test_ensemble_is_deterministic(self, scorer):
        cfg, model, record, frames = scorer
        a = ensemble_predict(model, record, ("a", "b", "c"), config=cfg, frames=frames)
        b = ensemble_predict(model, record, ("a", "b", "c"), config=cfg, frames=frames)
        assert a == b

    def test_logit_domain_changes_scale_not_order_here(self, scorer):
        cfg, model, record, frames = scorer
        prob = ensemble_predict(model, record, ("a", "b", "c"),
                                config=cfg, frames=frames)
        logit = ensemble_predict(model, record, ("a", "b", "c"),
                                 config=cfg, frames=frames, sum_domain="logit")
        assert logit.score_vector != prob.score_vector
        assert logit.views_used == 6

    def test_single_clip_policy(self, scorer):
        cfg, model, record, frames = scorer
        pred = predict_single_clip(model, record, ("a", "b", "c"),
                                   np.random.default_rng(0), config=cfg,
                                   frames=frames)
        assert pred.views_used == 1
        assert sum(pred.score_vector) == pytest.approx(1.0, abs=1e-6)

    def test_single_clip_follows_rng(self, scorer):
        cfg, model, record, frames = scorer
        a = predict_single_clip(model, record, ("a", "b", "c"),
                                np.random.default_rng(0), config=cfg, frames=frames)
        b = predict_single_clip(model, record, ("a", "b", "c"),
                                np.random.default_rng(0), config=cfg, frames=frames)
        assert a == b


class TestPredictionFile:
    def test_round_trip_is_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        records = [make_record(f"v{i}", int(rng.integers(0, 3)),
                               rng.normal(size=3), views_used=6)
                   for i in range(10)]
        path = write_predictions(tmp_path / "pred.csv", records, ("a", "b", "c"))
        back, names = read_predictions(path)
        assert names == ("a", "b", "c")
        assert back == records

    def test_score_count_guard(self, tmp_path):
        rec = make_record("v", 0, (0.9, 0.1))
        with pytest.raises(MetricError, match="2 scores for 3 classes"):
            write_predictions(tmp_path / "p.csv", [rec], ("a", "b", "c"))

    def test_unrecognized_header(self, tmp_path):
        bad = tmp_path / "p.csv"
        bad.write_text("id,gt,hyp\nv,0,0\n")
        with pytest.raises(MetricError, match="unrecognized prediction header"):
            read_predictions(bad)

    def test_empty_file(self, tmp_path):
        bad = tmp_path / "p.csv"
        bad.write_text("")
        with pytest.raises(MetricError, match="empty prediction file"):
            read_predictions(bad)

    def test_short_row(self, tmp_path):
        bad = tmp_path / "p.csv"
        bad.write_text("video_id,true,pred,views_used,score_a,score_b\n"
                       "v,0,0,1,0.9\n")
        with pytest.raises(MetricError, match="has 5 fields"):
            read_predictions(bad)
