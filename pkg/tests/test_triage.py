"""Error triage store, category reporting, persistence, and the HTTP API."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import make_record
from shotclass.metrics import confusion_matrix
from shotclass.triage import (
    DEFAULT_CATEGORIES,
    CaseNotFound,
    CategoryAssignment,
    ErrorCase,
    TriageError,
    TriageStore,
    collect_errors,
    load_store,
    rank_categories,
    render_category_report,
    save_store,
)
from shotclass.triage_api import create_app

CLASSES = ("flat_service", "kick_service", "smash")


def error_case(vid, true="flat_service", pred="kick_service", scores=(0.2, 0.7, 0.1)):
    return ErrorCase(vid, true, pred, tuple(scores))


def small_store(n=4) -> TriageStore:
    cases = [error_case(f"v{i}", scores=(0.1, 0.5 + 0.05 * i, 0.2)) for i in range(n)]
    return TriageStore(cases, source_split="test", class_names=CLASSES)


class TestErrorCase:
    def test_correct_prediction_is_not_a_case(self):
        with pytest.raises(TriageError, match="not an error"):
            ErrorCase("v", "smash", "smash", (0.9, 0.1))

    def test_wrong_confidence_is_top_score_share(self):
        case = error_case("v", scores=(1.0, 3.0, 1.0))
        assert case.wrong_confidence == pytest.approx(0.6)
        assert error_case("v", scores=(0.0, 0.0, 0.0)).wrong_confidence == 0.0


class TestCollectErrors:
    def test_only_mistakes_kept_most_confident_first(self):
        records = [
            make_record("right", 0, (0.9, 0.05, 0.05)),
            make_record("mild", 1, (0.5, 0.1, 0.4)),
            make_record("gross", 2, (0.97, 0.02, 0.01)),
        ]
        cases = collect_errors(records, CLASSES)
        assert [c.video_id for c in cases] == ["gross", "mild"]
        assert cases[0].true_label == "smash"
        assert cases[0].predicted_label == "flat_service"

    def test_ties_break_by_video_id(self):
        records = [make_record(vid, 1, (0.8, 0.1, 0.1)) for vid in ("b", "a", "c")]
        cases = collect_errors(records, CLASSES)
        assert [c.video_id for c in cases] == ["a", "b", "c"]

    def test_label_out_of_range_rejected(self):
        from shotclass.metrics import MetricError

        with pytest.raises(MetricError):
            collect_errors([make_record("v", 5, (0.2, 0.8))], ("a", "b"))


class TestTriageStore:
    def test_default_category_palette(self):
        store = small_store()
        assert store.categories == list(DEFAULT_CATEGORIES)
        assert store.categories[0] == "serve confusion"

    def test_duplicate_case_ids_rejected(self):
        with pytest.raises(TriageError, match="duplicate"):
            TriageStore([error_case("v"), error_case("v")])

    def test_assign_marks_reviewed(self):
        store = small_store()
        assert store.case("v0").review_status == "unreviewed"
        out = store.assign("v0", ["serve confusion"], timestamp=1.0)
        assert out.review_status == "reviewed"
        assert store.case("v0").review_status == "reviewed"
        assert [c.video_id for c in store.cases(status="unreviewed")] == ["v1", "v2", "v3"]

    def test_assign_multiple_categories_and_autoregister(self):
        store = small_store()
        store.assign("v0", ["beginners", "occlusion artifacts"], timestamp=1.0)
        assert "occlusion artifacts" in store.categories
        current = store.current_assignment("v0")
        assert current.categories == ("beginners", "occlusion artifacts")

    def test_assign_dedups_and_strips(self):
        store = small_store()
        store.assign("v0", [" beginners ", "beginners", ""], timestamp=1.0)
        assert store.current_assignment("v0").categories == ("beginners",)

    def test_assign_rejects_empty_and_unknown_case(self):
        store = small_store()
        with pytest.raises(TriageError, match="category"):
            store.assign("v0", ["", "  "])
        with pytest.raises(CaseNotFound):
            store.assign("missing", ["beginners"])
        with pytest.raises(CaseNotFound):
            store.case("missing")

    def test_history_grows_monotonically_and_keeps_order(self):
        store = small_store()
        for i, cats in enumerate((["beginners"], ["serve confusion"],
                                  ["beginners", "others"])):
            store.assign("v0", cats, timestamp=float(i))
            assert len(store.history("v0")) == i + 1
        hist = store.history("v0")
        assert [a.categories for a in hist] == [
            ("beginners",), ("serve confusion",), ("beginners", "others")]
        assert store.current_assignment("v0").categories == ("beginners", "others")

    def test_latest_timestamp_wins_with_arrival_tiebreak(self):
        store = small_store()
        store.assign("v0", ["beginners"], reviewer="r1", timestamp=5.0)
        store.assign("v0", ["others"], reviewer="r2", timestamp=3.0)
        assert store.current_assignment("v0").reviewer == "r1"
        store.assign("v0", ["serve confusion"], reviewer="r3", timestamp=5.0)
        assert store.current_assignment("v0").reviewer == "r3"

    def test_filter_by_true_class(self):
        cases = [error_case("a"), error_case("b", true="smash", pred="flat_service")]
        store = TriageStore(cases)
        assert [c.video_id for c in store.cases(true_class="smash")] == ["b"]
        with pytest.raises(TriageError):
            store.cases(status="archived")


class TestReport:
    def test_counts_latest_assignment_only(self):
        store = small_store()
        store.assign("v0", ["beginners"], timestamp=1.0)
        store.assign("v0", ["serve confusion"], timestamp=2.0)
        report = store.report()
        counts = {name: count for name, count, _ in report.rows}
        assert counts["serve confusion"] == 1
        assert counts["beginners"] == 0
        assert report.reviewed == 1
        assert report.unreviewed == 3

    def test_percent_denominator_is_all_errors(self):
        store = small_store(n=4)
        store.assign("v0", ["beginners"], timestamp=1.0)
        report = store.report()
        pct = {name: p for name, _, p in report.rows}
        assert pct["beginners"] == pytest.approx(25.0)

    def test_multi_category_cases_count_in_each(self):
        store = small_store(n=2)
        store.assign("v0", ["beginners", "others"], timestamp=1.0)
        counts = {name: c for name, c, _ in store.report().rows}
        assert counts["beginners"] == 1 and counts["others"] == 1
        assert store.report().reviewed == 1

    def test_rows_sorted_by_share_then_name(self):
        store = small_store(n=4)
        store.assign("v0", ["b-cat"], timestamp=1.0)
        store.assign("v1", ["a-cat"], timestamp=2.0)
        store.assign("v2", ["a-cat"], timestamp=3.0)
        rows = store.report().rows
        assert rows[0][0] == "a-cat"
        assert rows[1][0] == "b-cat"
        zero_rows = [r[0] for r in rows if r[1] == 0]
        assert zero_rows == sorted(zero_rows)

    def test_render_layout(self):
        store = small_store(n=4)
        store.assign("v0", ["serve confusion"], timestamp=1.0)
        text = render_category_report(store.report())
        lines = text.strip().splitlines()
        assert lines[0] == "# errors: 4\treviewed: 1\tsource_split: test"
        assert lines[1] == "category\tcount\tamount_pct"
        assert lines[2] == "serve confusion\t1\t25.0"


class TestRankCategories:
    def make_report(self, shares):
        store = small_store(n=sum(shares.values()))
        i = 0
        for cat, count in shares.items():
            for _ in range(count):
                store.assign(f"v{i}", [cat], timestamp=float(i))
                i += 1
        return store.report()

    def test_plain_ranking_by_share(self):
        report = self.make_report({"serve confusion": 3, "beginners": 1})
        ranked = rank_categories(report)
        assert ranked[0] == "serve confusion"
        assert ranked[1] == "beginners"

    def test_effort_weighting_can_reorder(self):
        # 30% high-effort loses to 25% low-effort (10 vs 25 after weighting)
        report = self.make_report({"big": 6, "cheap": 5, "rest": 9})
        ranked = rank_categories(
            report, effort_estimates={"big": "high", "cheap": "low", "rest": "high"})
        assert ranked.index("cheap") < ranked.index("big")
        assert rank_categories(report)[0] == "rest"

    def test_unlisted_categories_default_to_medium(self):
        report = self.make_report({"a": 2, "b": 2})
        ranked = rank_categories(report, effort_estimates={"a": "high"})
        assert ranked.index("b") < ranked.index("a")

    def test_bad_effort_value_rejected(self):
        report = self.make_report({"a": 1})
        with pytest.raises(TriageError, match="effort"):
            rank_categories(report, effort_estimates={"a": "huge"})

    def test_empty_report_rejected(self):
        report = TriageStore([], class_names=CLASSES).report()
        assert report.empty
        with pytest.raises(TriageError):
            rank_categories(report)


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        store = small_store()
        store.assign("v1", ["beginners"], comment="weak swing", reviewer="r1",
                     timestamp=10.0)
        store.assign("v1", ["others"], reviewer="r2", timestamp=11.0)
        store.register_category("lighting")
        save_store(tmp_path, store)
        loaded = load_store(tmp_path)
        assert loaded.case_ids() == store.case_ids()
        assert loaded.categories == store.categories
        assert loaded.class_names == store.class_names
        assert loaded.source_split == store.source_split
        assert loaded.report() == store.report()
        assert loaded.history("v1") == store.history("v1")

    def test_save_load_save_is_idempotent(self, tmp_path):
        store = small_store()
        store.assign("v0", ["beginners"], timestamp=1.0)
        save_store(tmp_path / "a", store)
        save_store(tmp_path / "b", load_store(tmp_path / "a"))
        for name in ("cases.json", "assignments.jsonl"):
            assert (tmp_path / "a" / name).read_text() == \
                   (tmp_path / "b" / name).read_text()

    def test_log_file_is_line_json(self, tmp_path):
        store = small_store()
        store.assign("v0", ["beginners"], timestamp=1.0)
        store.assign("v1", ["others"], timestamp=2.0)
        save_store(tmp_path, store)
        lines = (tmp_path / "assignments.jsonl").read_text().splitlines()
        assert len(lines) == 2
        assert json.loads(lines[0])["video_id"] == "v0"

    def test_missing_store_rejected(self, tmp_path):
        with pytest.raises(TriageError, match="no triage store"):
            load_store(tmp_path / "nowhere")

    def test_unsupported_version_rejected(self, tmp_path):
        save_store(tmp_path, small_store())
        payload = json.loads((tmp_path / "cases.json").read_text())
        payload["version"] = 99
        (tmp_path / "cases.json").write_text(json.dumps(payload))
        with pytest.raises(TriageError, match="version"):
            load_store(tmp_path)


@pytest.fixture
def api_client(tmp_path):
    store = small_store()
    rng = np.random.default_rng(0)
    records = [make_record(f"t{i}", int(rng.integers(0, 3)), rng.normal(size=3))
               for i in range(20)]
    cm = confusion_matrix(records, CLASSES)
    media = tmp_path / "v0.npy"
    media.write_bytes(bytes(range(64)))
    store.media_paths["v0"] = str(media)
    app = create_app(store, confusion=cm, persist_dir=tmp_path / "store")
    return TestClient(app), store, tmp_path / "store"


class TestTriageApi:
    def test_meta_and_fresh_cases_unreviewed(self, api_client):
        client, store, _ = api_client
        meta = client.get("/meta").json()
        assert meta["total_errors"] == 4
        assert meta["class_names"] == list(CLASSES)
        assert meta["categories"][0] == "serve confusion"
        cases = client.get("/cases").json()
        assert len(cases) == 4
        assert all(c["review_status"] == "unreviewed" for c in cases)
        assert all(c["current"] is None for c in cases)

    def test_read_your_writes(self, api_client):
        client, _, _ = api_client
        post = client.post("/cases/v1/assignments",
                           json={"categories": ["beginners"], "reviewer": "r1"})
        assert post.status_code == 201
        assert post.json()["review_status"] == "reviewed"
        got = client.get("/cases/v1").json()
        assert got["review_status"] == "reviewed"
        assert got["current"]["categories"] == ["beginners"]
        report = client.get("/report").json()
        assert report["reviewed"] == 1
        row = next(r for r in report["rows"] if r["category"] == "beginners")
        assert row["count"] == 1

    def test_two_reviewers_conflict_preserved_in_history(self, api_client):
        client, _, _ = api_client
        client.post("/cases/v1/assignments",
                    json={"categories": ["beginners"], "reviewer": "r1"})
        client.post("/cases/v1/assignments",
                    json={"categories": ["others"], "reviewer": "r2"})
        history = client.get("/cases/v1/history").json()
        assert [h["reviewer"] for h in history] == ["r1", "r2"]
        current = client.get("/cases/v1").json()["current"]
        assert current["reviewer"] == "r2"
        assert current["categories"] == ["others"]
        assert client.get("/cases/v1").json()["history_length"] == 2

    def test_unknown_case_404(self, api_client):
        client, _, _ = api_client
        assert client.get("/cases/nope").status_code == 404
        assert client.post("/cases/nope/assignments",
                           json={"categories": ["x"]}).status_code == 404

    def test_invalid_assignment_422(self, api_client):
        client, _, _ = api_client
        assert client.post("/cases/v1/assignments",
                           json={"categories": []}).status_code == 422
        resp = client.post("/cases/v1/assignments", json={"categories": ["  "]})
        assert resp.status_code == 422
        assert "detail" in resp.json()

    def test_category_endpoints(self, api_client):
        client, _, _ = api_client
        before = client.get("/categories").json()["categories"]
        resp = client.post("/categories", json={"name": "lighting"})
        assert resp.status_code == 201
        after = client.get("/categories").json()["categories"]
        assert after == before + ["lighting"]
        assert client.post("/categories", json={"name": "  "}).status_code == 422

    def test_report_includes_ranking(self, api_client):
        client, _, _ = api_client
        client.post("/cases/v0/assignments", json={"categories": ["serve confusion"]})
        client.post("/cases/v1/assignments", json={"categories": ["serve confusion"]})
        client.post("/cases/v2/assignments", json={"categories": ["beginners"]})
        report = client.get("/report").json()
        assert report["ranked"][0] == "serve confusion"
        assert report["total_errors"] == 4
        assert report["unreviewed"] == 1

    def test_confusion_endpoint(self, api_client):
        client, _, _ = api_client
        payload = client.get("/confusion").json()
        assert payload["class_names"] == list(CLASSES)
        assert len(payload["counts"]) == 3
        assert sum(map(sum, payload["counts"])) == 20

    def test_confusion_absent_404(self):
        client = TestClient(create_app(small_store()))
        assert client.get("/confusion").status_code == 404

    def test_media_full_and_range_requests(self, api_client):
        client, _, _ = api_client
        full = client.get("/media/v0")
        assert full.status_code == 200
        assert full.content == bytes(range(64))
        assert full.headers["accept-ranges"] == "bytes"

        part = client.get("/media/v0", headers={"Range": "bytes=8-15"})
        assert part.status_code == 206
        assert part.content == bytes(range(8, 16))
        assert part.headers["content-range"] == "bytes 8-15/64"

        tail = client.get("/media/v0", headers={"Range": "bytes=-4"})
        assert tail.status_code == 206
        assert tail.content == bytes(range(60, 64))

        bad = client.get("/media/v0", headers={"Range": "bytes=100-200"})
        assert bad.status_code == 416
        assert client.get("/media/v9").status_code == 404

    def test_assignments_persisted_across_restart(self, api_client):
        client, _, persist_dir = api_client
        client.post("/cases/v0/assignments",
                    json={"categories": ["beginners"], "reviewer": "r1"})
        client.post("/categories", json={"name": "lighting"})
        reloaded = load_store(persist_dir)
        assert reloaded.current_assignment("v0").categories == ("beginners",)
        assert "lighting" in reloaded.categories
        client2 = TestClient(create_app(reloaded))
        assert client2.get("/cases/v0").json()["review_status"] == "reviewed"
