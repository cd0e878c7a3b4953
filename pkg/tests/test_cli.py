"""Command-line behavior: the prepare/train/evaluate/report flow and exit codes."""

import argparse
from pathlib import Path

import pytest

from shotclass.cli import EXIT_DATA, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, _init_store, main
from shotclass.data import load_manifest, make_motion_corpus
from shotclass.experiment import load_experiment_config
from shotclass.metrics import read_predictions
from shotclass.triage import load_store

CONFIG_TEXT = """\
model.preset = 4x16
model.num_classes = 2
model.base_channels = 16
model.crop_size = 32
model.scale_short_side = 36
model.backbone_depth = 1,1,1,1
model.dropout_rate = 0.0
model.flip_prob = 0.0
train.epochs_max = 1
train.batch_size = 8
train.optimizer = adaptive
train.learning_rate = 0.001
train.checkpoint_every = 100
train.seed = 0
data.manifest = {manifest}
data.cache_dir = cache
data.split_ratios = 0.6,0.2,0.2
data.split_seed = 0
run.label = demo
"""


@pytest.fixture(scope="module")
def flow(tmp_path_factory):
    """One full prepare -> train -> evaluate pass shared by the assertions."""
    root = tmp_path_factory.mktemp("cliflow")
    raw_manifest = make_motion_corpus(root / "corpus", train_per_class=3,
                                      val_per_class=1, test_per_class=1,
                                      seed=7, mark_splits=False)
    config = root / "experiment.cfg"
    config.write_text(CONFIG_TEXT.format(manifest=raw_manifest))

    prep = root / "prep"
    run = root / "run"
    ev = root / "eval"
    assert main(["prepare", "--config", str(config), "--out", str(prep)]) == EXIT_OK
    manifest = prep / "manifest_with_splits.csv"
    assert main(["train", "--config", str(config), "--manifest", str(manifest),
                 "--out", str(run)]) == EXIT_OK
    assert main(["evaluate", "--config", str(config), "--manifest", str(manifest),
                 "--checkpoint", str(run / "checkpoints" / "best.pt"),
                 "--out", str(ev)]) == EXIT_OK
    return {"root": root, "config": config, "manifest": manifest,
            "prep": prep, "run": run, "eval": ev}


class TestFlowArtifacts:
    def test_prepare_assigns_splits(self, flow):
        manifest = load_manifest(flow["manifest"])
        counts = {s: len(manifest.records_for_split(s))
                  for s in ("train", "val", "test")}
        assert counts == {"train": 6, "val": 2, "test": 2}
        assert not manifest.records_for_split("unassigned")

    def test_each_stage_writes_a_resolved_snapshot(self, flow):
        for stage in ("prep", "run", "eval"):
            assert (flow[stage] / "resolved_config.cfg").exists()

    def test_snapshot_reloads_to_the_same_experiment(self, flow):
        original = load_experiment_config(flow["config"])
        snapshot = load_experiment_config(flow["prep"] / "resolved_config.cfg")
        assert snapshot == original
        assert snapshot.label == "demo"

    def test_train_leaves_checkpoint_and_history(self, flow):
        assert (flow["run"] / "checkpoints" / "best.pt").exists()
        history = (flow["run"] / "history.csv").read_text().splitlines()
        assert history[0] == "epoch,train_err,val_err,lr,seconds"
        assert len(history) == 2

    def test_evaluate_uses_six_views_per_video(self, flow):
        records, class_names = read_predictions(flow["eval"] / "predictions.csv")
        assert class_names == ("leftward", "rightward")
        assert len(records) == 2
        assert all(r.views_used == 6 for r in records)
        assert (flow["eval"] / "confusion.tsv").read_text().startswith("true\\pred\t")

    def test_single_clip_evaluation(self, flow, tmp_path):
        out = tmp_path / "eval_single"
        code = main(["evaluate", "--config", str(flow["config"]),
                     "--manifest", str(flow["manifest"]),
                     "--checkpoint", str(flow["run"] / "checkpoints" / "best.pt"),
                     "--ensemble", "single", "--seed", "3", "--out", str(out)])
        assert code == EXIT_OK
        records, _ = read_predictions(out / "predictions.csv")
        assert all(r.views_used == 1 for r in records)

    def test_report_tabulates_runs(self, flow, capsys):
        code = main(["report", "--runs", str(flow["run"]), str(flow["eval"])])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0].split() == ["architecture", "train_acc", "val_acc",
                                    "test_acc", "test_n"]
        assert sum(1 for ln in lines if ln.startswith("demo")) == 2
        assert "n/a" in out  # the eval-only row has no training history

    def test_report_writes_file(self, flow, tmp_path):
        target = tmp_path / "report.txt"
        code = main(["report", "--runs", str(flow["run"]), "--out", str(target)])
        assert code == EXIT_OK
        assert "architecture" in target.read_text()

    def test_triage_store_bootstraps_from_predictions(self, flow, tmp_path):
        store_dir = tmp_path / "store"
        args = argparse.Namespace(store=str(store_dir),
                                  predictions=str(flow["eval"] / "predictions.csv"),
                                  manifest=str(flow["manifest"]),
                                  source_split="test")
        store = _init_store(args)
        records, _ = read_predictions(flow["eval"] / "predictions.csv")
        wrong = [r for r in records if not r.correct]
        assert len(store) == len(wrong)
        assert store.source_split == "test"
        assert (store_dir / "cases.json").exists()
        for vid in store.case_ids():
            assert Path(store.media_paths[vid]).exists()
        # a second call must load the persisted store, not rebuild it
        store.register_category("lighting")
        from shotclass.triage import save_store

        save_store(store_dir, store)
        again = _init_store(argparse.Namespace(store=str(store_dir), predictions=None,
                                               manifest=None, source_split="val"))
        assert "lighting" in again.categories
        assert again.source_split == "test"

    def test_report_renders_triage_store(self, flow, tmp_path, capsys):
        store_dir = tmp_path / "store"
        args = argparse.Namespace(store=str(store_dir),
                                  predictions=str(flow["eval"] / "predictions.csv"),
                                  manifest=None, source_split="test")
        store = _init_store(args)
        if len(store):
            code = main(["report", "--triage-store", str(store_dir)])
            assert code == EXIT_OK
            out = capsys.readouterr().out
            assert out.startswith(f"# errors: {len(store)}\treviewed: 0")
            assert "amount_pct" in out


class TestExitCodes:
    def test_usage_errors_exit_one(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == EXIT_USAGE
        with pytest.raises(SystemExit) as exc:
            main(["discombobulate"])
        assert exc.value.code == EXIT_USAGE
        with pytest.raises(SystemExit) as exc:
            main(["prepare", "--config", "x.cfg"])  # missing --out
        assert exc.value.code == EXIT_USAGE

    def test_unknown_config_key_exits_one(self, flow, tmp_path, capsys):
        code = main(["prepare", "--config", str(flow["config"]),
                     "--set", "model.warp_factor=9", "--out", str(tmp_path / "o")])
        assert code == EXIT_USAGE
        assert "config error" in capsys.readouterr().err

    def test_unlisted_preset_exits_one_with_hint(self, flow, tmp_path, capsys):
        code = main(["prepare", "--config", str(flow["config"]),
                     "--set", "model.preset=8x16", "--out", str(tmp_path / "o")])
        assert code == EXIT_USAGE
        assert "8x8" in capsys.readouterr().err

    def test_missing_manifest_exits_two(self, flow, tmp_path, capsys):
        code = main(["prepare", "--config", str(flow["config"]),
                     "--set", "data.manifest=/nonexistent/m.csv",
                     "--out", str(tmp_path / "o")])
        assert code == EXIT_DATA
        assert "data error" in capsys.readouterr().err

    def test_missing_checkpoint_exits_two(self, flow, tmp_path):
        code = main(["evaluate", "--config", str(flow["config"]),
                     "--manifest", str(flow["manifest"]),
                     "--checkpoint", str(tmp_path / "absent.pt"),
                     "--out", str(tmp_path / "o")])
        assert code == EXIT_DATA

    def test_report_without_sources_exits_one(self, capsys):
        assert main(["report"]) == EXIT_USAGE
        assert "config error" in capsys.readouterr().err

    def test_diverged_training_exits_three(self, flow, tmp_path, capsys):
        with pytest.warns(UserWarning, match="non-finite"):
            code = main(["train", "--config", str(flow["config"]),
                         "--manifest", str(flow["manifest"]),
                         "--set", "train.optimizer=sgd-momentum",
                         "--set", "train.learning_rate=1e18",
                         "--set", "train.epochs_max=2",
                         "--out", str(tmp_path / "boom")])
        assert code == EXIT_RUNTIME
        assert "diverged" in capsys.readouterr().err

    def test_override_changes_snapshot(self, flow, tmp_path):
        out = tmp_path / "o"
        code = main(["prepare", "--config", str(flow["config"]),
                     "--set", "train.epochs_max=7", "--out", str(out)])
        assert code == EXIT_OK
        resolved = load_experiment_config(out / "resolved_config.cfg")
        assert resolved.train.epochs_max == 7

    def test_bad_override_format_exits_one(self, flow, tmp_path, capsys):
        code = main(["prepare", "--config", str(flow["config"]),
                     "--set", "no_equals_sign", "--out", str(tmp_path / "o")])
        assert code == EXIT_USAGE
        assert "key=value" in capsys.readouterr().err
