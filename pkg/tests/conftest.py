"""Shared fixtures and the acceptance-summary hook.

Every test in test_acceptance.py gets one [PASS]/[FAIL] line in the
terminal summary so the criteria can be read off a run at a glance.
"""

import numpy as np
import pytest
from hypothesis import settings

from shotclass import preset_config
from shotclass.data import load_manifest, make_motion_corpus
from shotclass.metrics import PredictionRecord

settings.register_profile("suite", deadline=None, max_examples=100)
settings.load_profile("suite")

ACCEPTANCE_FILE = "test_acceptance.py"
_acceptance_results: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if ACCEPTANCE_FILE in report.nodeid:
        if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
            _acceptance_results[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_acceptance_results.items()):
        name = nodeid.split("::")[-1]
        status = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"[{status}] {name}")


def micro_preset(name: str = "4x16", num_classes: int = 2, **overrides):
    """A preset shrunk to test size: same sampling structure, tiny widths."""
    defaults = dict(base_channels=16, crop_size=32, scale_short_side=36,
                    backbone_depth=(1, 1, 1, 1), dropout_rate=0.0, flip_prob=0.0)
    defaults.update(overrides)
    return preset_config(name, num_classes, **defaults)


def make_record(video_id, true_label, scores, views_used=1) -> PredictionRecord:
    """Prediction record with the argmax-consistent predicted label."""
    return PredictionRecord(
        video_id=video_id, true_label=int(true_label),
        predicted_label=int(np.argmax(scores)),
        score_vector=tuple(float(s) for s in scores), views_used=views_used,
    )


@pytest.fixture(scope="session")
def motion_corpus(tmp_path_factory):
    """(manifest, cache_dir) for the shared two-class motion dataset:
    4 train / 1 val / 1 test clips per class."""
    root = tmp_path_factory.mktemp("motion")
    manifest_path = make_motion_corpus(root, train_per_class=4, val_per_class=1,
                                       test_per_class=1, seed=7)
    return load_manifest(manifest_path), root / "cache"


@pytest.fixture(scope="session")
def micro_model_config():
    return micro_preset()
