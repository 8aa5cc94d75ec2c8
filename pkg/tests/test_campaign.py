"""Toy campaigns end to end: outputs, determinism, failure handling, report recomputation."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from swinauth.data.manifest import prepare_cache, read_manifest
from swinauth.data.plan import PartitionTargets, assign_weights, build_plan
from swinauth.errors import ConfigError, IngestionError
from swinauth.harness import run_campaign
from swinauth.harness.campaign import PatchStore, run_weights, shuffled_labels, task_seed
from swinauth.harness.reports import build_report, read_log, read_predictions
from swinauth.harness.training import TrainRunConfig
from swinauth.synthetic import make_texture_corpus

MICRO_SWIN = {
    "kind": "swin", "input_size": [16, 16], "embed_dim": 8, "depths": [1, 1], "num_heads": [1, 2],
    "window_size": 2, "name": "swin-micro",
}
MICRO_CNN = {"kind": "cnn", "input_size": [16, 16], "widths": [4], "blocks": [1], "name": "cnn-micro"}


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    make_texture_corpus(root / "images", n_per_class=6, seed=2, size=(520, 560))
    records = read_manifest(root / "images" / "manifest.csv")
    prepare_cache(records, root / "cache")
    plan = build_plan(records, PartitionTargets((3, 1, 2), (3, 1, 2)), n=2, master_seed=5)
    assign_weights(plan)
    return root, plan


def _runs():
    return [
        TrainRunConfig(architecture=MICRO_SWIN, max_epochs=2, batch_size=8),
        TrainRunConfig(architecture=MICRO_CNN, max_epochs=2, batch_size=8),
    ]


@pytest.fixture(scope="module")
def campaign(corpus):
    root, plan = corpus
    out = root / "out"
    meta = run_campaign(plan, _runs(), root / "cache", out)
    return out, meta


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_outputs_exist(campaign):
    out, meta = campaign
    for name in ("table4", "table5", "table6", "table7", "table8", "histograms"):
        assert (out / f"{name}.csv").exists()
    assert (out / "histograms.svg").read_text().startswith("<?xml")
    assert {r["status"] for r in meta["results"]} == {"ok"}
    assert len(list((out / "predictions").glob("*/exp_*.csv"))) == 4


def test_table_layouts(campaign):
    out, _ = campaign
    t4 = _read_csv(out / "table4.csv")
    assert t4[0] == ["architecture", "number of parameters", "patches accuracy (SD)", "paintings accuracy (SD)"]
    assert [row[0] for row in t4[1:]] == ["swin-micro", "cnn-micro"]
    assert all(("(" in cell and ")" in cell) or cell == "n/a" for row in t4[1:] for cell in row[2:])
    assert _read_csv(out / "table5.csv")[0][1:] == [
        "accuracy authentic", "accuracy contrast", "accuracy imitations", "accuracy proxies",
    ]
    assert _read_csv(out / "table7.csv")[0][1:] == [
        "painting accuracy (SD)", "painting precision (SD)", "painting recall (SD)",
    ]
    t8 = _read_csv(out / "table8.csv")
    assert t8[0] == ["model_a", "model_b", "model_a outcome", "model_b correct", "model_b incorrect"]
    cells = [float(c.rstrip("%")) for row in t8[1:] for c in row[3:]]
    assert abs(sum(cells) - 100.0) <= 0.1
    report = (out / "report.md").read_text()
    for name in ("table4", "table5", "table6", "table7", "table8"):
        assert f"## {name}" in report


def _independent_painting_accuracy(path):
    groups = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            g = groups.setdefault(row["painting_id"], [row["label"], 0.0, 0])
            g[1] += float(row["score"])
            g[2] += 1
    hits = [((total / n) >= 0.5) == (label == "authentic") for label, total, n in groups.values()]
    return sum(hits) / len(hits)


def test_painting_accuracy_recomputed_from_files(campaign):
    out, _ = campaign
    for run in ("swin-micro", "cnn-micro"):
        accs = []
        for i in range(2):
            path = out / "predictions" / run / f"exp_{i:02d}.csv"
            log = read_log(out / "logs" / run / f"exp_{i:02d}.jsonl")
            acc = _independent_painting_accuracy(path)
            assert log[-1]["event"] == "test"
            assert log[-1]["metrics"]["painting_accuracy"] == pytest.approx(acc, abs=1e-12)
            accs.append(acc)
        mean = sum(accs) / len(accs)
        sd = math.sqrt(sum((a - mean) ** 2 for a in accs) / len(accs))
        row = next(r for r in _read_csv(out / "table4.csv") if r[0] == run)
        assert row[3] == f"{mean:.3f} ({sd:.3f})"


def test_test_patches_match_plan(campaign, corpus):
    out, _ = campaign
    _, plan = corpus
    for i, split in enumerate(plan.splits):
        preds = read_predictions(out / "predictions" / "cnn-micro" / f"exp_{i:02d}.csv")
        assert set(preds.painting_ids) == set(split.test)
        assert not set(preds.painting_ids) & (set(split.training) | set(split.validation))


def test_rerun_is_byte_identical(campaign, corpus, tmp_path):
    out, _ = campaign
    root, plan = corpus
    again = tmp_path / "again"
    run_campaign(plan, _runs(), root / "cache", again)
    files = sorted(p.relative_to(out) for p in out.rglob("*") if p.is_file())
    assert files == sorted(p.relative_to(again) for p in again.rglob("*") if p.is_file())
    for rel in files:
        assert (out / rel).read_bytes() == (again / rel).read_bytes(), rel


def test_parallel_matches_serial(campaign, corpus, tmp_path):
    out, _ = campaign
    root, plan = corpus
    par = tmp_path / "par"
    run_campaign(plan, _runs(), root / "cache", par, jobs=2)
    for rel in ("table4.csv", "table8.csv", "predictions/swin-micro/exp_01.csv"):
        assert (out / rel).read_bytes() == (par / rel).read_bytes()


def test_build_report_is_idempotent(campaign):
    out, _ = campaign
    before = {p.name: p.read_bytes() for p in out.glob("table*.csv")}
    build_report(out)
    assert before == {p.name: p.read_bytes() for p in out.glob("table*.csv")}


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_failed_run_is_recorded(corpus, tmp_path):
    root, plan = corpus
    runs = _runs()[1:] + [TrainRunConfig(architecture=MICRO_CNN, name="diverges", learning_rate=float("inf"), max_epochs=2)]
    meta = run_campaign(plan, runs, root / "cache", tmp_path / "out", plot=False)
    assert {f["run"] for f in meta["failures"]} == {"diverges"}
    assert len(meta["failures"]) == 2
    report = (tmp_path / "out" / "report.md").read_text()
    assert "## gaps" in report and "diverges exp_00" in report
    assert any("n/a" in row for row in _read_csv(tmp_path / "out" / "table4.csv") if row[0] == "diverges")


def test_duplicate_run_names_rejected(corpus, tmp_path):
    root, plan = corpus
    with pytest.raises(ConfigError):
        run_campaign(plan, [_runs()[1], _runs()[1]], root / "cache", tmp_path / "o")


def test_missing_paintings_in_cache(corpus, tmp_path):
    root, plan = corpus
    with pytest.raises(IngestionError):
        PatchStore(root / "cache", list(plan.labels) + ["ghost"])


def test_task_seed_depends_on_both_inputs():
    assert task_seed(1, 0) == task_seed(1, 0)
    assert len({task_seed(1, 0), task_seed(2, 0), task_seed(1, 1)}) == 3


def test_run_weight_modes(corpus):
    _, plan = corpus
    std = run_weights(plan, TrainRunConfig(weight_mode="standard"))
    assert {plan.labels[p]: w for p, w in std.items()}["imitation"] == 10.0
    assert set(run_weights(plan, TrainRunConfig(weight_mode="none")).values()) == {1.0}
    assert run_weights(plan, TrainRunConfig()) == plan.weights
    with pytest.raises(ConfigError):
        run_weights(plan, TrainRunConfig(weight_mode="heavy"))


def test_shuffled_labels_keep_test_and_counts(corpus):
    _, plan = corpus
    split = plan.splits[0]
    out = shuffled_labels(plan.labels, split, np.random.default_rng(0))
    for pid in split.test:
        assert out[pid] == plan.labels[pid]
    for part in (split.training, split.validation):
        assert sorted(out[p] for p in part) == sorted(plan.labels[p] for p in part)
