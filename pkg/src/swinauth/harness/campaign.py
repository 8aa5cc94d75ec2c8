"""Train and evaluate every run on every partition of a plan.

Each (run, experiment) task draws its randomness from
``SeedSequence([plan seed of the experiment, run seed])``, so results do not
depend on task order or on how many worker processes share the work.
"""

from __future__ import annotations

import json
import logging
import multiprocessing
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from swinauth.data.manifest import PatchRecord, load_patch, read_cache_index
from swinauth.data.plan import ExperimentPlan, Split
from swinauth.data.resample import resample_batch
from swinauth.errors import ConfigError, IngestionError
from swinauth.harness.architectures import Architecture, build_architecture
from swinauth.harness.metrics import PredictionSet, compute_metrics
from swinauth.harness.reports import (
    CAMPAIGN_FILE,
    build_report,
    log_path,
    predictions_path,
    write_log,
    write_predictions,
    write_text_atomic,
)
from swinauth.harness.training import PatchSet, TrainRunConfig, predict, train_one
from swinauth.tensor import save_weights

logger = logging.getLogger(__name__)


class PatchStore:
    """Cached patches of the plan's paintings, resampled once per model input size."""

    def __init__(self, cache_dir, painting_ids: Optional[Sequence[str]] = None):
        self.cache_dir = Path(cache_dir)
        index = read_cache_index(self.cache_dir)
        wanted = None if painting_ids is None else set(painting_ids)
        grouped: Dict[str, List[PatchRecord]] = {}
        for rec in index:
            if wanted is None or rec.painting_id in wanted:
                grouped.setdefault(rec.painting_id, []).append(rec)
        if wanted is not None:
            missing = sorted(wanted - set(grouped))
            if missing:
                shown = ", ".join(missing[:5]) + (" ..." if len(missing) > 5 else "")
                raise IngestionError(f"{len(missing)} planned paintings have no cached patches ({shown})", self.cache_dir)
        self.records = {pid: sorted(recs, key=lambda r: r.patch_index) for pid, recs in grouped.items()}
        self._raw: Dict[str, np.ndarray] = {}
        self._sized: Dict[tuple, Dict[str, np.ndarray]] = {}

    def raw(self, pid: str) -> np.ndarray:
        if pid not in self._raw:
            self._raw[pid] = np.stack([load_patch(self.cache_dir, r) for r in self.records[pid]])
        return self._raw[pid]

    def patches(self, pid: str, size) -> np.ndarray:
        size = tuple(size)
        sized = self._sized.setdefault(size, {})
        if pid not in sized:
            raw = self.raw(pid)
            sized[pid] = raw if raw.shape[1:3] == size else resample_batch(raw, size[0], size[1]).astype(np.float32)
        return sized[pid]

    def patch_set(self, pids: Sequence[str], size, labels: Dict[str, str], weights: Dict[str, float]) -> PatchSet:
        images, targets, w, ids, idx, labs = [], [], [], [], [], []
        for pid in pids:
            stack = self.patches(pid, size)
            k = len(stack)
            images.append(stack)
            targets.append(np.full(k, 1.0 if labels[pid] == "authentic" else 0.0, dtype=np.float32))
            w.append(np.full(k, weights.get(pid, 1.0), dtype=np.float32))
            ids += [pid] * k
            idx += [r.patch_index for r in self.records[pid]]
            labs += [labels[pid]] * k
        h, wd = size
        return PatchSet(
            images=np.concatenate(images) if images else np.zeros((0, h, wd, 3), np.float32),
            targets=np.concatenate(targets) if targets else np.zeros(0, np.float32),
            weights=np.concatenate(w) if w else np.zeros(0, np.float32),
            painting_ids=ids,
            patch_index=np.asarray(idx, dtype=np.int64),
            labels=labs,
        )


def task_seed(plan_seed: int, run_seed: int) -> int:
    return int(np.random.SeedSequence([int(plan_seed), int(run_seed)]).generate_state(1)[0])


def run_weights(plan: ExperimentPlan, run: TrainRunConfig) -> Dict[str, float]:
    """Loss weights for one run: the plan's, unless the run overrides the mode."""
    if run.weight_mode is None:
        return dict(plan.weights)
    if run.weight_mode == "none":
        return {pid: 1.0 for pid in plan.labels}
    if run.weight_mode in ("standard", "refined"):
        w_im = 10.0 if run.weight_mode == "standard" else 1.0
        return {pid: (w_im if label == "imitation" else 1.0) for pid, label in plan.labels.items()}
    raise ConfigError(f"weight_mode must be None, 'none', 'standard' or 'refined'; got {run.weight_mode!r}")


def shuffled_labels(labels: Dict[str, str], split: Split, rng: np.random.Generator) -> Dict[str, str]:
    """Permute painting labels within the training and within the validation partition; test stays true."""
    out = dict(labels)
    for part in (split.training, split.validation):
        pids = list(part)
        perm = rng.permutation(len(pids))
        for pid, j in zip(pids, perm):
            out[pid] = labels[pids[j]]
    return out


_STORE: Optional[PatchStore] = None


def _execute(task: dict) -> dict:
    """Train one run on one experiment's partitions and score its test patches."""
    store = task.pop("store", None) or _STORE
    run = TrainRunConfig.from_dict(task["run"])
    name, i = task["name"], task["experiment"]
    try:
        arch = build_architecture(run.architecture)
        split = Split(**task["split"])
        seed = task["seed"]
        rng = np.random.default_rng(seed)
        train_labels = shuffled_labels(task["labels"], split, rng) if run.shuffle_labels else task["labels"]
        weights = task["weights"]
        size = arch.input_size
        train = store.patch_set(split.training, size, train_labels, weights)
        val = store.patch_set(split.validation, size, train_labels, weights)
        test = store.patch_set(split.test, size, task["labels"], weights)
        result = train_one(run, arch, train, val, seed=int(rng.integers(2**31)))
        scores = predict(arch, result.params, test.images, run.eval_batch_size)
        preds = PredictionSet(test.painting_ids, test.patch_index, test.labels, scores)
        out = {
            "run": name,
            "experiment": i,
            "status": "ok",
            "seed": seed,
            "log": result.log,
            "best_epoch": result.best_epoch,
            "epochs_run": result.epochs_run,
            "predictions": preds,
            "metrics": compute_metrics(preds),
        }
        if task.get("weights_dir"):
            path = Path(task["weights_dir"]) / name / f"exp_{i:02d}.swt"
            path.parent.mkdir(parents=True, exist_ok=True)
            save_weights(path, {k: p.data for k, p in result.params.items()})
        return out
    except Exception as exc:  # a failed run is recorded, the campaign goes on
        logger.error("%s exp %d failed: %s", name, i, exc)
        return {
            "run": name,
            "experiment": i,
            "status": "failed",
            "error": f"{type(exc).__name__}: {exc}",
            "traceback": traceback.format_exc(),
        }


def _init_worker(store: PatchStore) -> None:
    global _STORE
    _STORE = store


def resolve_runs(runs: Sequence) -> List[TrainRunConfig]:
    resolved = []
    for r in runs:
        if isinstance(r, TrainRunConfig):
            resolved.append(r)
        elif isinstance(r, dict):
            resolved.append(TrainRunConfig.from_dict(r))
        else:
            resolved.append(TrainRunConfig(architecture=r))
    names = [r.label for r in resolved]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError(f"run names must be unique; repeated: {dupes} (set 'name' per run)")
    return resolved


def run_campaign(
    plan: ExperimentPlan,
    runs: Sequence,
    cache_dir,
    out_dir,
    jobs: int = 1,
    store: Optional[PatchStore] = None,
    save_trained_weights: bool = False,
    plot: bool = True,
) -> dict:
    """Run every (run, experiment) pair, write logs/predictions/reports, return the campaign metadata."""
    runs = resolve_runs(runs)
    archs: List[Architecture] = [build_architecture(r.architecture) for r in runs]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if store is None:
        store = PatchStore(cache_dir, sorted(plan.labels))
    write_text_atomic(out / "plan.json", plan.to_json())

    tasks = []
    for run, arch in zip(runs, archs):
        weights = run_weights(plan, run)
        for i, (seed, split) in enumerate(zip(plan.seeds, plan.splits)):
            tasks.append(
                {
                    "run": run.to_dict(),
                    "name": run.label,
                    "experiment": i,
                    "seed": task_seed(seed, run.seed),
                    "split": split.to_dict(),
                    "labels": plan.labels,
                    "weights": weights,
                    "weights_dir": str(out / "weights") if save_trained_weights else None,
                }
            )

    if jobs > 1 and len(tasks) > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx, initializer=_init_worker, initargs=(store,)) as pool:
            results = list(pool.map(_execute, tasks))
    else:
        results = []
        for task in tasks:
            logger.info("training %s on experiment %d", task["name"], task["experiment"])
            results.append(_execute({**task, "store": store}))

    failures, summary = [], []
    for res in results:
        name, i = res["run"], res["experiment"]
        if res["status"] == "ok":
            write_predictions(predictions_path(out, name, i), res["predictions"])
            write_log(log_path(out, name, i), res["log"], {"metrics": res["metrics"], "best_epoch": res["best_epoch"]})
            summary.append(
                {
                    "run": name,
                    "experiment": i,
                    "status": "ok",
                    "seed": res["seed"],
                    "best_epoch": res["best_epoch"],
                    "epochs_run": res["epochs_run"],
                }
            )
        else:
            for stale in (predictions_path(out, name, i), log_path(out, name, i)):
                stale.unlink(missing_ok=True)
            failures.append({"run": name, "experiment": i, "error": res["error"]})
            summary.append({"run": name, "experiment": i, "status": "failed"})

    meta = {
        "mode": plan.mode,
        "master_seed": plan.master_seed,
        "n_experiments": plan.n_experiments,
        "plan_seeds": plan.seeds,
        "runs": [
            {"name": run.label, "config": run.to_dict(), "architecture": arch.to_dict(), "n_params": arch.n_params()}
            for run, arch in zip(runs, archs)
        ],
        "results": summary,
        "failures": failures,
    }
    write_text_atomic(out / CAMPAIGN_FILE, json.dumps(meta, indent=1, sort_keys=True) + "\n")
    build_report(out, plot=plot)
    return meta
