"""Painting-level train/validation/test assignments for repeated experiments.

Per-experiment seeds come from ``numpy.random.SeedSequence(master_seed)``:
experiment ``i`` uses the first 32-bit word of the ``i``-th spawned child.
All randomness in a campaign flows from that one master seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from swinauth.data.manifest import PaintingRecord
from swinauth.errors import PlanningError, UsageError

MODES = ("standard", "refined")
PARTITIONS = ("training", "validation", "test")
IMITATION_WEIGHT = 10.0
DEFAULT_BALANCE_SLACK = 5


@dataclass(frozen=True)
class PartitionTargets:
    """Painting counts (training, validation, test) per class."""

    authentic: Tuple[int, int, int]
    contrast: Tuple[int, int, int]


# full-scale painting counts per partition
STANDARD_FULL = PartitionTargets((520, 78, 73), (523, 65, 65))
REFINED_FULL = PartitionTargets((87, 20, 30), (87, 20, 30))

# validation and test shares of the contrast class implied by the counts above
DEFAULT_FRACTIONS = {"standard": (65 / 653, 65 / 653), "refined": (20 / 137, 30 / 137)}


@dataclass
class Split:
    training: List[str]
    validation: List[str]
    test: List[str]

    def partition_of(self, painting_id: str) -> str | None:
        for name in PARTITIONS:
            if painting_id in getattr(self, name):
                return name
        return None

    def to_dict(self) -> dict:
        return {name: list(getattr(self, name)) for name in PARTITIONS}


@dataclass
class ExperimentPlan:
    mode: str
    master_seed: int
    seeds: List[int]
    splits: List[Split]
    labels: Dict[str, str]
    weights: Dict[str, float] = field(default_factory=dict)

    @property
    def n_experiments(self) -> int:
        return len(self.splits)

    def weight(self, painting_id: str) -> float:
        return self.weights.get(painting_id, 1.0)

    def to_json(self) -> str:
        payload = {
            "mode": self.mode,
            "master_seed": self.master_seed,
            "experiments": [
                {"index": i, "seed": seed, **split.to_dict()}
                for i, (seed, split) in enumerate(zip(self.seeds, self.splits))
            ],
            "labels": self.labels,
            "weights": self.weights,
        }
        return json.dumps(payload, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentPlan":
        d = json.loads(text)
        exps = sorted(d["experiments"], key=lambda e: e["index"])
        return cls(
            mode=d["mode"],
            master_seed=int(d["master_seed"]),
            seeds=[int(e["seed"]) for e in exps],
            splits=[Split(e["training"], e["validation"], e["test"]) for e in exps],
            labels=dict(d["labels"]),
            weights={k: float(v) for k, v in d.get("weights", {}).items()},
        )


def experiment_seeds(master_seed: int, n: int) -> List[int]:
    children = np.random.SeedSequence(master_seed).spawn(n)
    return [int(child.generate_state(1)[0]) for child in children]


def contrast_labels(mode: str) -> Tuple[str, ...]:
    if mode == "standard":
        return ("imitation", "proxy")
    if mode == "refined":
        return ("imitation",)
    raise UsageError(f"mode must be one of {MODES}, got {mode!r}")


def proportional_targets(
    records: Sequence[PaintingRecord],
    mode: str,
    fractions: Tuple[float, float] | None = None,
) -> PartitionTargets:
    """Targets scaled from the full-scale partition ratios to the paintings at hand.

    The contrast class is split by the validation/test fractions; the
    authentic class gets the same held-out fractions. Both training shares
    are cut to the smaller of the two, so the classes train balanced;
    leftover paintings sit the experiments out.
    """
    val_f, test_f = fractions or DEFAULT_FRACTIONS[mode]
    n_auth = sum(r.label == "authentic" for r in records)
    n_con = sum(r.label in contrast_labels(mode) for r in records)

    def held_out(n):
        v, t = int(math.floor(n * val_f + 0.5)), int(math.floor(n * test_f + 0.5))
        return max(v, 1 if n >= 3 else 0), max(t, 1 if n >= 3 else 0)

    cv, ct = held_out(n_con)
    av, at = held_out(n_auth)
    c_train = max(n_con - cv - ct, 0)
    a_train = max(n_auth - av - at, 0)
    a_train = c_train = min(a_train, c_train)
    return PartitionTargets((a_train, av, at), (c_train, cv, ct))


def build_plan(
    records: Sequence[PaintingRecord],
    targets: PartitionTargets,
    n: int = 20,
    master_seed: int = 0,
    mode: str = "standard",
    balance_slack: int = DEFAULT_BALANCE_SLACK,
) -> ExperimentPlan:
    """Draw ``n`` independent painting-level splits.

    Paintings of each class are shuffled per experiment and cut into
    partitions of the target sizes; authentic paintings beyond the targets
    sit the experiment out.
    """
    if n < 1:
        raise UsageError(f"need at least one experiment, got {n}")
    wanted = contrast_labels(mode)
    if mode == "refined" and any(r.label == "proxy" for r in records):
        raise PlanningError("refined contrast mode does not admit proxy paintings")
    authentic = sorted(r.painting_id for r in records if r.label == "authentic")
    contrast = sorted(r.painting_id for r in records if r.label in wanted)
    for name, pool, tgt in (("authentic", authentic, targets.authentic), ("contrast", contrast, targets.contrast)):
        if any(t < 0 for t in tgt):
            raise PlanningError(f"{name} targets must be non-negative, got {tgt}")
        if sum(tgt) > len(pool):
            raise PlanningError(f"{name} targets {tgt} need {sum(tgt)} paintings, only {len(pool)} available")
    if abs(targets.authentic[0] - targets.contrast[0]) > balance_slack:
        raise PlanningError(
            f"training classes unbalanced: {targets.authentic[0]} authentic vs {targets.contrast[0]} contrast "
            f"(slack {balance_slack})"
        )

    seeds = experiment_seeds(master_seed, n)
    splits = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        parts = {name: [] for name in PARTITIONS}
        for pool, tgt in ((authentic, targets.authentic), (contrast, targets.contrast)):
            order = [pool[i] for i in rng.permutation(len(pool))]
            start = 0
            for name, count in zip(PARTITIONS, tgt):
                parts[name].extend(order[start : start + count])
                start += count
        splits.append(Split(*(sorted(parts[name]) for name in PARTITIONS)))
    labels = {r.painting_id: r.label for r in records if r.label == "authentic" or r.label in wanted}
    return ExperimentPlan(mode, int(master_seed), seeds, splits, dict(sorted(labels.items())))


def assign_weights(plan: ExperimentPlan, mode: str | None = None, imitation_weight: float = IMITATION_WEIGHT) -> ExperimentPlan:
    """Per-painting loss weights: imitations get ``imitation_weight`` in standard mode, everything else 1."""
    mode = mode or plan.mode
    contrast_labels(mode)
    w_im = imitation_weight if mode == "standard" else 1.0
    plan.weights = {pid: (w_im if label == "imitation" else 1.0) for pid, label in plan.labels.items()}
    return plan
