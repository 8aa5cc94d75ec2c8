"""Command-line entry point: prepare, plan, run, report, selfcheck.

Exit codes: 0 success, 1 data error, 2 usage error, 3 internal failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from swinauth import __version__
from swinauth.data.manifest import default_cache_dir, label_counts, prepare_cache, read_manifest
from swinauth.data.plan import (
    REFINED_FULL,
    STANDARD_FULL,
    ExperimentPlan,
    PartitionTargets,
    assign_weights,
    build_plan,
    contrast_labels,
    proportional_targets,
)
from swinauth.errors import (
    ConfigError,
    IngestionError,
    PlanningError,
    UsageError,
    WeightsError,
)
from swinauth.harness.architectures import build_architecture
from swinauth.harness.campaign import resolve_runs, run_campaign
from swinauth.harness.reports import CAMPAIGN_FILE, build_report, write_text_atomic

logger = logging.getLogger("swinauth")

EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
CACHE_ENV = "SWINAUTH_CACHE"

DEFAULT_ARCHS = {"standard": ["swin-tiny", "swin-base", "baseline-cnn"], "refined": ["swin-tiny", "baseline-cnn"]}
RUN_KEYS = ("batch_size", "learning_rate", "patience", "min_delta", "max_epochs", "eval_batch_size")


@dataclass
class CampaignConfig:
    """Everything ``run`` needs; file values are overridden by explicit flags."""

    manifest: Optional[str] = None
    cache: Optional[str] = None
    mode: str = "standard"
    n: int = 20
    seed: int = 0
    out: Optional[str] = None
    plan: Optional[str] = None
    targets: Optional[dict] = None
    fractions: Optional[List[float]] = None
    balance_slack: int = 5
    imitation_weight: Optional[float] = None
    runs: List[dict] = field(default_factory=list)
    defaults: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "CampaignConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys in {path}: {sorted(unknown)}")
        cfg = cls(**data)
        base = Path(path).parent
        for key in ("manifest", "cache", "out", "plan"):
            value = getattr(cfg, key)
            if value and not Path(value).is_absolute():
                setattr(cfg, key, str(base / value))
        return cfg

    def run_configs(self) -> list:
        runs = self.runs or [{"architecture": a} for a in DEFAULT_ARCHS[self.mode]]
        merged = []
        for r in runs:
            r = {"architecture": r} if isinstance(r, str) else dict(r)
            merged.append({**self.defaults, **r})
        runs = resolve_runs(merged)
        for r in runs:
            build_architecture(r.architecture)  # fail fast on unknown presets
        return runs

    @property
    def w_im(self) -> float:
        if self.imitation_weight is not None:
            return float(self.imitation_weight)
        return 10.0 if self.mode == "standard" else 1.0


# -- helpers ------------------------------------------------------------------------


def _require_file(path: Optional[str], what: str, hint: str = "") -> Path:
    if not path:
        raise UsageError(f"{what} is required{hint}")
    p = Path(path)
    if not p.exists():
        raise IngestionError(f"{what} not found{hint}", p)
    return p


def resolve_targets(records, cfg: CampaignConfig) -> PartitionTargets:
    """Explicit targets, else the reference counts when the corpus can supply them, else proportional."""
    if cfg.targets:
        return PartitionTargets(tuple(cfg.targets["authentic"]), tuple(cfg.targets["contrast"]))
    full = STANDARD_FULL if cfg.mode == "standard" else REFINED_FULL
    counts = label_counts(records)
    n_con = sum(counts[label] for label in contrast_labels(cfg.mode))
    if counts["authentic"] >= sum(full.authentic) and n_con >= sum(full.contrast):
        return full
    targets = proportional_targets(records, cfg.mode, tuple(cfg.fractions) if cfg.fractions else None)
    logger.info("corpus smaller than the reference partitions; using proportional targets %s", targets)
    return targets


def make_plan(cfg: CampaignConfig) -> ExperimentPlan:
    if cfg.plan:
        plan = ExperimentPlan.from_json(_require_file(cfg.plan, "plan file").read_text(encoding="utf-8"))
        if plan.mode != cfg.mode:
            logger.info("using mode %r from plan file", plan.mode)
            cfg.mode = plan.mode
        return plan
    records = read_manifest(_require_file(cfg.manifest, "manifest", " (pass --manifest)"))
    if cfg.mode == "refined":
        records = [r for r in records if r.label != "proxy"]
    targets = resolve_targets(records, cfg)
    plan = build_plan(records, targets, n=cfg.n, master_seed=cfg.seed, mode=cfg.mode, balance_slack=cfg.balance_slack)
    return assign_weights(plan, imitation_weight=cfg.w_im)


def plan_summary(plan: ExperimentPlan) -> str:
    lines = [f"mode {plan.mode}, {plan.n_experiments} experiments, master seed {plan.master_seed}"]
    for i, (seed, split) in enumerate(zip(plan.seeds, plan.splits)):
        parts = []
        for name in ("training", "validation", "test"):
            ids = getattr(split, name)
            auth = sum(plan.labels[p] == "authentic" for p in ids)
            parts.append(f"{name} {auth}+{len(ids) - auth}")
        lines.append(f"  exp_{i:02d} seed {seed}: " + ", ".join(parts) + " (authentic+contrast)")
    return "\n".join(lines)


def _config_from_args(args) -> CampaignConfig:
    cfg = CampaignConfig.load(args.config) if getattr(args, "config", None) else CampaignConfig()
    for key in ("manifest", "cache", "mode", "n", "seed", "out", "plan"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if cfg.cache is None:
        cfg.cache = default_cache_dir()
    if cfg.mode not in DEFAULT_ARCHS:
        raise UsageError(f"--mode must be standard or refined, got {cfg.mode!r}")
    overrides = {k: getattr(args, k) for k in RUN_KEYS if getattr(args, k, None) is not None}
    cfg.defaults = {**cfg.defaults, **overrides}
    if getattr(args, "arch", None):
        cfg.runs = [{"architecture": a} for a in args.arch]
    if getattr(args, "shuffle_labels", False):
        cfg.runs = [
            {**(r if isinstance(r, dict) else {"architecture": r}), "shuffle_labels": True}
            for r in (cfg.runs or DEFAULT_ARCHS[cfg.mode])
        ]
    return cfg


# -- commands -------------------------------------------------------------------


def cmd_prepare(args) -> int:
    manifest = _require_file(args.manifest, "manifest", " (pass --manifest)")
    cache = args.cache or default_cache_dir()
    if not cache:
        raise UsageError(f"no cache directory; pass --cache or set {CACHE_ENV}")
    records = read_manifest(manifest)
    summary = prepare_cache(records, cache, force=args.force)
    per_class = ", ".join(f"{k} {v}" for k, v in summary["patches_per_class"].items())
    print(f"cache {cache}: {summary['paintings']} paintings, {summary['patches']} patches ({per_class})")
    for path, message in summary["failures"]:
        print(f"error: {message}", file=sys.stderr)
    if summary["failures"]:
        print(f"{len(summary['failures'])} image(s) failed to ingest", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _config_from_args(args)
    plan = make_plan(cfg)
    print(plan_summary(plan))
    if cfg.out:
        out = Path(cfg.out)
        text = plan.to_json()
        if out.exists() and not args.force and out.read_text(encoding="utf-8") != text:
            raise UsageError(f"{out} exists with a different plan; pass --force to overwrite")
        write_text_atomic(out, text)
        print(f"plan written to {out}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    runs = cfg.run_configs()
    plan = make_plan(cfg)
    if args.dry_run:
        print(plan_summary(plan))
        print("runs:")
        for r in runs:
            print("  " + json.dumps(r.to_dict(), sort_keys=True))
        return EXIT_OK
    if not cfg.out:
        raise UsageError("--out is required for run")
    cache = Path(cfg.cache) if cfg.cache else None
    if cache is None or not (cache / "index.csv").exists():
        raise IngestionError(
            f"no patch cache found; build it with `swinauth prepare --manifest ... --cache {cache or 'DIR'}`",
            cache or "(no --cache)",
        )
    out = Path(cfg.out)
    if (out / CAMPAIGN_FILE).exists() and not args.force:
        raise UsageError(f"{out} already holds a campaign; pass --force to overwrite")
    meta = run_campaign(plan, runs, cache, out, jobs=args.jobs, save_trained_weights=args.save_weights)
    print((out / "report.md").read_text(encoding="utf-8"))
    for failure in meta["failures"]:
        print(f"error: {failure['run']} exp_{failure['experiment']:02d}: {failure['error']}", file=sys.stderr)
    return EXIT_OK if not meta["failures"] else EXIT_INTERNAL


def cmd_report(args) -> int:
    if not args.out:
        raise UsageError("--out (the campaign directory) is required for report")
    written = build_report(args.out, bins=args.bins)
    print((Path(args.out) / "report.md").read_text(encoding="utf-8"))
    print("wrote " + ", ".join(sorted(p.name for p in written.values())))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    from swinauth.selfcheck import run_selfcheck

    results = run_selfcheck(
        grad_instances=args.grad_instances,
        oracle_instances=args.oracle_instances,
        inject_mask_fault=args.inject_mask_fault,
    )
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_DATA


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swinauth", description="Swin-based art authentication experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def campaign_flags(p, with_out_help):
        p.add_argument("--config", help="JSON campaign config; flags override its values")
        p.add_argument("--manifest", help="painting manifest (painting_id,path,label,note)")
        p.add_argument("--cache", help=f"patch cache directory (default: ${CACHE_ENV})")
        p.add_argument("--mode", choices=("standard", "refined"), default=None, help="contrast set")
        p.add_argument("--n", type=int, default=None, help="number of experiments (default 20)")
        p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
        p.add_argument("--plan", help="use this plan file instead of drawing one")
        p.add_argument("--out", help=with_out_help)
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = sub.add_parser("prepare", help="extract sub-images into the patch cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", help=f"cache directory (default: ${CACHE_ENV})")
    p.add_argument("--force", action="store_true", help="overwrite an existing cache")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("plan", help="draw the N painting-level partitions")
    campaign_flags(p, "write the plan JSON here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="train and evaluate every architecture on every partition")
    campaign_flags(p, "campaign output directory")
    p.add_argument("--arch", action="append", help="architecture preset (repeatable)")
    p.add_argument("--jobs", type=int, default=1, help="parallel training processes")
    p.add_argument("--dry-run", action="store_true", help="print the resolved plan and runs, train nothing")
    p.add_argument("--save-weights", action="store_true", help="keep the trained weights of every run")
    p.add_argument("--shuffle-labels", action="store_true", help="train on painting-shuffled labels (control)")
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--min-delta", dest="min_delta", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--eval-batch-size", dest="eval_batch_size", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="rebuild tables and figures from a campaign's predictions")
    p.add_argument("--out", required=True, help="campaign directory")
    p.add_argument("--bins", type=int, default=50, help="histogram bins")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selfcheck", help="gradient, oracle, shape and count checks at toy scale")
    p.add_argument("--grad-instances", type=int, default=3)
    p.add_argument("--oracle-instances", type=int, default=10)
    p.add_argument("--inject-mask-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_selfcheck)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestionError, PlanningError, WeightsError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_INTERNAL
    except Exception as exc:  # anything else is our bug
        logger.debug("internal failure", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
