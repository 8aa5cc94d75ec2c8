"""Campaign output files and the tables rebuilt from them.

Layout of a campaign directory::

    campaign.json                    runs, statuses, plan metadata
    plan.json                        the experiment plan used
    logs/<run>/exp_XX.jsonl          one line per epoch, then a test line
    predictions/<run>/exp_XX.csv     painting_id,patch_index,label,score
    table4.csv ... table8.csv        the comparison tables
    histograms.csv, histograms.svg   score distributions
    report.md                        all tables in one readable document

Every table is computed from the predictions files alone, so ``build_report``
on a finished directory reproduces the files written by the campaign.
"""

from __future__ import annotations

import csv
import io
import json
import os
from itertools import combinations
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from swinauth.errors import IngestionError
from swinauth.harness.metrics import (
    DEFAULT_BINS,
    PredictionSet,
    Summary,
    bin_edges,
    compute_metrics,
    confusion_overlap,
    prediction_histograms,
    summarize,
)

PREDICTION_COLUMNS = ("painting_id", "patch_index", "label", "score")
CAMPAIGN_FILE = "campaign.json"
NA = "n/a"


def write_text_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)
    return path


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def experiment_name(index: int) -> str:
    return f"exp_{index:02d}"


def predictions_path(out_dir, run: str, index: int) -> Path:
    return Path(out_dir) / "predictions" / run / f"{experiment_name(index)}.csv"


def log_path(out_dir, run: str, index: int) -> Path:
    return Path(out_dir) / "logs" / run / f"{experiment_name(index)}.jsonl"


def write_predictions(path, preds: PredictionSet) -> Path:
    rows = [
        (pid, int(idx), label, f"{float(score):.9g}")
        for pid, idx, label, score in zip(preds.painting_ids, preds.patch_index, preds.labels, preds.scores)
    ]
    return write_text_atomic(path, _csv_text(PREDICTION_COLUMNS, rows))


def read_predictions(path) -> PredictionSet:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != PREDICTION_COLUMNS:
                raise IngestionError(f"predictions header must be {','.join(PREDICTION_COLUMNS)}", path)
            rows = list(reader)
    except OSError as exc:
        raise IngestionError(f"cannot read predictions ({exc})", path) from exc
    return PredictionSet(
        [r["painting_id"] for r in rows],
        [int(r["patch_index"]) for r in rows],
        [r["label"] for r in rows],
        [float(r["score"]) for r in rows],
    )


def write_log(path, epochs: List[dict], test: Optional[dict] = None) -> Path:
    lines = [json.dumps({"event": "epoch", **row}, sort_keys=True) for row in epochs]
    if test is not None:
        lines.append(json.dumps({"event": "test", **test}, sort_keys=True))
    return write_text_atomic(path, "".join(line + "\n" for line in lines))


def read_log(path) -> List[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- formatting ----------------------------------------------------------------


def format_count(n: Optional[int]) -> str:
    if n is None:
        return NA
    if n >= 1_000_000:
        return f"{n / 1e6:.0f}M"
    if n >= 1_000:
        return f"{n / 1e3:.0f}k"
    return str(n)


def format_summary(s: Summary, digits: int = 3) -> str:
    if s.mean is None:
        return NA
    return f"{s.mean:.{digits}f} ({s.sd:.{digits}f})"


def format_pct(value: float) -> str:
    return f"{value:.1f}%"


# -- tables ---------------------------------------------------------------------

TABLES = {
    "table4": (
        ("architecture", "number of parameters", "patches accuracy (SD)", "paintings accuracy (SD)"),
        (None, "patch_accuracy", "painting_accuracy"),
    ),
    "table5": (
        ("architecture", "accuracy authentic", "accuracy contrast", "accuracy imitations", "accuracy proxies"),
        ("accuracy_authentic", "accuracy_contrast", "accuracy_imitation", "accuracy_proxy"),
    ),
    "table6": (
        ("architecture", "painting accuracy (SD) authentic", "painting accuracy (SD) contrast"),
        ("accuracy_authentic", "accuracy_contrast"),
    ),
    "table7": (
        ("architecture", "painting accuracy (SD)", "painting precision (SD)", "painting recall (SD)"),
        ("painting_accuracy", "precision", "recall"),
    ),
}

TITLES = {
    "table4": "Accuracy over all experiments, patches and paintings",
    "table5": "Painting accuracy per class",
    "table6": "Painting accuracy, authentic vs contrast",
    "table7": "Painting accuracy, precision and recall (authentic = positive)",
    "table8": "Patch-prediction overlap between model pairs (% of test patches, all experiments)",
}


class CampaignData:
    """Predictions of every completed (run, experiment) pair in a campaign directory."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        meta_path = self.out_dir / CAMPAIGN_FILE
        if not meta_path.exists():
            raise IngestionError("no campaign metadata found; run `swinauth run` first", meta_path)
        self.meta = json.loads(meta_path.read_text(encoding="utf-8"))
        self.runs: List[dict] = self.meta["runs"]
        self.n_experiments: int = int(self.meta["n_experiments"])
        self.predictions: Dict[str, Dict[int, PredictionSet]] = {}
        for run in self.runs:
            found = {}
            for i in range(self.n_experiments):
                path = predictions_path(self.out_dir, run["name"], i)
                if path.exists():
                    found[i] = read_predictions(path)
            self.predictions[run["name"]] = found

    def metrics(self, run: str) -> Dict[int, dict]:
        return {i: compute_metrics(p) for i, p in sorted(self.predictions[run].items())}


def summaries(data: CampaignData) -> Dict[str, Dict[str, Summary]]:
    keys = [
        "patch_accuracy",
        "painting_accuracy",
        "accuracy_authentic",
        "accuracy_contrast",
        "accuracy_imitation",
        "accuracy_proxy",
        "precision",
        "recall",
    ]
    return {run["name"]: summarize(data.metrics(run["name"]).values(), keys) for run in data.runs}


def metric_tables(data: CampaignData) -> Dict[str, tuple]:
    summ = summaries(data)
    tables = {}
    for name, (header, keys) in TABLES.items():
        rows = []
        for run in data.runs:
            s = summ[run["name"]]
            cells = [run["name"]]
            for key in keys:
                cells.append(format_count(run.get("n_params")) if key is None else format_summary(s[key]))
            rows.append(cells)
        tables[name] = (header, rows)
    return tables


def pooled_correctness(data: CampaignData, run: str, experiments: Sequence[int]) -> tuple:
    keys, correct = [], []
    for i in experiments:
        p = data.predictions[run][i]
        keys.extend((i, pid, idx) for pid, idx in p.keys())
        correct.append(p.patch_correct)
    return keys, (np.concatenate(correct) if correct else np.zeros(0, dtype=bool))


def overlap_table(data: CampaignData) -> tuple:
    """2x2 overlap for every ordered pair (rows = first model, columns = second)."""
    header = ("model_a", "model_b", "model_a outcome", "model_b correct", "model_b incorrect")
    rows = []
    for a, b in combinations([r["name"] for r in data.runs], 2):
        shared = sorted(set(data.predictions[a]) & set(data.predictions[b]))
        if not shared:
            rows.append((a, b, "correct", NA, NA))
            rows.append((a, b, "incorrect", NA, NA))
            continue
        keys_a, ca = pooled_correctness(data, a, shared)
        keys_b, cb = pooled_correctness(data, b, shared)
        if keys_a != keys_b:
            raise IngestionError(f"{a} and {b} were scored on different test patches", data.out_dir)
        cells = confusion_overlap(ca, cb)
        rows.append((a, b, "correct", format_pct(cells[0, 0]), format_pct(cells[0, 1])))
        rows.append((a, b, "incorrect", format_pct(cells[1, 0]), format_pct(cells[1, 1])))
    return header, rows


def histogram_data(data: CampaignData, bins: int = DEFAULT_BINS) -> Dict[str, Dict[str, np.ndarray]]:
    out = {}
    for run in data.runs:
        preds = [data.predictions[run["name"]][i] for i in sorted(data.predictions[run["name"]])]
        scores = np.concatenate([p.scores for p in preds]) if preds else np.zeros(0)
        correct = np.concatenate([p.patch_correct for p in preds]) if preds else np.zeros(0, dtype=bool)
        out[run["name"]] = prediction_histograms(scores, correct, bins)
    return out


def _markdown_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in rows]
    return "\n".join(lines)


def _overlap_markdown(data: CampaignData, rows) -> str:
    blocks = []
    for k in range(0, len(rows), 2):
        a, b = rows[k][0], rows[k][1]
        header = ("", f"{b} correct", f"{b} incorrect")
        body = [(f"{a} {rows[k + j][2]}", rows[k + j][3], rows[k + j][4]) for j in range(2)]
        blocks.append(_markdown_table(header, body))
    return "\n\n".join(blocks) if blocks else "(needs two or more runs)"


def _gaps(data: CampaignData) -> List[str]:
    lines = []
    for run in data.runs:
        missing = [i for i in range(data.n_experiments) if i not in data.predictions[run["name"]]]
        for i in missing:
            failure = next(
                (f for f in data.meta.get("failures", []) if f["run"] == run["name"] and f["experiment"] == i), None
            )
            reason = failure["error"] if failure else "no predictions file"
            lines.append(f"- {run['name']} {experiment_name(i)}: {reason}")
    return lines


def build_report(out_dir, bins: int = DEFAULT_BINS, plot: bool = True) -> Dict[str, Path]:
    """Write table4..8, histograms and report.md into ``out_dir`` from its predictions files."""
    from swinauth.harness.plotting import plot_histograms

    data = CampaignData(out_dir)
    out = Path(out_dir)
    written: Dict[str, Path] = {}
    tables = metric_tables(data)
    for name, (header, rows) in tables.items():
        written[name] = write_text_atomic(out / f"{name}.csv", _csv_text(header, rows))
    header8, rows8 = overlap_table(data)
    written["table8"] = write_text_atomic(out / "table8.csv", _csv_text(header8, rows8))

    hists = histogram_data(data, bins)
    edges = bin_edges(bins)
    hist_rows = []
    for run, series in hists.items():
        for kind in ("incorrect", "correct"):
            for lo, hi, count in zip(edges[:-1], edges[1:], series[kind]):
                hist_rows.append((run, kind, f"{lo:.4f}", f"{hi:.4f}", int(count)))
    written["histograms"] = write_text_atomic(
        out / "histograms.csv", _csv_text(("architecture", "series", "bin_lo", "bin_hi", "count"), hist_rows)
    )
    if plot:
        written["histograms_svg"] = plot_histograms(hists, edges, out / "histograms.svg")

    meta = data.meta
    done = {run["name"]: len(data.predictions[run["name"]]) for run in data.runs}
    doc = [
        "# Authentication campaign report",
        "",
        f"- contrast mode: {meta['mode']}",
        f"- experiments: {data.n_experiments} (master seed {meta['master_seed']})",
        "- completed: " + ", ".join(f"{name} {n}/{data.n_experiments}" for name, n in done.items()),
        "- entries are mean (SD) over completed experiments; SD is the population SD; n/a = undefined",
        "",
    ]
    for name in ("table4", "table5", "table6", "table7"):
        header, rows = tables[name]
        doc += [f"## {name}: {TITLES[name]}", "", _markdown_table(header, rows), ""]
    doc += [f"## table8: {TITLES['table8']}", "", _overlap_markdown(data, rows8), ""]
    doc += ["## histograms", "", "See histograms.csv" + (" and histograms.svg." if plot else "."), ""]
    gaps = _gaps(data)
    if gaps:
        doc += ["## gaps", ""] + gaps + [""]
    written["report"] = write_text_atomic(out / "report.md", "\n".join(doc))
    return written
