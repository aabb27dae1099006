"""In-season evaluation: per-crop precision/recall, top-k recall, day
buckets, macro-F1, and the confidence sweep.

NaN conventions follow the reporting tables: precision is NaN when a class
was never predicted, recall is NaN when a class has no ground truth.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .crops import CROP_CLASSES, NUM_CLASSES
from .errors import BucketError
from .timeutil import month_of_day

DAY_BUCKETS = (0, 30, 60, 90, 120, 150, 180)
OVERFLOW_BUCKET = "overflow"

WINTER = "Winter"
MONSOON = "Monsoon"
UNASSIGNED = "Unassigned"


@dataclass
class PredictionRecord:
    field_id: str
    probs: np.ndarray
    true_label: str
    days_after_start: int = 0
    season: str = ""

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)


@dataclass
class MetricCell:
    crop: str
    bucket: str = ""
    precision: float = math.nan
    recall: float = math.nan
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def support(self) -> int:
        return self.tp + self.fn

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        if denom == 0:
            return math.nan
        return 2 * self.tp / denom


def season_of_timestamp(day: int, rule: str = "jun-oct") -> str:
    """Winter/Monsoon grouping of a label timestamp by calendar month."""
    month = month_of_day(day)
    monsoon_months = {5, 6, 7, 8, 9, 10} if rule == "may-oct" else {6, 7, 8, 9, 10}
    if month in monsoon_months:
        return MONSOON
    if month in {11, 12, 1, 2, 3}:
        return WINTER
    return UNASSIGNED


def argmax_class(probs: np.ndarray) -> int:
    return int(np.argmax(probs))


def precision_recall(records: list[PredictionRecord]) -> dict[str, MetricCell]:
    """Per-crop TP/FP/FN from argmax predictions, with NaN conventions."""
    tp = np.zeros(NUM_CLASSES, dtype=np.int64)
    fp = np.zeros(NUM_CLASSES, dtype=np.int64)
    fn = np.zeros(NUM_CLASSES, dtype=np.int64)
    index = {c: i for i, c in enumerate(CROP_CLASSES)}
    for rec in records:
        pred = argmax_class(rec.probs)
        true = index[rec.true_label]
        if pred == true:
            tp[true] += 1
        else:
            fp[pred] += 1
            fn[true] += 1
    cells: dict[str, MetricCell] = {}
    for i, crop in enumerate(CROP_CLASSES):
        precision = math.nan if tp[i] + fp[i] == 0 else tp[i] / (tp[i] + fp[i])
        recall = math.nan if tp[i] + fn[i] == 0 else tp[i] / (tp[i] + fn[i])
        cells[crop] = MetricCell(
            crop=crop, precision=precision, recall=recall, tp=int(tp[i]), fp=int(fp[i]), fn=int(fn[i])
        )
    return cells


def topk_classes(probs: np.ndarray, k: int) -> list[int]:
    """Indices of the k largest probabilities; ties break by class index."""
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    return order[:k]


def topk_recall(records: list[PredictionRecord], k: int) -> dict[str, float]:
    """Per-crop recall counting a hit when the true class is in the top k."""
    hits = np.zeros(NUM_CLASSES, dtype=np.int64)
    total = np.zeros(NUM_CLASSES, dtype=np.int64)
    index = {c: i for i, c in enumerate(CROP_CLASSES)}
    for rec in records:
        true = index[rec.true_label]
        total[true] += 1
        if true in topk_classes(rec.probs, k):
            hits[true] += 1
    return {
        crop: (math.nan if total[i] == 0 else hits[i] / total[i])
        for i, crop in enumerate(CROP_CLASSES)
    }


def bucket_by_days(
    records: list[PredictionRecord], buckets: tuple[int, ...] = DAY_BUCKETS
) -> dict:
    """Group records by exact days-after-start value; beyond max -> overflow."""
    grouped: dict = {b: [] for b in buckets}
    grouped[OVERFLOW_BUCKET] = []
    top = max(buckets)
    for rec in records:
        d = rec.days_after_start
        if d < 0 or d % 30 != 0:
            raise BucketError(f"days_after_start={d} is not a non-negative multiple of 30")
        if d > top:
            grouped[OVERFLOW_BUCKET].append(rec)
        else:
            grouped[d].append(rec)
    return grouped


def macro_f1(cells: dict[str, MetricCell]) -> float:
    """Unweighted mean F1 over classes with ground-truth support."""
    scores = [cell.f1 for cell in cells.values() if cell.support > 0]
    if not scores:
        return math.nan
    return float(np.mean(scores))


def confidence_sweep(
    records: list[PredictionRecord], thresholds: list[float]
) -> list[tuple[float, float, float]]:
    """(threshold, macro precision, macro recall) with abstention below tau.

    Records whose max probability falls under the threshold are not
    predicted and count as false negatives for their true class.
    """
    out = []
    index = {c: i for i, c in enumerate(CROP_CLASSES)}
    for tau in thresholds:
        tp = np.zeros(NUM_CLASSES, dtype=np.int64)
        fp = np.zeros(NUM_CLASSES, dtype=np.int64)
        fn = np.zeros(NUM_CLASSES, dtype=np.int64)
        for rec in records:
            true = index[rec.true_label]
            if rec.probs.max() < tau:
                fn[true] += 1
                continue
            pred = argmax_class(rec.probs)
            if pred == true:
                tp[true] += 1
            else:
                fp[pred] += 1
                fn[true] += 1
        precisions = [tp[i] / (tp[i] + fp[i]) for i in range(NUM_CLASSES) if tp[i] + fp[i] > 0]
        recalls = [tp[i] / (tp[i] + fn[i]) for i in range(NUM_CLASSES) if tp[i] + fn[i] > 0]
        macro_p = math.nan if not precisions else float(np.mean(precisions))
        macro_r = math.nan if not recalls else float(np.mean(recalls))
        out.append((tau, macro_p, macro_r))
    return out


def _format_cell(values: list[float]) -> str:
    defined = [v for v in values if not math.isnan(v)]
    if not defined:
        return "NaN"
    if len(values) == 1:
        return f"{defined[0]:.2f}"
    mean = float(np.mean(defined))
    std = float(np.std(defined))  # population std over the runs
    return f"{mean:.2f}±{std:.2f}"


def report_tables(
    runs: list[list[PredictionRecord]],
    season: str,
    buckets: tuple[int, ...] = DAY_BUCKETS,
) -> dict[str, str]:
    """CSV tables (crops x day buckets) for one season over >= 1 model runs.

    Emits precision, recall, and top-2 recall tables; cells aggregate
    mean +/- population std across runs, rendering NaN as "NaN".
    """
    metrics = {"precision": [], "recall": [], "recall_top2": []}
    for run in runs:
        season_records = [r for r in run if r.season == season]
        grouped = bucket_by_days(season_records, buckets)
        per_bucket_p = {}
        per_bucket_r = {}
        per_bucket_t2 = {}
        for b in buckets:
            cells = precision_recall(grouped[b])
            per_bucket_p[b] = {c: cells[c].precision for c in CROP_CLASSES}
            per_bucket_r[b] = {c: cells[c].recall for c in CROP_CLASSES}
            per_bucket_t2[b] = topk_recall(grouped[b], 2)
        metrics["precision"].append(per_bucket_p)
        metrics["recall"].append(per_bucket_r)
        metrics["recall_top2"].append(per_bucket_t2)

    tables: dict[str, str] = {}
    for metric, per_run in metrics.items():
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["Crop"] + [f"{b} Days" for b in buckets])
        for crop in sorted(CROP_CLASSES):
            row = [crop]
            for b in buckets:
                row.append(_format_cell([run[b][crop] for run in per_run]))
            writer.writerow(row)
        tables[f"{metric}_{season.lower()}"] = buf.getvalue()
    return tables
