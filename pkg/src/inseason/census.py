"""Monthly ensemble inference and census-style area aggregation.

Inference runs as of the 1st of each month using only observations
strictly before that date. Per field, overlapping season estimates across
months are grouped and the latest prediction wins; areas then aggregate
by region, agricultural season, and predicted crop for comparison against
census totals.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .crops import CROP_CLASSES, group_label
from .datagen import FieldBoundary, build_example_series
from .errors import EmptySlice, EmptyTrace
from .fileio import ObservationSet
from .metrics import MONSOON, UNASSIGNED, WINTER
from .model.checkpoint import Checkpoint
from .model.network import CropModel
from .rsd import NormStats, PaddedSeries, RsdSeries, SatTrack, median_composite, zscore_normalize
from .seasons import CropSeason, detect_seasons, season_length_percentiles
from .timeutil import iso_from_day, month_firsts, month_of_day

# A season still counts as active if it ended within this many days of the
# inference date: smoothing and cloud drops pull the detected end a little
# behind the data edge.
ACTIVE_SLACK_DAYS = 20


@dataclass
class FieldPrediction:
    field_id: str
    date: int  # inference day (1st of month)
    probs: np.ndarray
    season: CropSeason
    region: str
    area_ha: float
    days_after_start: int = 0

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)

    @property
    def crop(self) -> str:
        return CROP_CLASSES[int(np.argmax(self.probs))]


@dataclass
class AreaReport:
    region: str
    season: str
    predicted: dict[str, float]
    census: dict[str, float]
    cosine: float
    ratios: dict[str, float] = dc_field(default_factory=dict)

    @property
    def predicted_total(self) -> float:
        return sum(self.predicted.values())

    @property
    def census_total(self) -> float:
        return sum(self.census.values())


def _truncated_points(
    observations: ObservationSet, field_id: str, day: int
) -> list[RsdSeries]:
    """Per-point series for one field, keeping observations strictly before day."""
    points = []
    for stream in observations.streams.get(field_id, []):
        tracks = {}
        ok = True
        for sat, track in stream.items():
            keep = track.timestamps < day
            if not keep.any():
                ok = False
                break
            tracks[sat] = SatTrack(
                track.timestamps[keep],
                track.values[keep],
                None if track.cloud is None else track.cloud[keep],
            )
        if ok:
            points.append(RsdSeries(tracks=tracks, satellites=observations.satellites))
    return points


def _active_season(seasons: list[CropSeason], day: int, slack: int = ACTIVE_SLACK_DAYS) -> CropSeason | None:
    candidates = [s for s in seasons if s.start <= day - 1 <= s.end + slack]
    if not candidates:
        return None
    return max(candidates, key=lambda s: (s.start, s.end))


def monthly_inference(
    fields: list[FieldBoundary],
    observations: ObservationSet,
    checkpoints: list[Checkpoint],
    date_range: tuple[int, int],
    threads: int = 1,
) -> list[FieldPrediction]:
    """Classify each field's active season on the 1st of each month in range.

    Probabilities are the arithmetic mean over the checkpoint ensemble;
    each model standardizes inputs with its own training stats. Fields
    without an active season that month are skipped.
    """
    if not checkpoints:
        raise ValueError("monthly inference needs at least one checkpoint")
    models = [(ckpt.build_model(), ckpt.norm_stats) for ckpt in checkpoints]
    ordered_fields = sorted(fields, key=lambda f: f.field_id)

    def stage_one(fb: FieldBoundary, day: int):
        points = _truncated_points(observations, fb.field_id, day)
        if not points:
            return None
        try:
            seasons = detect_seasons(median_composite(points))
        except EmptyTrace:
            return None
        season = _active_season(seasons, day)
        if season is None:
            return None
        try:
            series = build_example_series(points, day - 1)
        except EmptySlice:
            return None
        return fb, season, series

    out: list[FieldPrediction] = []
    for day in month_firsts(date_range[0], date_range[1]):
        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda fb: stage_one(fb, day), ordered_fields))
        else:
            results = [stage_one(fb, day) for fb in ordered_fields]
        staged: list[tuple[FieldBoundary, CropSeason, PaddedSeries]] = [r for r in results if r]
        if not staged:
            continue
        probs = _ensemble_probs(models, [s for _, _, s in staged])
        for (fb, season, _), p in zip(staged, probs):
            out.append(
                FieldPrediction(
                    field_id=fb.field_id,
                    date=day,
                    probs=p,
                    season=season,
                    region=fb.region,
                    area_ha=fb.area_ha,
                    days_after_start=(day - 1) - season.start,
                )
            )
    return out


def _ensemble_probs(
    models: list[tuple[CropModel, NormStats]], series_list: list[PaddedSeries], batch_size: int = 256
) -> np.ndarray:
    acc = None
    for model, stats in models:
        normalized = [zscore_normalize(s, stats) for s in series_list]
        sats = sorted(normalized[0].values.keys())
        values = {s: np.stack([ps.values[s] for ps in normalized]) for s in sats}
        mask = {s: np.stack([ps.mask[s] for ps in normalized]) for s in sats}
        chunks = []
        for lo in range(0, len(series_list), batch_size):
            batch = {s: (values[s][lo: lo + batch_size], mask[s][lo: lo + batch_size]) for s in sats}
            chunks.append(model.predict_probs(batch))
        probs = np.concatenate(chunks, axis=0)
        acc = probs if acc is None else acc + probs
    return acc / len(models)


def group_seasons(predictions: list[FieldPrediction]) -> list[FieldPrediction]:
    """Collapse one field's monthly predictions to one per distinct season.

    Overlapping season estimates group transitively; each group keeps the
    prediction with the latest inference date.
    """
    ordered = sorted(predictions, key=lambda p: p.date)
    parent = list(range(len(ordered)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            if ordered[i].season.overlaps(ordered[j].season):
                parent[find(i)] = find(j)
    groups: dict[int, FieldPrediction] = {}
    for i, pred in enumerate(ordered):
        root = find(i)
        cur = groups.get(root)
        if cur is None or pred.date > cur.date:
            groups[root] = pred
    return sorted(groups.values(), key=lambda p: p.season.start)


def assign_agricultural_season(season_start: int, rule: str = "may-oct") -> str:
    """Winter/Monsoon tag from the month the season starts, or Unassigned."""
    month = month_of_day(season_start)
    monsoon_months = {5, 6, 7, 8, 9, 10} if rule == "may-oct" else {6, 7, 8, 9, 10}
    if month in monsoon_months:
        return MONSOON
    if month in {11, 12, 1, 2, 3}:
        return WINTER
    return UNASSIGNED


def final_predictions(
    predictions: list[FieldPrediction],
) -> list[FieldPrediction]:
    """Group per field across months and keep the latest per season."""
    by_field: dict[str, list[FieldPrediction]] = {}
    for p in predictions:
        by_field.setdefault(p.field_id, []).append(p)
    out: list[FieldPrediction] = []
    for fid in sorted(by_field.keys()):
        out.extend(group_seasons(by_field[fid]))
    return out


def aggregate_area(
    finals: list[FieldPrediction], season_rule: str = "may-oct"
) -> dict[tuple[str, str], dict[str, float]]:
    """(region, season) -> predicted area per crop, by most confident class."""
    sums: dict[tuple[str, str], dict[str, float]] = {}
    for p in finals:
        season = assign_agricultural_season(p.season.start, season_rule)
        if season == UNASSIGNED:
            continue
        bucket = sums.setdefault((p.region, season), {})
        bucket[p.crop] = bucket.get(p.crop, 0.0) + p.area_ha
    return sums


def cosine_similarity(
    predicted: dict[str, float], census: dict[str, float], form: str = "norm"
) -> float:
    """Cosine of the per-crop area vectors over the union of crops.

    form="norm" is the standard cosine (Euclidean norms); form="sum"
    divides by the product of plain sums instead, for comparison.
    """
    crops = sorted(set(predicted) | set(census))
    a = np.array([predicted.get(c, 0.0) for c in crops])
    b = np.array([census.get(c, 0.0) for c in crops])
    dot = float(np.dot(a, b))
    if form == "sum":
        denom = float(a.sum() * b.sum())
    else:
        denom = float(np.linalg.norm(a) * np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return dot / denom


def area_ratio(predicted: float, census: float) -> float:
    """min(census/pred, pred/census); 0 when exactly one side is 0, 1 when both."""
    if predicted == 0.0 and census == 0.0:
        return 1.0
    if predicted == 0.0 or census == 0.0:
        return 0.0
    return min(census / predicted, predicted / census)


def emit_census_report(
    finals: list[FieldPrediction],
    census_rows: list[dict],
    season_rule: str = "may-oct",
) -> tuple[list[AreaReport], list[str]]:
    """Compare aggregated predictions with census areas per (region, season).

    Census crops outside the vocabulary fold into OTHERS with a warning.
    Returns the reports (sorted) and the warning list.
    """
    warnings: list[str] = []
    census: dict[tuple[str, str], dict[str, float]] = {}
    for row in census_rows:
        crop = row["crop"]
        grouped = group_label(crop)
        if grouped != crop:
            warnings.append(f"census crop {crop!r} not in vocabulary; counted under {grouped}")
        bucket = census.setdefault((row["region"], row["season"]), {})
        bucket[grouped] = bucket.get(grouped, 0.0) + row["area_ha"]

    predicted = aggregate_area(finals, season_rule)
    reports: list[AreaReport] = []
    for key in sorted(set(census) | set(predicted)):
        region, season = key
        pred = predicted.get(key, {})
        cens = census.get(key, {})
        ratios = {
            crop: area_ratio(pred.get(crop, 0.0), cens.get(crop, 0.0))
            for crop in sorted(set(pred) | set(cens))
        }
        reports.append(
            AreaReport(
                region=region,
                season=season,
                predicted=pred,
                census=cens,
                cosine=cosine_similarity(pred, cens),
                ratios=ratios,
            )
        )
    return reports, warnings


def monthly_timeline(
    predictions: list[FieldPrediction],
) -> list[tuple[str, str, str, float]]:
    """(region, month-ISO, crop, area) of final predictions known by each month."""
    if not predictions:
        return []
    months = sorted({p.date for p in predictions})
    rows: list[tuple[str, str, str, float]] = []
    for month in months:
        upto = [p for p in predictions if p.date <= month]
        finals = final_predictions(upto)
        sums: dict[tuple[str, str], float] = {}
        for p in finals:
            key = (p.region, p.crop)
            sums[key] = sums.get(key, 0.0) + p.area_ha
        for (region, crop), area in sorted(sums.items()):
            rows.append((region, iso_from_day(month), crop, area))
    return rows


def predicted_season_lengths(
    finals: list[FieldPrediction], season_rule: str = "may-oct"
) -> dict[str, dict[str, tuple[int, int, int, int]]]:
    """Per-season, per-predicted-crop season-length percentile table."""
    grouped: dict[str, dict[str, list[int]]] = {WINTER: {}, MONSOON: {}}
    for p in finals:
        season = assign_agricultural_season(p.season.start, season_rule)
        if season == UNASSIGNED:
            continue
        grouped[season].setdefault(p.crop, []).append(p.season.length)
    return {season: season_length_percentiles(by_crop) for season, by_crop in grouped.items()}
