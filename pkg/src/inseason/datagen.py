"""Training-data generation: labels -> spatially split, in-season examples.

The stages mirror the production flow: join survey labels to field
boundaries, attach detected crop seasons, augment label timestamps on a
30-day grid through the season, slice exactly one trailing year of
observations per sample, standardize, and split by spatial cell.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .crops import OTHERS, MAX_SEASON_LENGTH_DAYS, group_label
from .errors import EmptyInterior, EmptySlice, EmptyStream
from .fileio import ObservationSet
from .rsd import (
    CADENCE_DAYS,
    PAD_LENGTH,
    NormStats,
    PaddedSeries,
    RsdSeries,
    SatTrack,
    StatsAccumulator,
    interpolate_to_cadence,
    median_composite,
    pad_to_length,
    zscore_normalize,
)
from .seasons import CropSeason, check_max_length, detect_seasons

YEAR_DAYS = 365
AUGMENT_INTERVAL_DAYS = 30
SPLIT_RATIOS = (0.70, 0.15, 0.15)
GRID_RESOLUTION_M = 10.0
BOUNDARY_INSET_M = 10.0


@dataclass
class FieldBoundary:
    """A farm polygon: the unit of prediction."""

    field_id: str
    polygon: list[tuple[float, float]]
    area_ha: float
    region: str

    def __post_init__(self):
        if len(self.polygon) < 3:
            raise ValueError(f"field {self.field_id}: polygon needs >= 3 vertices")
        if self.area_ha <= 0:
            raise ValueError(f"field {self.field_id}: area must be positive")

    @property
    def centroid(self) -> tuple[float, float]:
        return geometry.polygon_centroid(self.polygon)

    @property
    def cell_id(self) -> str:
        lat, lng = self.centroid
        return geometry.cell_id(lat, lng)


@dataclass(frozen=True)
class GroundTruthLabel:
    """One surveyed sample: crop name, coordinates, collection day."""

    label_id: str
    crop: str
    lat: float
    lng: float
    timestamp: int


class DropReason(enum.Enum):
    OFF_FIELD = "off_field"
    NO_RSD = "no_rsd"
    NO_SEASON = "no_season"
    AMBIGUOUS_SEASON = "ambiguous_season"
    CONFLICTING_LABELS = "conflicting_labels"
    TOO_LONG = "too_long"
    EMPTY_SLICE = "empty_slice"


@dataclass
class InSeasonExample:
    """One training unit: a label with exactly one trailing year of signal."""

    label: str
    field_id: str
    t_end: int
    season: CropSeason
    series: PaddedSeries
    cell_id: str
    days_after_start: int
    label_id: str = ""


@dataclass
class DatasetSplits:
    train: list[InSeasonExample]
    validation: list[InSeasonExample]
    test: list[InSeasonExample]
    seed: int
    stage_counts: dict[str, int]
    norm_stats: NormStats | None = None
    drops: list[tuple[str, str]] = field(default_factory=list)

    def all_examples(self):
        return self.train + self.validation + self.test


def sample_interior_points(
    fb: FieldBoundary,
    resolution: float = GRID_RESOLUTION_M,
    inset: float = BOUNDARY_INSET_M,
) -> list[tuple[float, float]]:
    """Grid points at least `inset` meters inside the field boundary.

    The grid is anchored at the bounding-box minimum corner with
    `resolution` meter spacing, in a local projection about the centroid.
    """
    origin = fb.centroid
    poly = geometry.to_local_meters(fb.polygon, origin)
    if not geometry.polygon_is_simple(poly):
        raise ValueError(f"field {fb.field_id}: polygon is self-intersecting")
    min_x, min_y = poly[:, 0].min(), poly[:, 1].min()
    max_x, max_y = poly[:, 0].max(), poly[:, 1].max()
    xs = np.arange(min_x, max_x + 1e-9, resolution)
    ys = np.arange(min_y, max_y + 1e-9, resolution)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = geometry.points_in_polygon(pts, poly)
    deep = geometry.distance_to_boundary(pts, poly) >= inset - 1e-9
    keep = pts[inside & deep]
    if keep.shape[0] == 0:
        raise EmptyInterior(f"field {fb.field_id}: no grid point {inset} m inside the boundary")
    return geometry.from_local_meters(keep, origin)


def assign_labels_to_fields(
    labels: list[GroundTruthLabel], fields: list[FieldBoundary]
) -> tuple[list[tuple[FieldBoundary, list[GroundTruthLabel]]], list[GroundTruthLabel]]:
    """Point-in-polygon join; returns (matched fields, dropped labels)."""
    # bounding boxes make the scan linear-ish for non-overlapping fields
    boxes = []
    polys = []
    for fb in fields:
        arr = np.asarray(fb.polygon)
        boxes.append((arr[:, 0].min(), arr[:, 0].max(), arr[:, 1].min(), arr[:, 1].max()))
        polys.append(arr)
    by_field: dict[str, list[GroundTruthLabel]] = {}
    dropped: list[GroundTruthLabel] = []
    for lb in labels:
        hit = None
        for fb, box, poly in zip(fields, boxes, polys):
            if not (box[0] <= lb.lat <= box[1] and box[2] <= lb.lng <= box[3]):
                continue
            if geometry.point_in_polygon(lb.lat, lb.lng, poly):
                hit = fb
                break
        if hit is None:
            dropped.append(lb)
        else:
            by_field.setdefault(hit.field_id, []).append(lb)
    field_index = {fb.field_id: fb for fb in fields}
    matched = [(field_index[fid], by_field[fid]) for fid in sorted(by_field.keys())]
    return matched, dropped


def attach_season(
    labels: list[GroundTruthLabel], seasons: list[CropSeason]
) -> tuple[list[tuple[GroundTruthLabel, CropSeason]], list[tuple[GroundTruthLabel, DropReason]]]:
    """Attach each same-field label to the unique season containing it.

    A label is rejected when no season covers its timestamp, when more than
    one does, when a different-crop label shares the season, or when the
    season exceeds the crop's length bound.
    """
    containing: list[tuple[GroundTruthLabel, list[CropSeason]]] = [
        (lb, [s for s in seasons if s.contains(lb.timestamp)]) for lb in labels
    ]
    # season -> set of crops claiming it (for the conflict check)
    claims: dict[CropSeason, set[str]] = {}
    for lb, hits in containing:
        if len(hits) == 1:
            claims.setdefault(hits[0], set()).add(group_label(lb.crop))

    attached: list[tuple[GroundTruthLabel, CropSeason]] = []
    rejected: list[tuple[GroundTruthLabel, DropReason]] = []
    for lb, hits in containing:
        if not hits:
            rejected.append((lb, DropReason.NO_SEASON))
            continue
        if len(hits) > 1:
            rejected.append((lb, DropReason.AMBIGUOUS_SEASON))
            continue
        season = hits[0]
        if len(claims[season]) > 1:
            rejected.append((lb, DropReason.CONFLICTING_LABELS))
            continue
        crop = group_label(lb.crop)
        # OTHERS aggregates many crops and carries no single length bound
        if crop in MAX_SEASON_LENGTH_DAYS and not check_max_length(season, crop):
            rejected.append((lb, DropReason.TOO_LONG))
            continue
        attached.append((lb, season))
    return attached, rejected


def temporal_augment(season: CropSeason, interval: int = AUGMENT_INTERVAL_DAYS) -> list[int]:
    """Label-time augmentation grid: t_end = start + k*interval, k >= 0, <= end."""
    return list(range(season.start, season.end + 1, interval))


def slice_in_season(series: RsdSeries, t_end: int, year: int = YEAR_DAYS) -> RsdSeries:
    """Keep observations in (t_end - year, t_end]: one trailing year, no future."""
    out: dict[str, SatTrack] = {}
    total = 0
    for sat, track in series.tracks.items():
        keep = (track.timestamps > t_end - year) & (track.timestamps <= t_end)
        out[sat] = SatTrack(
            track.timestamps[keep],
            track.values[keep],
            None if track.cloud is None else track.cloud[keep],
        )
        total += int(keep.sum())
    if total == 0:
        raise EmptySlice(f"no observations in ({t_end - year}, {t_end}]")
    return RsdSeries(tracks=out, location=series.location, satellites=series.satellites)


def build_example_series(
    point_series: list[RsdSeries], t_end: int, pad_length: int = PAD_LENGTH
) -> PaddedSeries:
    """Slice, resample, composite, and pad one (field, t_end) sample.

    The 5-day grid is anchored at t_end and extends backward 72 steps, so
    the last real step is exactly the label time.
    """
    window = (t_end - (pad_length_steps_per_year() - 1) * CADENCE_DAYS, t_end)
    interped = []
    for ps in point_series:
        try:
            sliced = slice_in_season(ps, t_end)
            interped.append(interpolate_to_cadence(sliced, window))
        except (EmptySlice, EmptyStream):
            continue
    if not interped:
        raise EmptySlice(f"no point series with data before {t_end}")
    composite = median_composite(interped)
    return pad_to_length(composite, pad_length)


def pad_length_steps_per_year(year: int = YEAR_DAYS, cadence: int = CADENCE_DAYS) -> int:
    # the year window (t_end-365, t_end] holds the grid t_end-360 ... t_end
    return year // cadence  # 73 at the 5-day cadence


def _hash01(seed: int, key: str) -> float:
    digest = hashlib.sha256(f"{seed}|{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2.0 ** 64


def split_by_cell(
    examples: list[InSeasonExample],
    seed: int,
    ratios: tuple[float, float, float] = SPLIT_RATIOS,
) -> tuple[list[InSeasonExample], list[InSeasonExample], list[InSeasonExample]]:
    """Assign whole spatial cells to train/validation/test by a seeded draw."""
    assignment: dict[str, int] = {}
    for ex in examples:
        if ex.cell_id not in assignment:
            u = _hash01(seed, ex.cell_id)
            if u < ratios[0]:
                assignment[ex.cell_id] = 0
            elif u < ratios[0] + ratios[1]:
                assignment[ex.cell_id] = 1
            else:
                assignment[ex.cell_id] = 2
    splits: tuple[list, list, list] = ([], [], [])
    for ex in examples:
        splits[assignment[ex.cell_id]].append(ex)
    return splits


def build_dataset(
    labels: list[GroundTruthLabel],
    fields: list[FieldBoundary],
    observations: ObservationSet,
    seed: int,
    pad_length: int = PAD_LENGTH,
    ratios: tuple[float, float, float] = SPLIT_RATIOS,
) -> DatasetSplits:
    """Run the whole generation flow and record per-stage retention counts."""
    counts: dict[str, int] = {"labels_input": len(labels)}
    drops: list[tuple[str, str]] = []

    matched, off_field = assign_labels_to_fields(labels, fields)
    drops += [(lb.label_id, DropReason.OFF_FIELD.value) for lb in off_field]
    counts["step1_joined"] = sum(len(lbs) for _, lbs in matched)

    with_rsd: list[tuple[FieldBoundary, list[GroundTruthLabel], list[RsdSeries]]] = []
    step2 = 0
    for fb, lbs in matched:
        points = observations.point_series(fb.field_id) if fb.field_id in observations.streams else []
        points = [p for p in points if all(len(t) > 0 for t in p.tracks.values())]
        if not points:
            drops += [(lb.label_id, DropReason.NO_RSD.value) for lb in lbs]
            continue
        with_rsd.append((fb, lbs, points))
        step2 += len(lbs)
    counts["step2_with_rsd"] = step2

    attached_all: list[tuple[FieldBoundary, list[RsdSeries], GroundTruthLabel, CropSeason]] = []
    for fb, lbs, points in with_rsd:
        try:
            seasons = detect_seasons(median_composite(points))
        except Exception:
            drops += [(lb.label_id, DropReason.NO_SEASON.value) for lb in lbs]
            continue
        attached, rejected = attach_season(lbs, seasons)
        drops += [(lb.label_id, reason.value) for lb, reason in rejected]
        for lb, season in attached:
            attached_all.append((fb, points, lb, season))
    counts["step3_attached"] = len(attached_all)

    examples: list[InSeasonExample] = []
    augmented = 0
    for fb, points, lb, season in attached_all:
        t_ends = temporal_augment(season)
        augmented += len(t_ends)
        for t_end in t_ends:
            try:
                series = build_example_series(points, t_end, pad_length)
            except EmptySlice:
                drops.append((lb.label_id, DropReason.EMPTY_SLICE.value))
                continue
            examples.append(
                InSeasonExample(
                    label=group_label(lb.crop),
                    field_id=fb.field_id,
                    t_end=t_end,
                    season=season,
                    series=series,
                    cell_id=fb.cell_id,
                    days_after_start=t_end - season.start,
                    label_id=lb.label_id,
                )
            )
    counts["step4_augmented"] = augmented
    counts["step5_sliced"] = len(examples)

    train, val, test = split_by_cell(examples, seed, ratios)

    acc = StatsAccumulator()
    for ex in train:
        acc.add(ex.series)
    stats = acc.finalize()
    for ex in examples:
        ex.series = zscore_normalize(ex.series, stats)
    counts["step6_standardized"] = len(examples)

    return DatasetSplits(
        train=train,
        validation=val,
        test=test,
        seed=seed,
        stage_counts=counts,
        norm_stats=stats,
        drops=drops,
    )


def build_unlabeled_examples(
    fields: list[FieldBoundary],
    observations: ObservationSet,
    pad_length: int = PAD_LENGTH,
) -> list[InSeasonExample]:
    """Pre-training inputs: one trailing-year sample per field, no labels.

    Uses each field's last observation day as the slice anchor, so no label
    or season information is needed.
    """
    out: list[InSeasonExample] = []
    for fb in fields:
        if fb.field_id not in observations.streams:
            continue
        points = [
            p
            for p in observations.point_series(fb.field_id)
            if all(len(t) > 0 for t in p.tracks.values())
        ]
        if not points:
            continue
        t_end = max(span[1] for span in (p.time_span() for p in points))
        try:
            series = build_example_series(points, t_end, pad_length)
        except EmptySlice:
            continue
        out.append(
            InSeasonExample(
                label="",
                field_id=fb.field_id,
                t_end=t_end,
                season=CropSeason(t_end - 1, t_end),
                series=series,
                cell_id=fb.cell_id,
                days_after_start=0,
            )
        )
    return out
