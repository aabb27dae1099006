"""Crop-season detection from a field's NDVI trace.

The pipeline's first stage: compute the field NDVI series, drop
cloud-corrupted samples, smooth, threshold into bare/vegetated, segment
into contiguous vegetated runs, and merge runs separated by short gaps.
The result is a list of (start, end) crop seasons per field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crops import max_season_length
from .errors import EmptyTrace
from .rsd import RsdSeries, ndvi_track

CLOUD_SCORE_THRESHOLD = 0.6
SMOOTH_WINDOW_DAYS = 20
NDVI_VEGETATION_THRESHOLD = 0.4
MERGE_GAP_DAYS = 30


@dataclass(frozen=True)
class CropSeason:
    """A contiguous vegetated interval, in days since epoch.

    Pipeline outputs satisfy start < end; zero-length candidates appear
    only transiently inside detection and are discarded before returning.
    """

    start: int
    end: int

    @property
    def length(self) -> int:
        return self.end - self.start

    def contains(self, day: int) -> bool:
        return self.start <= day <= self.end

    def overlaps(self, other: "CropSeason") -> bool:
        return self.start <= other.end and other.start <= self.end


@dataclass
class NdviTrace:
    """Ordered (timestamp, ndvi, optional cloud score) samples for one field."""

    timestamps: np.ndarray
    ndvi: np.ndarray
    cloud: np.ndarray | None = None

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.ndvi = np.asarray(self.ndvi, dtype=np.float64)
        if self.cloud is not None:
            self.cloud = np.asarray(self.cloud, dtype=np.float64)
        if self.timestamps.size > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise ValueError("trace timestamps must be strictly increasing")

    def __len__(self) -> int:
        return int(self.timestamps.size)


def mask_clouds(trace: NdviTrace, threshold: float = CLOUD_SCORE_THRESHOLD) -> NdviTrace:
    """Drop samples whose cloud score is strictly below the threshold.

    Samples without a cloud score are kept. May return an empty trace;
    downstream decides how to handle that.
    """
    if trace.cloud is None:
        return trace
    keep = trace.cloud >= threshold
    return NdviTrace(trace.timestamps[keep], trace.ndvi[keep], trace.cloud[keep])


def smooth(trace: NdviTrace, window: int = SMOOTH_WINDOW_DAYS) -> NdviTrace:
    """Moving average over a centered +/- window/2 day neighborhood.

    The mean runs over the samples actually present in the window (no zero
    padding), so sparse edges are not biased toward zero. Timestamps are
    unchanged.
    """
    if len(trace) == 0:
        raise EmptyTrace("cannot smooth an empty trace")
    half = window / 2.0
    ts = trace.timestamps.astype(np.float64)
    lo = np.searchsorted(ts, ts - half, side="left")
    hi = np.searchsorted(ts, ts + half, side="right")
    csum = np.concatenate(([0.0], np.cumsum(trace.ndvi)))
    out = (csum[hi] - csum[lo]) / (hi - lo)
    return NdviTrace(trace.timestamps.copy(), out, None if trace.cloud is None else trace.cloud.copy())


def segment_seasons(trace: NdviTrace, threshold: float = NDVI_VEGETATION_THRESHOLD) -> list[CropSeason]:
    """Maximal runs of consecutive samples with NDVI >= threshold.

    Each run is reported as (first sample timestamp, last sample timestamp).
    Single-sample runs come out zero-length and are discarded later by the
    start < end check in :func:`detect_seasons`.
    """
    veg = trace.ndvi >= threshold
    seasons: list[CropSeason] = []
    run_start: int | None = None
    for i in range(len(trace)):
        if veg[i] and run_start is None:
            run_start = int(trace.timestamps[i])
        elif not veg[i] and run_start is not None:
            seasons.append(CropSeason(run_start, int(trace.timestamps[i - 1])))
            run_start = None
    if run_start is not None:
        seasons.append(CropSeason(run_start, int(trace.timestamps[-1])))
    return seasons


def merge_adjacent(seasons: list[CropSeason], min_gap: int = MERGE_GAP_DAYS) -> list[CropSeason]:
    """Merge consecutive seasons whose gap is under min_gap days.

    Merging cascades left to right until a fixpoint, so a chain of
    close-together seasons collapses into one.
    """
    merged: list[CropSeason] = []
    for season in seasons:
        if merged and season.start - merged[-1].end < min_gap:
            merged[-1] = CropSeason(merged[-1].start, max(merged[-1].end, season.end))
        else:
            merged.append(season)
    return merged


def detect_seasons(field_series: RsdSeries, sat: str = "S2") -> list[CropSeason]:
    """Full season detection on a field-level (composited) series.

    NDVI -> cloud mask -> smooth -> threshold segmentation -> gap merge.
    Zero-length runs are dropped at the end. Raises EmptyTrace when cloud
    masking removes every sample.
    """
    track = field_series.track(sat)
    trace = NdviTrace(track.timestamps, ndvi_track(track, field_series.spec(sat)), track.cloud)
    trace = mask_clouds(trace)
    if len(trace) == 0:
        raise EmptyTrace("cloud masking removed every sample")
    trace = smooth(trace)
    seasons = merge_adjacent(segment_seasons(trace))
    return [s for s in seasons if s.start < s.end]


def check_max_length(season: CropSeason, crop: str) -> bool:
    """True iff the season is within the crop's plausible length bound."""
    return season.length <= max_season_length(crop)


def season_length_percentiles(
    seasons_by_crop: dict[str, list[int]],
) -> dict[str, tuple[int, int, int, int]]:
    """Nearest-rank (p25, p50, p75, count) of season lengths per crop.

    Crops with no seasons are omitted.
    """
    out: dict[str, tuple[int, int, int, int]] = {}
    for crop, lengths in seasons_by_crop.items():
        if not lengths:
            continue
        ordered = sorted(lengths)
        n = len(ordered)

        def rank(p: float) -> int:
            # nearest-rank: smallest index i with i/n >= p
            return ordered[max(0, math.ceil(p * n) - 1)]

        out[crop] = (rank(0.25), rank(0.50), rank(0.75), n)
    return out
