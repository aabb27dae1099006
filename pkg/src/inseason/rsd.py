"""Multi-satellite observation time series and the numeric primitives on them.

A series holds, per satellite, an ordered track of observations; each
observation is a per-band feature vector plus an optional cloud-quality
score. Tracks are stored as numpy arrays for speed, with
:class:`BandObservation` as the record-level view.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, EmptyField, EmptyStream, LengthOverflow, StatsMismatch
from .satellites import DEFAULT_SATELLITES, SENTINEL2, SatelliteSpec

CADENCE_DAYS = 5
# One year at the 5-day cadence is 73 steps; 80 is the padded length that
# both tokenizer sizes (4 and 8) divide.
PAD_LENGTH = 80

STD_EPS = 1e-6


@dataclass(frozen=True)
class BandObservation:
    """One observation: integer day, per-band values, optional cloud score."""

    timestamp: int
    values: tuple[float, ...]
    cloud_score: float | None = None


@dataclass
class SatTrack:
    """Ordered observations of a single satellite.

    timestamps: (N,) int days, strictly increasing.
    values: (N, bands) float.
    cloud: (N,) float or None (satellites without a cloud channel).
    """

    timestamps: np.ndarray
    values: np.ndarray
    cloud: np.ndarray | None = None

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if self.cloud is not None:
            self.cloud = np.asarray(self.cloud, dtype=np.float64)
        if self.timestamps.ndim != 1 or self.values.shape[0] != self.timestamps.shape[0]:
            raise AlignmentError("timestamps and values must have matching length")
        if self.cloud is not None and self.cloud.shape != self.timestamps.shape:
            raise AlignmentError("cloud scores must align with timestamps")
        if self.timestamps.size > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise AlignmentError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def observation(self, i: int) -> BandObservation:
        cs = None if self.cloud is None else float(self.cloud[i])
        return BandObservation(int(self.timestamps[i]), tuple(self.values[i]), cs)


@dataclass
class RsdSeries:
    """Per-satellite observation tracks for one point or field."""

    tracks: dict[str, SatTrack]
    location: tuple[float, float] | None = None
    satellites: tuple[SatelliteSpec, ...] = DEFAULT_SATELLITES

    @property
    def satellite_ids(self) -> tuple[str, ...]:
        return tuple(self.tracks.keys())

    def track(self, sat: str) -> SatTrack:
        return self.tracks[sat]

    def spec(self, sat: str) -> SatelliteSpec:
        for s in self.satellites:
            if s.name == sat:
                return s
        raise KeyError(f"unknown satellite {sat!r}")

    def time_span(self) -> tuple[int, int]:
        los = [int(t.timestamps[0]) for t in self.tracks.values() if len(t)]
        his = [int(t.timestamps[-1]) for t in self.tracks.values() if len(t)]
        if not los:
            raise EmptyStream("*", "series has no observations at all")
        return min(los), max(his)


@dataclass
class NormStats:
    """Per-satellite per-band mean/std, computed over the training split only."""

    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]

    def to_json(self) -> dict:
        return {
            "mean": {k: [float(x) for x in v] for k, v in self.mean.items()},
            "std": {k: [float(x) for x in v] for k, v in self.std.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "NormStats":
        return cls(
            mean={k: np.asarray(v, dtype=np.float64) for k, v in obj["mean"].items()},
            std={k: np.asarray(v, dtype=np.float64) for k, v in obj["std"].items()},
        )


@dataclass
class PaddedSeries:
    """Fixed-length per-satellite value grid with a per-step validity mask.

    values: sat -> (L, bands) float; padded steps are exactly 0.
    mask: sat -> (L,) bool; True at steps holding real (interpolated) data.
    """

    values: dict[str, np.ndarray]
    mask: dict[str, np.ndarray]
    length: int = PAD_LENGTH

    def copy(self) -> "PaddedSeries":
        return PaddedSeries(
            values={k: v.copy() for k, v in self.values.items()},
            mask={k: m.copy() for k, m in self.mask.items()},
            length=self.length,
        )


def interpolate_to_cadence(
    series: RsdSeries,
    window: tuple[int, int],
    cadence: int = CADENCE_DAYS,
) -> RsdSeries:
    """Resample every satellite track onto the grid t0, t0+cadence, ..., <= t1.

    Values are linearly interpolated between bracketing observations; outside
    the observed range the nearest observed value is held (clamp), so no
    trend is invented at the window edges. Cloud scores are interpolated the
    same way for satellites that carry them.
    """
    t0, t1 = window
    grid = np.arange(t0, t1 + 1, cadence, dtype=np.int64)
    out: dict[str, SatTrack] = {}
    for sat, track in series.tracks.items():
        if len(track) == 0:
            raise EmptyStream(sat, "cannot interpolate an empty stream")
        ts = track.timestamps.astype(np.float64)
        vals = np.empty((grid.size, track.values.shape[1]), dtype=np.float64)
        for b in range(track.values.shape[1]):
            # np.interp clamps to the end values outside the observed range
            vals[:, b] = np.interp(grid, ts, track.values[:, b])
        cloud = None
        if track.cloud is not None:
            cloud = np.interp(grid, ts, track.cloud)
        out[sat] = SatTrack(grid.copy(), vals, cloud)
    return RsdSeries(tracks=out, location=series.location, satellites=series.satellites)


def median_composite(point_series: list[RsdSeries]) -> RsdSeries:
    """Per-timestamp, per-band median across aligned point series.

    Even point counts use the arithmetic mean of the two middle values
    (numpy's convention). Cloud scores, when present, are composited the
    same way.
    """
    if not point_series:
        raise EmptyField("median composite over zero points")
    first = point_series[0]
    out: dict[str, SatTrack] = {}
    for sat, ref in first.tracks.items():
        stacks = []
        clouds = []
        for s in point_series:
            if sat not in s.tracks:
                raise AlignmentError(f"point series missing satellite {sat!r}")
            tr = s.tracks[sat]
            if tr.values.shape != ref.values.shape or not np.array_equal(tr.timestamps, ref.timestamps):
                raise AlignmentError(f"point series not aligned on satellite {sat!r}")
            stacks.append(tr.values)
            clouds.append(tr.cloud)
        med = np.median(np.stack(stacks, axis=0), axis=0)
        cloud = None
        if ref.cloud is not None:
            cloud = np.median(np.stack(clouds, axis=0), axis=0)
        out[sat] = SatTrack(ref.timestamps.copy(), med, cloud)
    return RsdSeries(tracks=out, location=first.location, satellites=first.satellites)


def compute_ndvi(obs: BandObservation, spec: SatelliteSpec = SENTINEL2) -> float:
    """(NIR - Red) / (NIR + Red) on bands B8/B4, clamped to [-1, 1].

    A zero denominator returns 0: a neutral value below the vegetation
    threshold rather than an error.
    """
    nir = obs.values[spec.band_index("B8")]
    red = obs.values[spec.band_index("B4")]
    denom = nir + red
    if denom == 0.0:
        return 0.0
    return float(np.clip((nir - red) / denom, -1.0, 1.0))


def ndvi_track(track: SatTrack, spec: SatelliteSpec = SENTINEL2) -> np.ndarray:
    """Vectorized NDVI over a Sentinel-2 track, clamped to [-1, 1]."""
    nir = track.values[:, spec.band_index("B8")]
    red = track.values[:, spec.band_index("B4")]
    denom = nir + red
    with np.errstate(divide="ignore", invalid="ignore"):
        ndvi = np.where(denom == 0.0, 0.0, (nir - red) / np.where(denom == 0.0, 1.0, denom))
    return np.clip(ndvi, -1.0, 1.0)


def pad_to_length(series: RsdSeries, length: int = PAD_LENGTH) -> PaddedSeries:
    """Left-pad a cadence-aligned series to a fixed step count.

    The final real observation lands at index length-1, keeping the labeled
    crop at the end of the series; earlier indices are zero-valued with a
    False mask.
    """
    values: dict[str, np.ndarray] = {}
    mask: dict[str, np.ndarray] = {}
    for sat, track in series.tracks.items():
        n = len(track)
        if n > length:
            raise LengthOverflow(f"satellite {sat!r}: {n} steps exceed pad length {length}")
        bands = track.values.shape[1]
        grid = np.zeros((length, bands), dtype=np.float64)
        m = np.zeros(length, dtype=bool)
        if n:
            grid[length - n:] = track.values
            m[length - n:] = True
        values[sat] = grid
        mask[sat] = m
    return PaddedSeries(values=values, mask=mask, length=length)


def zscore_normalize(series: PaddedSeries, stats: NormStats) -> PaddedSeries:
    """(v - mean) / max(std, 1e-6) on valid steps; padded steps stay 0."""
    out = series.copy()
    for sat, vals in out.values.items():
        if sat not in stats.mean or sat not in stats.std:
            raise StatsMismatch(f"no normalization stats for satellite {sat!r}")
        mean = stats.mean[sat]
        std = stats.std[sat]
        if mean.shape[0] != vals.shape[1] or std.shape[0] != vals.shape[1]:
            raise StatsMismatch(
                f"stats for satellite {sat!r} cover {mean.shape[0]} bands, series has {vals.shape[1]}"
            )
        m = out.mask[sat]
        vals[m] = (vals[m] - mean) / np.maximum(std, STD_EPS)
    return out


def zscore_denormalize(series: PaddedSeries, stats: NormStats) -> PaddedSeries:
    """Inverse of :func:`zscore_normalize` on valid steps."""
    out = series.copy()
    for sat, vals in out.values.items():
        mean = stats.mean[sat]
        std = stats.std[sat]
        m = out.mask[sat]
        vals[m] = vals[m] * np.maximum(std, STD_EPS) + mean
    return out


class StatsAccumulator:
    """Order-independent mean/variance accumulation via sum and sum-of-squares."""

    def __init__(self):
        self._sum: dict[str, np.ndarray] = {}
        self._sumsq: dict[str, np.ndarray] = {}
        self._count: dict[str, int] = {}

    def add(self, series: PaddedSeries) -> None:
        for sat, vals in series.values.items():
            valid = vals[series.mask[sat]]
            if sat not in self._sum:
                bands = vals.shape[1]
                self._sum[sat] = np.zeros(bands)
                self._sumsq[sat] = np.zeros(bands)
                self._count[sat] = 0
            self._sum[sat] += valid.sum(axis=0)
            self._sumsq[sat] += (valid ** 2).sum(axis=0)
            self._count[sat] += valid.shape[0]

    def finalize(self) -> NormStats:
        mean = {}
        std = {}
        for sat, total in self._sum.items():
            n = max(self._count[sat], 1)
            mu = total / n
            var = np.maximum(self._sumsq[sat] / n - mu ** 2, 0.0)
            mean[sat] = mu
            std[sat] = np.sqrt(var)
        return NormStats(mean=mean, std=std)
