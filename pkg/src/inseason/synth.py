"""Synthetic world generator: fields, crop calendars, phenology-shaped
observations, and survey labels with configurable noise.

Every downstream stage gets known-truth fixtures from here: season bounds
come from the generating calendar, drop accounting can be checked against
the injected label noise, and census totals aggregate straight from the
truth. Crop classes are separable through distinct NDVI peaks, radar
amplitudes, and season timing, while clouds corrupt only the optical
stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .crops import (
    BAJRA,
    CHILLI,
    CORN,
    COTTON,
    GRAM,
    GROUNDNUT,
    MUSTARD,
    OTHERS,
    RICE,
    SORGHUM,
    SOYBEANS,
    SUGARCANE,
    WHEAT,
    group_label,
)
from .datagen import FieldBoundary, GroundTruthLabel, sample_interior_points
from .errors import EmptyInterior
from .fileio import ObservationSet
from .geometry import METERS_PER_DEGREE, from_local_meters, polygon_area_m2
from .rsd import SatTrack
from .timeutil import day_from_iso
from .satellites import DEFAULT_SATELLITES


@dataclass(frozen=True)
class PhenologyTemplate:
    """Per-crop growth signature: NDVI peak, radar amplitudes, calendar."""

    peak_ndvi: float
    vv_amp: float
    vh_amp: float
    length_range: tuple[int, int]
    seasons: tuple[str, ...]  # where the crop can be sown: "monsoon", "winter"


# Peaks, radar amplitudes, and lengths are spaced so the 13 classes are
# separable but overlapping enough that timing carries signal. Length
# ranges stay inside the per-crop maximum-season-length bounds.
TEMPLATES: dict[str, PhenologyTemplate] = {
    WHEAT: PhenologyTemplate(0.88, 0.30, 0.10, (100, 140), ("winter",)),
    SUGARCANE: PhenologyTemplate(0.82, 0.55, 0.30, (280, 380), ("monsoon",)),
    SOYBEANS: PhenologyTemplate(0.78, 0.20, 0.16, (90, 120), ("monsoon",)),
    MUSTARD: PhenologyTemplate(0.72, 0.36, 0.06, (100, 130), ("winter",)),
    CORN: PhenologyTemplate(0.84, 0.44, 0.22, (100, 150), ("monsoon", "winter")),
    RICE: PhenologyTemplate(0.80, 0.12, 0.28, (100, 135), ("monsoon", "winter")),
    COTTON: PhenologyTemplate(0.74, 0.50, 0.14, (150, 210), ("monsoon",)),
    GRAM: PhenologyTemplate(0.66, 0.26, 0.20, (95, 125), ("winter",)),
    SORGHUM: PhenologyTemplate(0.70, 0.40, 0.33, (95, 140), ("monsoon", "winter")),
    GROUNDNUT: PhenologyTemplate(0.76, 0.16, 0.08, (95, 130), ("monsoon",)),
    CHILLI: PhenologyTemplate(0.64, 0.33, 0.26, (120, 170), ("winter",)),
    BAJRA: PhenologyTemplate(0.68, 0.08, 0.05, (85, 115), ("monsoon",)),
    OTHERS: PhenologyTemplate(0.60, 0.60, 0.40, (80, 110), ("monsoon", "winter")),
}

# Raw survey names for the OTHERS bucket, exercising the label grouping.
OTHERS_RAW_NAMES = ("Onion", "Potato", "Barley")

# Long-tailed mix shaped like the survey label distribution.
DEFAULT_CROP_MIX: dict[str, float] = {
    WHEAT: 0.202,
    SUGARCANE: 0.135,
    SOYBEANS: 0.100,
    MUSTARD: 0.095,
    CORN: 0.079,
    RICE: 0.070,
    COTTON: 0.063,
    GRAM: 0.060,
    SORGHUM: 0.052,
    GROUNDNUT: 0.036,
    CHILLI: 0.029,
    BAJRA: 0.025,
    OTHERS: 0.055,
}

BARE_NDVI = 0.15
BARE_VV = 0.08
BARE_VH = 0.03
OPTICAL_SCALE = 0.28  # B8 = s(1+v), B4 = s(1-v) so NDVI is exactly v
RAMP_OFFSET_DAYS = 3.0
RAMP_STEEPNESS_DAYS = 6.0

PLOT_PITCH_M = 400.0
SEASON_GAP_DAYS = 60
CLEAN_LABEL_MARGIN_DAYS = 15
OFF_SEASON_LEAD_DAYS = 60


@dataclass
class SynthWorldConfig:
    seed: int = 0
    num_fields: int = 200
    origin: tuple[float, float] = (20.0, 75.0)
    extent_deg: float = 3.0
    regions_per_axis: int = 2
    crop_mix: dict[str, float] = dc_field(default_factory=lambda: dict(DEFAULT_CROP_MIX))
    templates: dict[str, PhenologyTemplate] = dc_field(default_factory=lambda: dict(TEMPLATES))
    cloud_prob: float = 0.08
    noise_std: float = 0.01
    label_off_field: float = 0.0
    label_off_season: float = 0.0
    points_per_field: int = 2
    obs_start: str = "2022-06-01"
    obs_end: str = "2024-06-01"
    double_season_prob: float = 0.45
    monsoon_only_prob: float = 0.30

    def __post_init__(self):
        for name, p in (
            ("cloud_prob", self.cloud_prob),
            ("label_off_field", self.label_off_field),
            ("label_off_season", self.label_off_season),
        ):
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name}={p} must be in [0, 1]")
        if self.label_off_field + self.label_off_season > 1.0:
            raise ValueError("label noise fractions sum past 1")


@dataclass
class SeasonTruth:
    crop_raw: str  # survey name (possibly outside the 12-crop vocabulary)
    sow: int
    harvest: int

    @property
    def crop(self) -> str:
        return group_label(self.crop_raw)


@dataclass
class LabelProvenance:
    field_id: str
    season_index: int
    noise: str  # "clean" | "off_field" | "off_season"


@dataclass
class SynthTruth:
    seasons: dict[str, list[SeasonTruth]]
    label_provenance: dict[str, LabelProvenance] = dc_field(default_factory=dict)
    plot_anchor: dict[str, tuple[float, float]] = dc_field(default_factory=dict)


def _season_year(config: SynthWorldConfig) -> int:
    # crops are sown in the agricultural year starting one year into the
    # observation window, so every sample has a trailing year of signal
    import datetime as dt

    start = dt.date.fromisoformat(config.obs_start)
    return start.year + 1


def _pick(rng: np.random.Generator, weights: dict[str, float]) -> str:
    names = sorted(weights.keys())
    w = np.array([weights[n] for n in names], dtype=np.float64)
    w = w / w.sum()
    return names[int(rng.choice(len(names), p=w))]


def _slot_mix(config: SynthWorldConfig, slot: str, exclude: set[str] = frozenset()) -> dict[str, float]:
    mix = {
        crop: p
        for crop, p in config.crop_mix.items()
        if slot in config.templates[crop].seasons and crop not in exclude and p > 0
    }
    if not mix:
        raise ValueError(f"crop mix has no {slot}-capable crops")
    return mix


def generate_world(config: SynthWorldConfig) -> tuple[list[FieldBoundary], SynthTruth]:
    """Lay fields out on a sparse plot lattice and draw their crop calendars."""
    rng = np.random.default_rng([config.seed, 0])
    lat0, lng0 = config.origin
    pitch_lat = PLOT_PITCH_M / METERS_PER_DEGREE
    pitch_lng = PLOT_PITCH_M / (METERS_PER_DEGREE * math.cos(math.radians(lat0)))
    sites_per_axis = int(config.extent_deg / pitch_lat)
    total_sites = sites_per_axis * sites_per_axis
    if config.num_fields > total_sites:
        raise ValueError(f"{config.num_fields} fields exceed {total_sites} plot sites")
    chosen = np.sort(rng.choice(total_sites, size=config.num_fields, replace=False))

    year = _season_year(config)
    obs_end = day_from_iso(config.obs_end)
    monsoon_lo = day_from_iso(f"{year}-06-01")
    winter_lo = day_from_iso(f"{year}-11-01")

    fields: list[FieldBoundary] = []
    truth = SynthTruth(seasons={})
    for order, site in enumerate(chosen):
        fid = f"f{order:06d}"
        frng = np.random.default_rng([config.seed, 1, int(site)])
        row, col = divmod(int(site), sites_per_axis)
        center_lat = lat0 + (row + 0.5) * pitch_lat
        center_lng = lng0 + (col + 0.5) * pitch_lng

        area_m2 = math.exp(frng.uniform(math.log(2000.0), math.log(45000.0)))
        aspect = frng.uniform(0.7, 1.4)
        w = math.sqrt(area_m2 * aspect)
        h = area_m2 / w
        corners = np.array(
            [[-w / 2, -h / 2], [w / 2, -h / 2], [w / 2, h / 2], [-w / 2, h / 2]]
        )
        corners = corners + frng.uniform(-5.0, 5.0, size=corners.shape)
        polygon = from_local_meters(corners, (center_lat, center_lng))
        region_rows = config.extent_deg / config.regions_per_axis
        rx = min(int((center_lat - lat0) / region_rows), config.regions_per_axis - 1)
        ry = min(int((center_lng - lng0) / region_rows), config.regions_per_axis - 1)
        fb = FieldBoundary(
            field_id=fid,
            polygon=polygon,
            area_ha=polygon_area_m2(corners) / 10000.0,
            region=f"ST-{rx}{ry}",
        )
        fields.append(fb)
        truth.plot_anchor[fid] = (center_lat, center_lng)

        u = frng.random()
        seasons: list[SeasonTruth] = []
        if u < config.double_season_prob:
            harvest_cap = day_from_iso(f"{year}-10-21")
            mix = _slot_mix(config, "monsoon", exclude={SUGARCANE, COTTON})
            crop = _pick(frng, mix)
            sow = monsoon_lo + int(frng.integers(0, 20))
            lo, hi = config.templates[crop].length_range
            length = int(frng.integers(lo, min(hi, harvest_cap - sow) + 1))
            seasons.append(SeasonTruth(_raw_name(crop, frng), sow, sow + length))
            wsow = max(winter_lo + int(frng.integers(0, 40)), sow + length + SEASON_GAP_DAYS)
            wmix = _slot_mix(config, "winter")
            wcrop = _pick(frng, wmix)
            wlo, whi = config.templates[wcrop].length_range
            wcap = obs_end - 45 - wsow
            wlength = int(frng.integers(wlo, max(wlo, min(whi, wcap)) + 1))
            seasons.append(SeasonTruth(_raw_name(wcrop, frng), wsow, wsow + wlength))
        elif u < config.double_season_prob + config.monsoon_only_prob:
            mix = _slot_mix(config, "monsoon")
            crop = _pick(frng, mix)
            sow = monsoon_lo + int(frng.integers(0, 40))
            lo, hi = config.templates[crop].length_range
            cap = obs_end - 45 - sow
            length = int(frng.integers(lo, max(lo, min(hi, cap)) + 1))
            seasons.append(SeasonTruth(_raw_name(crop, frng), sow, sow + length))
        else:
            mix = _slot_mix(config, "winter")
            crop = _pick(frng, mix)
            sow = winter_lo + int(frng.integers(0, 40))
            lo, hi = config.templates[crop].length_range
            cap = obs_end - 45 - sow
            length = int(frng.integers(lo, max(lo, min(hi, cap)) + 1))
            seasons.append(SeasonTruth(_raw_name(crop, frng), sow, sow + length))
        truth.seasons[fid] = seasons
    return fields, truth


def _raw_name(crop: str, rng: np.random.Generator) -> str:
    if crop == OTHERS:
        return OTHERS_RAW_NAMES[int(rng.integers(0, len(OTHERS_RAW_NAMES)))]
    return crop


def growth_curve(days: np.ndarray, sow: int, harvest: int) -> np.ndarray:
    """Double-logistic hump: ~0 outside (sow, harvest), ~1 mid-season."""
    rise = 1.0 / (1.0 + np.exp(-(days - sow - RAMP_OFFSET_DAYS) / RAMP_STEEPNESS_DAYS))
    fall = 1.0 / (1.0 + np.exp(-(harvest - RAMP_OFFSET_DAYS - days) / RAMP_STEEPNESS_DAYS))
    return rise * fall


def generate_observations(
    fields: list[FieldBoundary], truth: SynthTruth, config: SynthWorldConfig
) -> ObservationSet:
    """Emit per-interior-point Sentinel-2 (5-day) and Sentinel-1 (6-day) tracks."""
    start = day_from_iso(config.obs_start)
    end = day_from_iso(config.obs_end)
    obs = ObservationSet(satellites=DEFAULT_SATELLITES)
    for order, fb in enumerate(fields):
        frng = np.random.default_rng([config.seed, 2, order])
        try:
            interior = sample_interior_points(fb)
        except EmptyInterior:
            continue
        points = interior[: max(1, config.points_per_field)]

        s2_days = np.arange(start + order % 5, end + 1, 5, dtype=np.int64)
        s1_days = np.arange(start + order % 6, end + 1, 6, dtype=np.int64)
        s1_days = s1_days + frng.integers(-1, 2, size=s1_days.shape)

        g2 = np.zeros(s2_days.shape, dtype=np.float64)
        g1 = np.zeros(s1_days.shape, dtype=np.float64)
        peak = np.zeros(s2_days.shape, dtype=np.float64)
        vv = np.full(s1_days.shape, BARE_VV)
        vh = np.full(s1_days.shape, BARE_VH)
        crop_code2 = np.zeros(s2_days.shape, dtype=np.float64)
        for st in truth.seasons[fb.field_id]:
            tpl = config.templates[st.crop]
            hump2 = growth_curve(s2_days.astype(np.float64), st.sow, st.harvest)
            hump1 = growth_curve(s1_days.astype(np.float64), st.sow, st.harvest)
            g2 = np.maximum(g2, hump2)
            g1 = np.maximum(g1, hump1)
            peak = np.where(hump2 > 0.01, tpl.peak_ndvi, peak)
            crop_code2 = np.where(hump2 > 0.01, _crop_code(st.crop), crop_code2)
            vv = vv + tpl.vv_amp * hump1
            vh = vh + tpl.vh_amp * hump1

        ndvi = BARE_NDVI + np.maximum(peak - BARE_NDVI, 0.0) * g2
        cloudy = frng.random(s2_days.shape) < config.cloud_prob
        cs = np.where(cloudy, frng.uniform(0.05, 0.55, s2_days.shape), frng.uniform(0.65, 1.0, s2_days.shape))

        streams = []
        for _ in points:
            b8 = OPTICAL_SCALE * (1.0 + ndvi)
            b4 = OPTICAL_SCALE * (1.0 - ndvi)
            b2 = 0.06 + 0.10 * g2 * crop_code2
            b3 = 0.08 + 0.12 * g2 * (1.0 - crop_code2)
            s2_vals = np.stack([b2, b3, b4, b8], axis=1)
            if cloudy.any():
                haze = frng.uniform(0.3, 0.5, size=(int(cloudy.sum()), 1))
                s2_vals[cloudy] = s2_vals[cloudy] * 0.25 + haze
            s2_vals = s2_vals + frng.normal(0.0, config.noise_std, s2_vals.shape)
            s1_vals = np.stack([vv, vh], axis=1) + frng.normal(0.0, config.noise_std, (s1_days.size, 2))
            streams.append(
                {
                    "S2": SatTrack(s2_days.copy(), s2_vals, cs.copy()),
                    "S1": SatTrack(s1_days.copy(), s1_vals, None),
                }
            )
        obs.streams[fb.field_id] = streams
    return obs


def _crop_code(crop: str) -> float:
    order = sorted(TEMPLATES.keys())
    return order.index(crop) / max(1, len(order) - 1)


def generate_labels(
    fields: list[FieldBoundary], truth: SynthTruth, config: SynthWorldConfig
) -> list[GroundTruthLabel]:
    """One survey label per (field, season), with configured noise injection.

    Off-field labels move to the empty margin of the field's plot; off-season
    labels are timestamped well before the field's first sowing. Provenance
    tags land in truth.label_provenance for drop-accounting tests.
    """
    labels: list[GroundTruthLabel] = []
    for order, fb in enumerate(fields):
        frng = np.random.default_rng([config.seed, 3, order])
        seasons = truth.seasons[fb.field_id]
        first_sow = min(st.sow for st in seasons)
        center = truth.plot_anchor[fb.field_id]
        for s_idx, st in enumerate(seasons):
            label_id = f"{fb.field_id}-s{s_idx}"
            lo = st.sow + CLEAN_LABEL_MARGIN_DAYS
            hi = st.harvest - CLEAN_LABEL_MARGIN_DAYS
            timestamp = int(frng.integers(lo, max(lo, hi) + 1))
            jitter = frng.uniform(-5.0, 5.0, size=(1, 2))
            lat, lng = from_local_meters(jitter, (fb.centroid[0], fb.centroid[1]))[0]
            u = frng.random()
            if u < config.label_off_field:
                noise = "off_field"
                corner = np.array([[PLOT_PITCH_M / 2 - 20.0, PLOT_PITCH_M / 2 - 20.0]])
                lat, lng = from_local_meters(corner, center)[0]
            elif u < config.label_off_field + config.label_off_season:
                noise = "off_season"
                timestamp = first_sow - OFF_SEASON_LEAD_DAYS
            else:
                noise = "clean"
            labels.append(
                GroundTruthLabel(
                    label_id=label_id, crop=st.crop_raw, lat=lat, lng=lng, timestamp=timestamp
                )
            )
            truth.label_provenance[label_id] = LabelProvenance(fb.field_id, s_idx, noise)
    return labels


def census_from_truth(
    fields: list[FieldBoundary],
    truth: SynthTruth,
    season_rule: str = "may-oct",
) -> list[tuple[str, str, str, float]]:
    """Aggregate the true calendars into census rows (region, season, crop, kha)."""
    from .census import assign_agricultural_season

    sums: dict[tuple[str, str, str], float] = {}
    for fb in fields:
        for st in truth.seasons[fb.field_id]:
            season = assign_agricultural_season(st.sow, season_rule)
            if season == "Unassigned":
                continue
            key = (fb.region, season, st.crop)
            sums[key] = sums.get(key, 0.0) + fb.area_ha
    return [
        (region, season, crop, area / 1000.0)
        for (region, season, crop), area in sorted(sums.items())
    ]
