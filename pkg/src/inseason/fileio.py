"""File formats for the pipeline stages.

Everything is plain JSON/JSONL/CSV so intermediate artifacts stay
inspectable. Writers are deterministic (sorted keys, fixed float
formatting) so identical inputs reproduce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError
from .rsd import RsdSeries, SatTrack
from .satellites import DEFAULT_SATELLITES, SatelliteSpec, satellite_by_name
from .timeutil import day_from_iso, iso_from_day


def _round(values, places: int = 5):
    return [round(float(v), places) for v in values]


def dumps_record(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class ObservationSet:
    """All observations of a world, grouped by field and interior point.

    streams[field_id] is a list of point streams; each point stream maps a
    satellite id to a :class:`SatTrack`.
    """

    streams: dict[str, list[dict[str, SatTrack]]] = field(default_factory=dict)
    satellites: tuple[SatelliteSpec, ...] = DEFAULT_SATELLITES

    def field_ids(self) -> list[str]:
        return sorted(self.streams.keys())

    def point_series(self, field_id: str) -> list[RsdSeries]:
        return [
            RsdSeries(tracks=stream, satellites=self.satellites)
            for stream in self.streams[field_id]
        ]

    def truncate_before(self, day: int) -> "ObservationSet":
        """Copy containing only observations strictly before the given day."""
        out: dict[str, list[dict[str, SatTrack]]] = {}
        for fid, points in self.streams.items():
            new_points = []
            for stream in points:
                new_stream = {}
                for sat, track in stream.items():
                    keep = track.timestamps < day
                    new_stream[sat] = SatTrack(
                        track.timestamps[keep],
                        track.values[keep],
                        None if track.cloud is None else track.cloud[keep],
                    )
                new_points.append(new_stream)
            out[fid] = new_points
        return ObservationSet(streams=out, satellites=self.satellites)


def write_observations(path: str, obs: ObservationSet) -> None:
    with open(path, "w") as f:
        for fid in obs.field_ids():
            for point_idx, stream in enumerate(obs.streams[fid]):
                for sat in sorted(stream.keys()):
                    track = stream[sat]
                    for i in range(len(track)):
                        rec = {
                            "field_id": fid,
                            "point": point_idx,
                            "satellite": sat,
                            "date": iso_from_day(int(track.timestamps[i])),
                            "values": _round(track.values[i]),
                        }
                        if track.cloud is not None:
                            rec["cloud_score"] = round(float(track.cloud[i]), 5)
                        f.write(dumps_record(rec) + "\n")


def read_observations(path: str, satellites: tuple[SatelliteSpec, ...] = DEFAULT_SATELLITES) -> ObservationSet:
    buckets: dict[tuple[str, int, str], list[tuple[int, list[float], float | None]]] = {}
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            key = (rec["field_id"], int(rec.get("point", 0)), rec["satellite"])
            buckets.setdefault(key, []).append(
                (day_from_iso(rec["date"]), rec["values"], rec.get("cloud_score"))
            )
    obs = ObservationSet(satellites=satellites)
    for (fid, point_idx, sat) in sorted(buckets.keys()):
        rows = sorted(buckets[(fid, point_idx, sat)], key=lambda r: r[0])
        ts = np.array([r[0] for r in rows], dtype=np.int64)
        if np.unique(ts).size != ts.size:
            raise AlignmentError(f"duplicate timestamp for field {fid} point {point_idx} sat {sat}")
        spec = satellite_by_name(sat, satellites)
        vals = np.array([r[1] for r in rows], dtype=np.float64)
        if vals.shape[1] != spec.band_count:
            raise AlignmentError(
                f"field {fid} sat {sat}: {vals.shape[1]} bands, expected {spec.band_count}"
            )
        cloud = None
        if spec.has_cloud_score:
            cloud = np.array(
                [1.0 if r[2] is None else float(r[2]) for r in rows], dtype=np.float64
            )
        points = obs.streams.setdefault(fid, [])
        while len(points) <= point_idx:
            points.append({})
        points[point_idx][sat] = SatTrack(ts, vals, cloud)
    return obs


def write_fields(path: str, fields: list) -> None:
    payload = [
        {
            "field_id": fb.field_id,
            "polygon": [[round(lat, 7), round(lng, 7)] for lat, lng in fb.polygon],
            "area_ha": round(fb.area_ha, 5),
            "region": fb.region,
        }
        for fb in fields
    ]
    with open(path, "w") as f:
        json.dump(payload, f, sort_keys=True, indent=1)
        f.write("\n")


def read_fields(path: str) -> list:
    from .datagen import FieldBoundary

    with open(path) as f:
        payload = json.load(f)
    return [
        FieldBoundary(
            field_id=rec["field_id"],
            polygon=[(float(a), float(b)) for a, b in rec["polygon"]],
            area_ha=float(rec["area_ha"]),
            region=rec["region"],
        )
        for rec in payload
    ]


def write_labels(path: str, labels: list) -> None:
    with open(path, "w") as f:
        for lb in labels:
            f.write(
                dumps_record(
                    {
                        "label_id": lb.label_id,
                        "crop": lb.crop,
                        "lat": round(lb.lat, 7),
                        "lng": round(lb.lng, 7),
                        "date": iso_from_day(lb.timestamp),
                    }
                )
                + "\n"
            )


def read_labels(path: str) -> list:
    from .datagen import GroundTruthLabel

    out = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                GroundTruthLabel(
                    label_id=rec["label_id"],
                    crop=rec["crop"],
                    lat=float(rec["lat"]),
                    lng=float(rec["lng"]),
                    timestamp=day_from_iso(rec["date"]),
                )
            )
    return out


def write_seasons(path: str, seasons_by_field: dict) -> None:
    with open(path, "w") as f:
        for fid in sorted(seasons_by_field.keys()):
            for idx, season in enumerate(seasons_by_field[fid]):
                f.write(
                    dumps_record(
                        {
                            "field_id": fid,
                            "season_index": idx,
                            "start_date": iso_from_day(season.start),
                            "end_date": iso_from_day(season.end),
                        }
                    )
                    + "\n"
                )


def write_examples(path: str, examples: list) -> None:
    with open(path, "w") as f:
        for ex in examples:
            series = {
                sat: {
                    "values": [_round(row) for row in ex.series.values[sat]],
                    "mask": [int(v) for v in ex.series.mask[sat]],
                }
                for sat in sorted(ex.series.values.keys())
            }
            f.write(
                dumps_record(
                    {
                        "label": ex.label,
                        "field_id": ex.field_id,
                        "t_end": iso_from_day(ex.t_end),
                        "season": [iso_from_day(ex.season.start), iso_from_day(ex.season.end)],
                        "cell_id": ex.cell_id,
                        "days_after_start": ex.days_after_start,
                        "series": series,
                    }
                )
                + "\n"
            )


def read_examples(path: str) -> list:
    from .datagen import InSeasonExample
    from .rsd import PaddedSeries
    from .seasons import CropSeason

    out = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            values = {}
            mask = {}
            length = None
            for sat, blob in rec["series"].items():
                values[sat] = np.asarray(blob["values"], dtype=np.float64)
                mask[sat] = np.asarray(blob["mask"], dtype=bool)
                length = values[sat].shape[0]
            out.append(
                InSeasonExample(
                    label=rec["label"],
                    field_id=rec["field_id"],
                    t_end=day_from_iso(rec["t_end"]),
                    season=CropSeason(day_from_iso(rec["season"][0]), day_from_iso(rec["season"][1])),
                    series=PaddedSeries(values=values, mask=mask, length=length),
                    cell_id=rec["cell_id"],
                    days_after_start=int(rec["days_after_start"]),
                )
            )
    return out


def write_census(path: str, rows: list[tuple[str, str, str, float]]) -> None:
    """rows: (region, season, crop, area_kha)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["region", "season", "crop", "area_kha"])
        for region, season, crop, area_kha in rows:
            w.writerow([region, season, crop, f"{area_kha:.6f}"])


def read_census(path: str) -> list[dict]:
    out = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            out.append(
                {
                    "region": rec["region"],
                    "season": rec["season"],
                    "crop": rec["crop"],
                    "area_ha": float(rec["area_kha"]) * 1000.0,
                }
            )
    return out


def write_json(path: str, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, sort_keys=True, indent=1)
        f.write("\n")


def read_json(path: str):
    with open(path) as f:
        return json.load(f)


def write_csv_table(path: str, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    with open(path, "w", newline="") as f:
        f.write(buf.getvalue())


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
