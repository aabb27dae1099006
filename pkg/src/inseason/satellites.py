"""Satellite band configuration.

Band sets are configurable per satellite; the defaults cover NDVI (B8/B4)
on the optical side and the VV/VH radar pair. The cloud-quality channel
(cs_cdf) rides along as a separate per-observation score rather than a
band, since it gates season detection but is not a model input.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SatelliteSpec:
    name: str
    bands: tuple[str, ...]
    has_cloud_score: bool = False

    @property
    def band_count(self) -> int:
        return len(self.bands)

    def band_index(self, band: str) -> int:
        try:
            return self.bands.index(band)
        except ValueError:
            raise KeyError(f"satellite {self.name!r} has no band {band!r}") from None


SENTINEL2 = SatelliteSpec(name="S2", bands=("B2", "B3", "B4", "B8"), has_cloud_score=True)
SENTINEL1 = SatelliteSpec(name="S1", bands=("VV", "VH"), has_cloud_score=False)

DEFAULT_SATELLITES: tuple[SatelliteSpec, ...] = (SENTINEL2, SENTINEL1)


def satellite_by_name(name: str, satellites: tuple[SatelliteSpec, ...] = DEFAULT_SATELLITES) -> SatelliteSpec:
    for spec in satellites:
        if spec.name == name:
            return spec
    raise KeyError(f"unknown satellite {name!r}")
