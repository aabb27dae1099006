"""Crop vocabulary and the per-crop season-length sanity bounds.

The model vocabulary is the 12 major crops plus OTHERS (13 classes). Raw
ground-truth labels outside the 12 are grouped into OTHERS at load time.
"""

from __future__ import annotations

from .errors import UnknownCrop

WHEAT = "Wheat"
SUGARCANE = "Sugarcane"
SOYBEANS = "Soybeans"
MUSTARD = "Mustard"
CORN = "Corn"
RICE = "Rice"
COTTON = "Cotton"
GRAM = "Gram"
SORGHUM = "Sorghum"
GROUNDNUT = "Groundnut"
CHILLI = "Chilli"
BAJRA = "Bajra"
OTHERS = "Others"

# Class order is fixed; indices are the model's output channels.
CROP_CLASSES: tuple[str, ...] = (
    WHEAT,
    SUGARCANE,
    SOYBEANS,
    MUSTARD,
    CORN,
    RICE,
    COTTON,
    GRAM,
    SORGHUM,
    GROUNDNUT,
    CHILLI,
    BAJRA,
    OTHERS,
)

NUM_CLASSES = len(CROP_CLASSES)

CLASS_INDEX: dict[str, int] = {c: i for i, c in enumerate(CROP_CLASSES)}

# Upper bound on a plausible season length per crop, in days. A detected
# season longer than this usually means two seasons were merged into one.
MAX_SEASON_LENGTH_DAYS: dict[str, int] = {
    WHEAT: 240,
    SUGARCANE: 600,
    SOYBEANS: 150,
    MUSTARD: 150,
    CORN: 180,
    RICE: 200,
    COTTON: 300,
    GRAM: 180,
    SORGHUM: 180,
    GROUNDNUT: 180,
    CHILLI: 240,
    BAJRA: 150,
}


def group_label(raw_crop: str) -> str:
    """Map a raw crop name onto the 13-class vocabulary (unknown -> OTHERS)."""
    if raw_crop in CLASS_INDEX:
        return raw_crop
    return OTHERS


def class_index(crop: str) -> int:
    try:
        return CLASS_INDEX[crop]
    except KeyError:
        raise UnknownCrop(f"crop {crop!r} is not in the model vocabulary") from None


def max_season_length(crop: str) -> int:
    try:
        return MAX_SEASON_LENGTH_DAYS[crop]
    except KeyError:
        raise UnknownCrop(f"no season-length bound for crop {crop!r}") from None
