"""In-season crop identification from dual-satellite time series.

Stages: synthetic-world generation, NDVI crop-season detection, training
data generation with spatial splits, masked-autoencoder pre-training and
focal-loss fine-tuning of a fusion transformer, in-season evaluation, and
census-style area aggregation.
"""

__version__ = "0.1.0"

from .crops import CROP_CLASSES, NUM_CLASSES
from .rsd import BandObservation, NormStats, PaddedSeries, RsdSeries
from .seasons import CropSeason, detect_seasons

__all__ = [
    "BandObservation",
    "CROP_CLASSES",
    "CropSeason",
    "NUM_CLASSES",
    "NormStats",
    "PaddedSeries",
    "RsdSeries",
    "detect_seasons",
]
