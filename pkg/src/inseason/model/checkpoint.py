"""Self-contained model checkpoints.

A checkpoint carries the config, every parameter, the normalization stats
its inputs were standardized with, the training step, and the selection
score. The container is JSON with base64 float64 blobs: lossless,
versioned, and byte-deterministic for identical contents.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..rsd import NormStats
from .network import CropModel, ModelConfig

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, np.ndarray]
    norm_stats: NormStats | None
    step: int
    selection_score: float

    @classmethod
    def from_model(
        cls,
        model: CropModel,
        norm_stats: NormStats | None,
        step: int,
        selection_score: float,
    ) -> "Checkpoint":
        params = {k: v.data.copy() for k, v in model.params().items()}
        return cls(model.config, params, norm_stats, step, selection_score)

    def build_model(self) -> CropModel:
        model = CropModel(self.config)
        model.load_params(self.params)
        return model

    def save(self, path: str) -> None:
        blob = {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_json(),
            "step": self.step,
            "selection_score": self.selection_score,
            "norm_stats": None if self.norm_stats is None else self.norm_stats.to_json(),
            "params": {
                name: {
                    "shape": list(arr.shape),
                    "data": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
                }
                for name, arr in self.params.items()
            },
        }
        with open(path, "w") as f:
            json.dump(blob, f, sort_keys=True, separators=(",", ":"))
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "Checkpoint":
        with open(path) as f:
            blob = json.load(f)
        if blob.get("format_version") != FORMAT_VERSION:
            raise ConfigError(f"unsupported checkpoint format {blob.get('format_version')!r}")
        params = {}
        for name, entry in blob["params"].items():
            arr = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8")
            params[name] = arr.reshape(entry["shape"]).copy()
        stats = None if blob["norm_stats"] is None else NormStats.from_json(blob["norm_stats"])
        return cls(
            config=ModelConfig.from_json(blob["config"]),
            params=params,
            norm_stats=stats,
            step=int(blob["step"]),
            selection_score=float(blob["selection_score"]),
        )
