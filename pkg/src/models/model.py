import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .config import Algorithm, TrainConfig
from .dataset import FeatureScaler, TargetScaler


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """Trained weights plus everything needed to predict in raw units."""
    weights: np.ndarray
    algorithm: Algorithm
    config: TrainConfig
    scaler: Optional[TargetScaler] = None
    feature_scaler: Optional[FeatureScaler] = None
    trace: List[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return int(self.weights.shape[0] - 1)

    def to_document(self) -> dict:
        """Flat JSON-shaped document; round-trips predictions."""
        doc = {
            "algorithm": self.algorithm.value,
            "weights": self.weights.tolist(),
            "y_min": None,
            "y_max": None,
            "epsilon": self.config.epsilon,
            "feature_scaler": self.feature_scaler.to_document() if self.feature_scaler else None,
            "iterations": self.config.iterations,
            "config": self.config.to_document(),
            "trace": list(self.trace),
        }
        if self.scaler is not None:
            doc.update(self.scaler.to_document())
        return doc

    @classmethod
    def from_document(cls, doc: dict) -> "TrainedModel":
        scaler = None
        if doc.get("y_min") is not None:
            scaler = TargetScaler(
                y_min=float(doc["y_min"]),
                y_max=float(doc["y_max"]),
                epsilon=float(doc["epsilon"]),
                gamma=doc.get("gamma"),
            )
        feature_scaler = FeatureScaler.from_document(doc["feature_scaler"]) if doc.get("feature_scaler") else None
        config = TrainConfig.from_document(doc["config"]) if doc.get("config") else TrainConfig(
            algorithm=doc["algorithm"], iterations=int(doc["iterations"]), epsilon=float(doc["epsilon"])
        )
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            algorithm=Algorithm(doc["algorithm"]),
            config=config,
            scaler=scaler,
            feature_scaler=feature_scaler,
            trace=[float(v) for v in doc.get("trace", [])],
        )

    def save(self, file_path: str | Path) -> None:
        """Save the model document to a JSON file."""
        Path(file_path).write_text(json.dumps(self.to_document(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, file_path: str | Path) -> "TrainedModel":
        return cls.from_document(json.loads(Path(file_path).read_text(encoding="utf-8")))
