"""Extraction manifest: model + layer + preprocessing + input listing.

The manifest records everything needed to reproduce an extraction run:
which network and layer produce the fingerprint, how pixels are prepared,
the expected output dimension, and the (path, id, metadata) listing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Preprocess:
    resize: tuple[int, int] = (224, 224)  # (height, width)
    channel_order: str = "RGB"
    mean: tuple[float, float, float] = (0.485, 0.456, 0.406)
    std: tuple[float, float, float] = (0.229, 0.224, 0.225)

    def __post_init__(self):
        if len(self.resize) != 2 or min(self.resize) <= 0:
            raise ValueError("resize must be a positive (height, width) pair")
        if self.channel_order not in ("RGB", "BGR"):
            raise ValueError("channel_order must be RGB or BGR")
        if any(s <= 0 for s in self.std):
            raise ValueError("std entries must be positive")

    def to_json(self) -> dict:
        return {
            "resize": list(self.resize),
            "channel_order": self.channel_order,
            "mean": list(self.mean),
            "std": list(self.std),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Preprocess":
        return cls(
            resize=tuple(obj.get("resize", (224, 224))),
            channel_order=obj.get("channel_order", "RGB"),
            mean=tuple(obj.get("mean", (0.485, 0.456, 0.406))),
            std=tuple(obj.get("std", (0.229, 0.224, 0.225))),
        )


@dataclass(frozen=True)
class InputImage:
    path: str
    item_id: str
    product_id: str
    title: str
    timestamp: str  # ISO-8601

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "id": self.item_id,
            "product_id": self.product_id,
            "title": self.title,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "InputImage":
        return cls(
            path=str(obj["path"]),
            item_id=str(obj["id"]),
            product_id=str(obj.get("product_id", "")),
            title=str(obj.get("title", "")),
            timestamp=str(obj["timestamp"]),
        )


@dataclass(frozen=True)
class ExtractionManifest:
    model: str  # e.g. "torchvision:resnet18"
    layer: str  # named module whose output is the fingerprint, e.g. "avgpool"
    dim: int
    weights: str = "random:0"  # "random:<seed>" or a path to a state dict
    preprocess: Preprocess = field(default_factory=Preprocess)
    inputs: tuple[InputImage, ...] = ()

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if ":" not in self.model:
            raise ValueError("model must look like 'torchvision:<arch>'")
        if not self.layer:
            raise ValueError("layer name must be non-empty")
        ids = [i.item_id for i in self.inputs]
        if len(ids) != len(set(ids)):
            raise ValueError("input ids must be unique")

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "layer": self.layer,
            "dim": self.dim,
            "weights": self.weights,
            "preprocess": self.preprocess.to_json(),
            "inputs": [i.to_json() for i in self.inputs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExtractionManifest":
        return cls(
            model=str(obj["model"]),
            layer=str(obj["layer"]),
            dim=int(obj["dim"]),
            weights=str(obj.get("weights", "random:0")),
            preprocess=Preprocess.from_json(obj.get("preprocess", {})),
            inputs=tuple(InputImage.from_json(i) for i in obj.get("inputs", ())),
        )

    @classmethod
    def load(cls, path) -> "ExtractionManifest":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(json.load(f))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=2)
