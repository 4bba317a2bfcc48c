"""Run images through a convolutional network and write fingerprint files.

Output is one SIRV record per readable input, in listing order, plus a JSONL
metadata sidecar. Extraction is deterministic for a fixed manifest: the model
weights come either from a state-dict file or from a seeded random
initialization, and preprocessing is fully specified by the manifest.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .manifest import ExtractionManifest, Preprocess
from .sirv import write_sirv

log = logging.getLogger("fpextract")


class ExtractionError(Exception):
    pass


def load_model(manifest: ExtractionManifest) -> torch.nn.Module:
    source, _, arch = manifest.model.partition(":")
    if source != "torchvision":
        raise ExtractionError(f"unknown model source {source!r}")
    import torchvision.models as tvm

    factory = getattr(tvm, arch, None)
    if factory is None:
        raise ExtractionError(f"unknown torchvision architecture {arch!r}")
    if manifest.weights.startswith("random:"):
        seed = int(manifest.weights.split(":", 1)[1])
        torch.manual_seed(seed)
        model = factory(weights=None)
    else:
        model = factory(weights=None)
        state = torch.load(manifest.weights, map_location="cpu")
        model.load_state_dict(state)
    model.eval()
    return model


def preprocess_image(path, spec: Preprocess) -> torch.Tensor:
    with Image.open(path) as img:
        img = img.convert("RGB")
        h, w = spec.resize
        img = img.resize((w, h), Image.BILINEAR)
        arr = np.asarray(img, dtype=np.float32) / 255.0
    if spec.channel_order == "BGR":
        arr = arr[:, :, ::-1]
    arr = (arr - np.asarray(spec.mean, dtype=np.float32)) / np.asarray(
        spec.std, dtype=np.float32
    )
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]


def _layer_output(model: torch.nn.Module, layer: str, batch: torch.Tensor) -> torch.Tensor:
    target = dict(model.named_modules()).get(layer)
    if target is None:
        raise ExtractionError(f"model has no layer named {layer!r}")
    captured: list[torch.Tensor] = []
    handle = target.register_forward_hook(lambda mod, inp, out: captured.append(out))
    try:
        with torch.no_grad():
            model(batch)
    finally:
        handle.remove()
    if not captured:
        raise ExtractionError(f"layer {layer!r} produced no output")
    return captured[0]


@dataclass
class ExtractionReport:
    written: int = 0
    skipped: list[str] = field(default_factory=list)
    vectors_path: str = ""
    meta_path: str = ""

    def to_json(self) -> dict:
        return {
            "written": self.written,
            "skipped": self.skipped,
            "vectors_path": self.vectors_path,
            "meta_path": self.meta_path,
        }


def extract(manifest: ExtractionManifest, out_dir) -> ExtractionReport:
    """Write vectors.sirv + meta.jsonl under out_dir; skips unreadable images."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = load_model(manifest)

    records: list[tuple[str, np.ndarray]] = []
    rows: list[dict] = []
    report = ExtractionReport()
    for item in manifest.inputs:
        try:
            batch = preprocess_image(item.path, manifest.preprocess)
        except (OSError, ValueError) as exc:
            log.warning("skipping %s: %s", item.path, exc)
            report.skipped.append(item.item_id)
            continue
        vec = _layer_output(model, manifest.layer, batch).flatten().numpy()
        if vec.shape != (manifest.dim,):
            raise ExtractionError(
                f"layer {manifest.layer!r} yields dim {vec.size}, manifest says {manifest.dim}"
            )
        records.append((item.item_id, vec.astype("<f4")))
        rows.append(
            {
                "id": item.item_id,
                "product_id": item.product_id,
                "title": item.title,
                "timestamp": item.timestamp,
            }
        )

    vectors_path = out / "vectors.sirv"
    meta_path = out / "meta.jsonl"
    write_sirv(vectors_path, manifest.dim, records)
    with open(meta_path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    report.written = len(records)
    report.vectors_path = str(vectors_path)
    report.meta_path = str(meta_path)
    return report
