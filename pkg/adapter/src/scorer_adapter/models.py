"""Scoring backends.

* StubModel -- constant score, for protocol tests and dry runs.
* TransformersModel -- any audio-classification checkpoint with a
  two-or-more-logit head; logits are softmaxed and the fake-class
  probability returned. Checkpoints disagree on label order, so the fake
  class index is configurable; when unset, labels containing "fake" or
  "spoof" are matched, falling back to index 1.

Model specs: "stub:P" or "transformers:MODEL_ID" (a bare string is
treated as a transformers model id).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class ModelLoadError(Exception):
    pass


class StubModel:
    """Scores every window with a fixed value. Windows are still loaded
    from disk, mirroring a real deployment's I/O path."""

    needs_audio = True

    def __init__(self, value: float = 0.5):
        if not (0.0 <= value <= 1.0):
            raise ModelLoadError(f"stub score {value} outside [0, 1]")
        self.value = float(value)

    def score_batch(self, windows: Sequence[np.ndarray]) -> list[float]:
        return [self.value] * len(windows)


_FAKE_MARKERS = ("fake", "spoof")


def _guess_fake_index(id2label: dict) -> int:
    for index, label in sorted(id2label.items()):
        if any(marker in str(label).lower() for marker in _FAKE_MARKERS):
            return int(index)
    return 1


class TransformersModel:
    needs_audio = True

    def __init__(self, model, extractor, sample_rate: int = 16000, fake_class_index: int | None = None):
        import torch

        self._torch = torch
        self.model = model.eval()
        self.extractor = extractor
        self.sample_rate = sample_rate
        if fake_class_index is None:
            fake_class_index = _guess_fake_index(getattr(model.config, "id2label", {}) or {})
        self.fake_class_index = fake_class_index

    @classmethod
    def from_pretrained(
        cls,
        model_id: str,
        device: str = "cpu",
        sample_rate: int = 16000,
        fake_class_index: int | None = None,
    ) -> "TransformersModel":
        try:
            from transformers import AutoFeatureExtractor, AutoModelForAudioClassification
        except ImportError as exc:
            raise ModelLoadError(f"transformers backend unavailable: {exc}") from exc
        try:
            extractor = AutoFeatureExtractor.from_pretrained(model_id)
            model = AutoModelForAudioClassification.from_pretrained(model_id).to(device)
        except Exception as exc:
            raise ModelLoadError(f"cannot load model {model_id!r}: {exc}") from exc
        return cls(model, extractor, sample_rate, fake_class_index)

    def score_batch(self, windows: Sequence[np.ndarray]) -> list[float]:
        torch = self._torch
        features = self.extractor(
            [np.asarray(w, dtype=np.float32) for w in windows],
            sampling_rate=self.sample_rate,
            return_tensors="pt",
            padding=True,
        )
        with torch.no_grad():
            logits = self.model(**features).logits
        probs = torch.softmax(logits, dim=-1)
        index = min(self.fake_class_index, probs.shape[-1] - 1)
        return [float(p) for p in probs[:, index]]


def build_model(
    spec: str,
    device: str = "cpu",
    sample_rate: int = 16000,
    fake_class_index: int | None = None,
):
    if spec.startswith("stub"):
        parts = spec.split(":", 1)
        value = float(parts[1]) if len(parts) > 1 and parts[1] else 0.5
        return StubModel(value)
    if spec.startswith("transformers:"):
        spec = spec.split(":", 1)[1]
    return TransformersModel.from_pretrained(
        spec, device=device, sample_rate=sample_rate, fake_class_index=fake_class_index
    )
