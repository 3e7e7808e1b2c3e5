"""Zero-shot moment retrieval: windowed similarity between a text embedding
and temporal crops of a long motion, plus IoU-based accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import MotionFeatureSequence

PYRAMID_SIZES = tuple(range(10, 65, 5))
PYRAMID_STRIDE = 5


@dataclass(frozen=True)
class Segment:
    start: int    # inclusive
    end: int      # exclusive

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad segment [{self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class SimilarityCurve:
    values: np.ndarray
    window: int
    stride: int


def _encode_crops(model, motion: MotionFeatureSequence,
                  crops: list[tuple[int, int]],
                  chunk: int = 128) -> np.ndarray:
    """Mean embeddings of [start, end) crops, batched through the motion
    encoder."""
    out = []
    for i in range(0, len(crops), chunk):
        part = [MotionFeatureSequence(data=motion.data[s:e])
                for s, e in crops[i:i + chunk]]
        mu, _ = model.encode_motion_batch(part)
        out.append(mu.value)
    return np.concatenate(out)


def _cos(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    an = a / max(np.linalg.norm(a), 1e-12)
    bn = b / np.maximum(np.linalg.norm(b, axis=-1, keepdims=True), 1e-12)
    return bn @ an


def sliding_similarity(model, text_emb: np.ndarray,
                       motion: MotionFeatureSequence, window: int = 20,
                       stride: int = 1) -> SimilarityCurve:
    """Similarity of a window centered at each placement; windows near the
    edges are shifted inward to stay inside the sequence."""
    length = motion.frames
    if window > length:
        raise ValueError(f"window {window} exceeds motion length {length}")
    centers = range(0, length, stride)
    crops = []
    for c in centers:
        start = min(max(0, c - window // 2), length - window)
        crops.append((start, start + window))
    sims = _cos(text_emb, _encode_crops(model, motion, crops))
    return SimilarityCurve(values=np.clip(sims, -1.0, 1.0), window=window,
                          stride=stride)


def localize_pyramid(model, text_emb: np.ndarray,
                     motion: MotionFeatureSequence,
                     sizes=PYRAMID_SIZES,
                     stride: int = PYRAMID_STRIDE) -> tuple[Segment, float]:
    """Best crop over a pyramid of window sizes; deterministic tie-break by
    earliest start, then smallest window."""
    length = motion.frames
    crops = []
    for size in sizes:
        if size > length:
            continue
        for start in range(0, length - size + 1, stride):
            crops.append((start, start + size))
    if not crops:
        raise ValueError("motion shorter than the smallest window")
    sims = _cos(text_emb, _encode_crops(model, motion, crops))
    keys = [(-float(s), start, end - start)
            for s, (start, end) in zip(sims, crops)]
    best = min(range(len(crops)), key=lambda i: keys[i])
    s, e = crops[best]
    return Segment(s, e), float(sims[best])


def temporal_iou(a: Segment, b: Segment) -> float:
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = (a.length + b.length) - inter
    return inter / union if union else 0.0


def localization_accuracy(predictions: list[Segment],
                          ground_truths: list[Segment],
                          iou_threshold: float) -> float:
    """Percentage of predictions whose IoU with the ground truth reaches
    the threshold (IoU >= threshold; exact matches count at threshold 1)."""
    if len(predictions) != len(ground_truths):
        raise ValueError("mismatched prediction/ground-truth counts")
    hits = sum(1 for p, g in zip(predictions, ground_truths)
               if temporal_iou(p, g) >= iou_threshold)
    return 100.0 * hits / len(predictions)
