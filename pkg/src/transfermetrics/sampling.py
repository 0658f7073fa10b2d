"""Deterministic subsampling: per-pixel observations and class subsets.

Weighted sampling without replacement uses the exponential-keys order
statistic: draw key_i = Exp(1) / w_i per candidate and keep the k smallest
keys. Randomness comes from numpy's PCG64 generator seeded through
SeedSequence([seed, index]) so selections reproduce across runs and
parallel orderings; the per-image selection can be persisted as a PSEL
file and replayed so every metric sees the exact same observations.

PSEL layout (little-endian):
  magic "PSEL" | version u32=1 | image_id u64 | count u64 | count x u64
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError
from .formats import EmbeddingSet

log = logging.getLogger(__name__)

PSEL_MAGIC = b"PSEL"
_PSEL_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class PixelObservationSpec:
    pixels_per_image: int = 1000
    strategy: str = "class_balanced"
    seed: int = 0

    def __post_init__(self):
        if self.pixels_per_image < 1:
            raise ValueError("pixels_per_image must be >= 1")
        if self.strategy not in ("class_balanced", "uniform"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class ClassSubsetSpec:
    fraction_lo: float = 0.02
    fraction_hi: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.fraction_lo <= self.fraction_hi <= 1.0):
            raise ValueError(
                f"fraction range ({self.fraction_lo}, {self.fraction_hi}) must satisfy "
                "0 < lo <= hi <= 1"
            )


def derive_rng(seed: int, index: int) -> np.random.Generator:
    """Per-item generator; identical regardless of processing order."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _weighted_choice_no_replacement(
    rng: np.random.Generator, weights: np.ndarray, k: int
) -> np.ndarray:
    keys = rng.exponential(size=weights.shape[0]) / weights
    if k >= keys.shape[0]:
        return np.argsort(keys, kind="stable")
    idx = np.argpartition(keys, k)[:k]
    return idx[np.argsort(keys[idx], kind="stable")]


def select_pixels(
    label_map: np.ndarray, spec: PixelObservationSpec, image_index: int
) -> np.ndarray:
    """Choose flat pixel indices for one image; negatives mean unlabeled.

    Under class_balanced, per-pixel weight is 1/freq(label) with the label
    frequency computed within this image, so every present class has equal
    expected representation.
    """
    labels = np.asarray(label_map).ravel()
    labeled = np.flatnonzero(labels >= 0)
    if labeled.size == 0:
        raise ValidationError(f"image {image_index} has no labeled pixels")
    k = min(spec.pixels_per_image, labeled.size)
    rng = derive_rng(spec.seed, image_index)
    if spec.strategy == "uniform":
        weights = np.ones(labeled.size)
    else:
        vals, inverse, counts = np.unique(labels[labeled], return_inverse=True, return_counts=True)
        weights = 1.0 / counts[inverse]
    chosen = _weighted_choice_no_replacement(rng, weights, k)
    return labeled[chosen]


def save_selection(path, image_id: int, indices: np.ndarray) -> None:
    indices = np.ascontiguousarray(indices, dtype=np.uint64)
    with open(path, "wb") as f:
        f.write(_PSEL_HEADER.pack(PSEL_MAGIC, 1, image_id, indices.shape[0]))
        f.write(indices.astype("<u8").tobytes())


def load_selection(path) -> Tuple[int, np.ndarray]:
    path = Path(path)
    with open(path, "rb") as f:
        header = f.read(_PSEL_HEADER.size)
        if len(header) != _PSEL_HEADER.size:
            raise CorruptionError(f"{path}: truncated PSEL header")
        magic, version, image_id, count = _PSEL_HEADER.unpack(header)
        if magic != PSEL_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {PSEL_MAGIC!r}")
        if version != 1:
            raise FormatError(f"{path}: unsupported version {version}")
        payload = f.read()
    if len(payload) != 8 * count:
        raise CorruptionError(f"{path}: payload has {len(payload)} bytes, expected {8 * count}")
    return image_id, np.frombuffer(payload, dtype="<u8").astype(np.int64)


def sample_pixels(
    images: Sequence[Tuple[np.ndarray, np.ndarray]],
    spec: PixelObservationSpec,
    cache_dir: Optional[Path] = None,
    provenance: str = "pixel-observations",
) -> EmbeddingSet:
    """Build per-pixel observations from (label_map, features) image pairs.

    features is an H x W x D array aligned with the label map. When a
    cache_dir is given, per-image selections are persisted as PSEL files
    and replayed on later calls, guaranteeing identical observations for
    every metric. Images without labeled pixels are skipped with a warning.
    """
    feats_out: List[np.ndarray] = []
    labels_out: List[np.ndarray] = []
    for i, (label_map, features) in enumerate(images):
        label_map = np.asarray(label_map)
        features = np.asarray(features, dtype=np.float32)
        if features.shape[:2] != label_map.shape:
            raise ValidationError(
                f"image {i}: feature grid {features.shape[:2]} does not match "
                f"label map {label_map.shape}"
            )
        cache_path = Path(cache_dir) / f"image_{i:06d}.psel" if cache_dir else None
        if cache_path is not None and cache_path.exists():
            _, indices = load_selection(cache_path)
        else:
            try:
                indices = select_pixels(label_map, spec, i)
            except ValidationError:
                log.warning("image %d has no labeled pixels; skipped", i)
                continue
            if cache_path is not None:
                save_selection(cache_path, i, indices)
        flat_labels = label_map.ravel()[indices]
        flat_feats = features.reshape(-1, features.shape[-1])[indices]
        feats_out.append(flat_feats)
        labels_out.append(flat_labels.astype(np.int32))
    if not feats_out:
        raise ValidationError("no image contributed any labeled pixels")
    feats = np.concatenate(feats_out, axis=0)
    labels = np.concatenate(labels_out, axis=0)
    return EmbeddingSet(feats, labels, int(labels.max()) + 1, provenance)


def sample_class_subsets(
    emb: EmbeddingSet, spec: ClassSubsetSpec, count: int
) -> List[EmbeddingSet]:
    """Draw `count` class-subset datasets with densely relabeled classes.

    Each subset picks a class fraction uniformly in the configured range
    (at least 2 classes), keeps every row of the selected classes with
    feature bytes untouched, and relabels classes to [0, C').
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    present = emb.present_classes()
    if len(present) < 2:
        raise ValueError("class subsetting needs >= 2 classes")
    out = []
    for i in range(count):
        rng = derive_rng(spec.seed, i)
        frac = rng.uniform(spec.fraction_lo, spec.fraction_hi)
        k = max(2, int(round(frac * len(present))))
        k = min(k, len(present))
        chosen = np.sort(rng.choice(present, size=k, replace=False))
        mask = np.isin(emb.labels, chosen)
        remap = {int(c): j for j, c in enumerate(chosen)}
        new_labels = np.array([remap[int(c)] for c in emb.labels[mask]], dtype=np.int32)
        out.append(
            EmbeddingSet(emb.features[mask], new_labels, k, f"{emb.provenance}#subset{i}")
        )
    return out
