"""Bit-exact file I/O for embeddings, labels, predictions, and manifests.

Binary layouts (all little-endian):

  EMBD: magic "EMBD" | version u32=1 | n u64 | D u64 | dtype u8=0 (f32)
        | payload n*D f32, row-major
  LBLS: magic "LBLS" | version u32=1 | n u64 | payload n i32
  PRED: magic "PRED" | version u32=1 | n u64 | Z u64 | payload n*Z f32

Labels live in a separate LBLS file next to the EMBD file (same stem,
".lbls" suffix) unless an explicit path is given. CSV is accepted as a
convenience *input* only: one row per sample, feature values followed by a
final "label=<int>" field.

Manifests are JSON documents listing scenario entries and the metric
configuration; see ``load_manifest``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import MetricConfig
from .errors import CorruptionError, FormatError, ValidationError

EMBD_MAGIC = b"EMBD"
LBLS_MAGIC = b"LBLS"
PRED_MAGIC = b"PRED"
FORMAT_VERSION = 1

_EMBD_HEADER = struct.Struct("<4sIQQB")
_LBLS_HEADER = struct.Struct("<4sIQ")
_PRED_HEADER = struct.Struct("<4sIQQ")


@dataclass(frozen=True)
class EmbeddingSet:
    """An n x D float32 feature matrix with per-row integer labels."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    provenance: str = ""

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise ValidationError(f"features must be a non-empty 2-D matrix, got shape {feats.shape}")
        if labels.ndim != 1 or labels.shape[0] != feats.shape[0]:
            raise ValidationError(
                f"labels must be a vector of length {feats.shape[0]}, got shape {labels.shape}"
            )
        bad = ~np.isfinite(feats)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValidationError(f"non-finite feature value at row {r}, column {c}")
        if self.class_count < 1:
            raise ValidationError("class_count must be >= 1")
        if labels.min() < 0 or labels.max() >= self.class_count:
            raise ValidationError(
                f"labels must lie in [0, {self.class_count}), got range "
                f"[{labels.min()}, {labels.max()}]"
            )
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def present_classes(self) -> np.ndarray:
        return np.unique(self.labels)


@dataclass(frozen=True)
class PredictionSet:
    """Source-head probabilities (n x Z) with target labels per row."""

    probs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise ValidationError(f"probs must be a non-empty 2-D matrix, got shape {probs.shape}")
        if labels.ndim != 1 or labels.shape[0] != probs.shape[0]:
            raise ValidationError("labels length must match probs row count")
        if not np.isfinite(probs).all():
            raise ValidationError("probs contains non-finite values")
        if probs.min() < 0:
            raise ValidationError("probs must be nonnegative")
        sums = probs.sum(axis=1, dtype=np.float64)
        off = np.abs(sums - 1.0)
        if off.max() > 1e-5:
            raise ValidationError(
                f"prediction row {int(off.argmax())} sums to {sums[off.argmax()]:.6g}, expected 1"
            )
        if labels.min() < 0:
            raise ValidationError("labels must be nonnegative")
        probs.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def source_classes(self) -> int:
        return self.probs.shape[1]


@dataclass(frozen=True)
class ManifestEntry:
    pair_id: str
    embeddings_path: Path
    labels_path: Path
    predictions_path: Optional[Path] = None
    reference_accuracy: Optional[float] = None


@dataclass(frozen=True)
class ScenarioManifest:
    scenario_kind: str
    entries: tuple
    metric_config: MetricConfig
    name: str = "scenario"

    def has_accuracies(self) -> bool:
        return all(e.reference_accuracy is not None for e in self.entries)


def _labels_sibling(path: Path) -> Path:
    return path.with_suffix(".lbls")


def _read_exact(f, size: int, what: str) -> bytes:
    data = f.read(size)
    if len(data) != size:
        raise CorruptionError(f"{what}: expected {size} bytes, got {len(data)}")
    return data


def save_labels(labels: np.ndarray, path) -> None:
    labels = np.ascontiguousarray(labels, dtype=np.int32)
    with open(path, "wb") as f:
        f.write(_LBLS_HEADER.pack(LBLS_MAGIC, FORMAT_VERSION, labels.shape[0]))
        f.write(labels.astype("<i4").tobytes())


def load_labels(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as f:
        magic, version, n = _LBLS_HEADER.unpack(_read_exact(f, _LBLS_HEADER.size, str(path)))
        if magic != LBLS_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {LBLS_MAGIC!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        payload = f.read()
    if len(payload) != 4 * n:
        raise CorruptionError(f"{path}: label payload has {len(payload)} bytes, header says {4 * n}")
    return np.frombuffer(payload, dtype="<i4").astype(np.int32)


def save_embeddings(emb: EmbeddingSet, path, labels_path=None) -> None:
    """Write EMBD (and the companion LBLS) files; round-trips bit-exactly."""
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_EMBD_HEADER.pack(EMBD_MAGIC, FORMAT_VERSION, emb.n, emb.dim, 0))
        f.write(emb.features.astype("<f4").tobytes())
    save_labels(emb.labels, labels_path or _labels_sibling(path))


def _load_embd_binary(path: Path) -> np.ndarray:
    with open(path, "rb") as f:
        header = _read_exact(f, _EMBD_HEADER.size, str(path))
        magic, version, n, dim, dtype = _EMBD_HEADER.unpack(header)
        if magic != EMBD_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {EMBD_MAGIC!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if dtype != 0:
            raise FormatError(f"{path}: unsupported dtype code {dtype} (only 0 = f32)")
        payload = f.read()
    expected = 4 * n * dim
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload has {len(payload)} bytes, header n={n} D={dim} requires {expected}"
        )
    if n < 1 or dim < 1:
        raise CorruptionError(f"{path}: header declares empty matrix n={n} D={dim}")
    return np.frombuffer(payload, dtype="<f4").reshape(n, dim).astype(np.float32)


def _load_csv(path: Path):
    """Convenience CSV input: feature values then a final 'label=<int>' field."""
    feats, labels = [], []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if not parts[-1].startswith("label="):
                raise FormatError(f"{path}:{lineno}: last field must be 'label=<int>'")
            try:
                labels.append(int(parts[-1][len("label="):]))
                feats.append([float(p) for p in parts[:-1]])
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from e
    if not feats:
        raise FormatError(f"{path}: empty CSV")
    widths = {len(r) for r in feats}
    if len(widths) != 1:
        raise FormatError(f"{path}: inconsistent row widths {sorted(widths)}")
    return np.asarray(feats, dtype=np.float32), np.asarray(labels, dtype=np.int32)


def load_embeddings(path, labels_path=None, provenance: str = "") -> EmbeddingSet:
    """Load an EMBD binary file (labels from the companion LBLS) or a CSV."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    with open(path, "rb") as f:
        head = f.read(4)
    if head == EMBD_MAGIC:
        feats = _load_embd_binary(path)
        lpath = Path(labels_path) if labels_path else _labels_sibling(path)
        if lpath.exists():
            labels = load_labels(lpath)
        elif labels_path is not None:
            raise FormatError(f"{lpath}: no such labels file")
        else:
            labels = np.zeros(feats.shape[0], dtype=np.int32)
        if labels.shape[0] != feats.shape[0]:
            raise CorruptionError(
                f"{path}: {feats.shape[0]} rows but {labels.shape[0]} labels in {lpath}"
            )
    elif path.suffix.lower() == ".csv" or (head[:1].isdigit() or head[:1] in (b"-", b"+", b".")):
        feats, labels = _load_csv(path)
    else:
        raise FormatError(f"{path}: bad magic {head!r}, expected {EMBD_MAGIC!r} or CSV")
    class_count = int(labels.max()) + 1 if labels.size else 1
    return EmbeddingSet(feats, labels, class_count, provenance or path.name)


def save_predictions(preds: PredictionSet, path, labels_path=None) -> None:
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_PRED_HEADER.pack(PRED_MAGIC, FORMAT_VERSION, preds.n, preds.source_classes))
        f.write(preds.probs.astype("<f4").tobytes())
    save_labels(preds.labels, labels_path or _labels_sibling(path))


def load_predictions(path, labels_path=None) -> PredictionSet:
    path = Path(path)
    with open(path, "rb") as f:
        header = _read_exact(f, _PRED_HEADER.size, str(path))
        magic, version, n, z = _PRED_HEADER.unpack(header)
        if magic != PRED_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {PRED_MAGIC!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        payload = f.read()
    expected = 4 * n * z
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload has {len(payload)} bytes, header n={n} Z={z} requires {expected}"
        )
    probs = np.frombuffer(payload, dtype="<f4").reshape(n, z).astype(np.float32)
    lpath = Path(labels_path) if labels_path else _labels_sibling(path)
    if not lpath.exists():
        raise FormatError(f"{lpath}: no such labels file")
    return PredictionSet(probs, load_labels(lpath))


def load_manifest(path) -> ScenarioManifest:
    """Load and eagerly validate a JSON scenario manifest.

    Schema::

        {
          "scenario_kind": "fixed-source" | "fixed-target",
          "metric_config": { ...MetricConfig fields... },
          "entries": [
            {"pair_id": str, "embeddings": path, "labels": path,
             "predictions": path?, "reference_accuracy": float?},
            ...
          ]
        }

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON: {e}") from e
    kind = doc.get("scenario_kind")
    if kind not in ("fixed-source", "fixed-target"):
        raise ValidationError(f"{path}: scenario_kind must be fixed-source or fixed-target")
    try:
        cfg = MetricConfig.from_dict(doc.get("metric_config", {}))
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{path}: bad metric_config: {e}") from e
    raw_entries = doc.get("entries", [])
    if not raw_entries:
        raise ValidationError(f"{path}: manifest has no entries")
    base = path.parent
    entries, seen = [], set()
    for i, e in enumerate(raw_entries):
        pid = e.get("pair_id")
        if not pid:
            raise ValidationError(f"{path}: entry {i} missing pair_id")
        if pid in seen:
            raise ValidationError(f"{path}: duplicate pair_id {pid!r}")
        seen.add(pid)
        epath = base / e["embeddings"]
        lpath = base / e["labels"]
        ppath = base / e["predictions"] if e.get("predictions") else None
        for p in (epath, lpath, ppath):
            if p is not None and not p.exists():
                raise ValidationError(f"{path}: entry {pid!r} references missing file {p}")
        acc = e.get("reference_accuracy")
        if acc is not None and not (0.0 <= acc <= 1.0):
            raise ValidationError(f"{path}: entry {pid!r} accuracy {acc} outside [0, 1]")
        entries.append(ManifestEntry(pid, epath, lpath, ppath, acc))
    with_acc = sum(e.reference_accuracy is not None for e in entries)
    if 0 < with_acc < len(entries):
        raise ValidationError(
            f"{path}: {with_acc} of {len(entries)} entries carry reference_accuracy; "
            "evaluation requires all or none"
        )
    return ScenarioManifest(kind, tuple(entries), cfg, name=path.stem)
