"""Run a backbone over an image folder and dump EMBD/LBLS/PRED files."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from embdump.backbones import NORM_MEAN, NORM_STD, build_backbone
from embdump.writers import write_embeddings, write_labels, write_predictions

logger = logging.getLogger(__name__)

_IMAGE_SUFFIXES = (".bmp", ".jpeg", ".jpg", ".png", ".ppm", ".webp")

# In dense label maps this pixel value marks "unlabeled"; such cells are
# dropped so the emitted files only hold nonnegative labels.
IGNORE_PIXEL = 255


class ExtractionError(Exception):
    """Raised when extraction cannot produce any output rows."""


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction run.

    ``input_dir`` holds one subdirectory per class for classification,
    or a flat image folder plus ``label_dir`` of same-stem grayscale
    label maps for dense (segmentation) extraction. Output files are
    ``<output_prefix>.embd`` / ``.lbls`` (and ``.pred`` when
    ``emit_probs`` is set; classification only).
    """

    backbone: str
    input_dir: str
    output_prefix: str
    batch_size: int = 16
    emit_probs: bool = False
    dense: bool = False
    label_dir: str | None = None
    weights: str | None = None
    num_classes: int = 1000
    image_size: int = 224
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.image_size < 32:
            raise ValueError("image_size must be at least 32")
        if self.dense and self.label_dir is None:
            raise ValueError("dense extraction requires label_dir")
        if self.dense and self.emit_probs:
            raise ValueError("emit_probs applies to classification only")


def _load_image(path, size):
    """Read one image as a normalized CHW float32 tensor, or None."""
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    except (OSError, ValueError) as exc:
        logger.warning("skipping unreadable image %s: %s", path, exc)
        return None
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    arr = (arr - NORM_MEAN) / NORM_STD
    return torch.from_numpy(arr.astype(np.float32).transpose(2, 0, 1))


def _classification_rows(input_dir):
    """Sorted (path, class index) pairs from class subdirectories."""
    root = Path(input_dir)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ExtractionError("no class subdirectories in %s" % input_dir)
    rows = []
    for idx, cdir in enumerate(class_dirs):
        for path in sorted(cdir.iterdir()):
            if path.suffix.lower() in _IMAGE_SUFFIXES:
                rows.append((path, idx))
    if not rows:
        raise ExtractionError("no images under %s" % input_dir)
    return rows, [d.name for d in class_dirs]


def _dense_rows(input_dir, label_dir):
    """Sorted (image path, label map path) pairs matched by stem."""
    root = Path(input_dir)
    labels = Path(label_dir)
    pairs = []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        candidates = sorted(labels.glob(path.stem + ".*"))
        if not candidates:
            logger.warning("skipping %s: no label map in %s", path, label_dir)
            continue
        pairs.append((path, candidates[0]))
    if not pairs:
        raise ExtractionError("no image/label pairs under %s" % input_dir)
    return pairs


def _cell_labels(label_path, grid_hw):
    """Downsample a label map to the feature grid with nearest pixels."""
    h, w = grid_hw
    with Image.open(label_path) as img:
        small = img.convert("L").resize((w, h), Image.NEAREST)
    labs = np.asarray(small, dtype=np.int32)
    return labs.reshape(-1)


def _extract_classification(job, backbone):
    rows, class_names = _classification_rows(job.input_dir)
    feats, labels, probs = [], [], []
    batch, batch_labels = [], []

    def flush():
        if not batch:
            return
        stacked = torch.stack(batch)
        f = backbone.features(stacked)
        feats.append(f.numpy().astype(np.float32))
        labels.extend(batch_labels)
        if job.emit_probs:
            p = torch.softmax(backbone.logits(f), dim=1)
            probs.append(p.numpy().astype(np.float32))
        batch.clear()
        batch_labels.clear()

    with torch.no_grad():
        for path, label in rows:
            tensor = _load_image(path, job.image_size)
            if tensor is None:
                continue
            batch.append(tensor)
            batch_labels.append(label)
            if len(batch) == job.batch_size:
                flush()
        flush()

    if not labels:
        raise ExtractionError("every image under %s was unreadable" % job.input_dir)
    return np.concatenate(feats), np.asarray(labels, np.int32), probs, class_names


def _extract_dense(job, backbone):
    pairs = _dense_rows(job.input_dir, job.label_dir)
    feats, labels = [], []
    with torch.no_grad():
        for path, label_path in pairs:
            tensor = _load_image(path, job.image_size)
            if tensor is None:
                continue
            maps = backbone.feature_maps(tensor.unsqueeze(0))[0]
            d, h, w = maps.shape
            cells = maps.numpy().reshape(d, h * w).T.astype(np.float32)
            labs = _cell_labels(label_path, (h, w))
            keep = labs != IGNORE_PIXEL
            if not keep.any():
                logger.warning("skipping %s: every cell is unlabeled", path)
                continue
            feats.append(cells[keep])
            labels.append(labs[keep])
    if not labels:
        raise ExtractionError("no labeled cells under %s" % job.input_dir)
    return np.concatenate(feats), np.concatenate(labels), [], None


def extract(job):
    """Run the job and write its output files.

    Returns a summary dict with row count, feature width, and the paths
    written. Row order follows sorted file paths, so identical inputs
    give identical files.
    """
    backbone = build_backbone(
        job.backbone,
        weights_path=job.weights,
        num_classes=job.num_classes,
        seed=job.seed,
    )
    if job.dense:
        feats, labels, probs, class_names = _extract_dense(job, backbone)
    else:
        feats, labels, probs, class_names = _extract_classification(job, backbone)

    if feats.shape[1] != backbone.feature_dim:
        raise ExtractionError(
            "feature width %d does not match backbone width %d"
            % (feats.shape[1], backbone.feature_dim)
        )

    prefix = Path(job.output_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    embd_path = prefix.with_suffix(".embd")
    lbls_path = prefix.with_suffix(".lbls")
    write_embeddings(embd_path, feats)
    write_labels(lbls_path, labels)
    written = [str(embd_path), str(lbls_path)]
    if job.emit_probs:
        pred_path = prefix.with_suffix(".pred")
        write_predictions(pred_path, np.concatenate(probs))
        written.append(str(pred_path))

    summary = {
        "backbone": job.backbone,
        "rows": int(feats.shape[0]),
        "feature_dim": int(feats.shape[1]),
        "files": written,
    }
    if class_names is not None:
        summary["class_names"] = class_names
    return summary
