"""Per-class Gaussian estimation with full/diagonal/spherical covariances."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import ValidationError
from .formats import EmbeddingSet

DEFAULT_VAR_FLOOR = 1e-6


class CovarianceMode(enum.Enum):
    FULL = "full"
    DIAGONAL = "diagonal"
    SPHERICAL = "spherical"

    @classmethod
    def parse(cls, value) -> "CovarianceMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown covariance mode {value!r}") from None


@dataclass(frozen=True)
class ClassGaussian:
    class_id: int
    mean: np.ndarray         # (d,) float64
    mode: CovarianceMode
    covariance: np.ndarray   # (d, d) for FULL, (d,) for DIAGONAL/SPHERICAL
    sample_count: int

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        cov = np.ascontiguousarray(self.covariance, dtype=np.float64)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def variances(self) -> np.ndarray:
        """Per-dimension variances (diagonal of the covariance)."""
        if self.mode is CovarianceMode.FULL:
            return np.diagonal(self.covariance)
        return self.covariance


def fit_class_gaussians(
    emb: EmbeddingSet,
    mode: CovarianceMode | str = CovarianceMode.SPHERICAL,
    var_floor: float = DEFAULT_VAR_FLOOR,
) -> List[ClassGaussian]:
    """Estimate one Gaussian per present class.

    Means are sample means; covariances use the unbiased N-1 denominator
    and are then reduced per mode (diagonal keeps the diagonal, spherical
    replicates trace/d). Variances are floored elementwise at var_floor;
    a singleton class degrades to an all-floor covariance.
    """
    mode = CovarianceMode.parse(mode)
    if var_floor <= 0:
        raise ValueError("var_floor must be positive")
    x = emb.features.astype(np.float64)
    d = emb.dim
    out = []
    for c in emb.present_classes():
        rows = x[emb.labels == c]
        nc = rows.shape[0]
        if nc == 0:
            raise ValidationError(f"class {c} has no samples")
        mean = rows.mean(axis=0)
        if nc == 1:
            full = np.zeros((d, d))
        else:
            centered = rows - mean
            full = (centered.T @ centered) / (nc - 1)
        if mode is CovarianceMode.FULL:
            # clamping the diagonal up adds a nonnegative diagonal matrix,
            # so PSD-ness of the sample covariance is preserved
            cov = full.copy()
            idx = np.arange(d)
            cov[idx, idx] = np.maximum(cov[idx, idx], var_floor)
        elif mode is CovarianceMode.DIAGONAL:
            cov = np.maximum(np.diagonal(full), var_floor)
        else:
            # average of the floored per-dimension variances, so the
            # full -> diagonal -> spherical reduction chain is exact
            cov = np.full(d, np.maximum(np.diagonal(full), var_floor).mean())
        out.append(ClassGaussian(int(c), mean, mode, cov, nc))
    return out
