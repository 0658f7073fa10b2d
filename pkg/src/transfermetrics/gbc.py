"""Bhattacharyya class-separability scoring.

The distance between two Gaussians combines a Mahalanobis mean term under
the averaged covariance with a log-determinant ratio term:

    D = (1/8) (mu1 - mu2)^T S^-1 (mu1 - mu2) + (1/2) ln(|S| / sqrt(|C1||C2|))

with S = (C1 + C2) / 2; the overlap coefficient is exp(-D). The score of
an embedding set is the negative sum of pairwise coefficients over its
classes: closer to zero means better class separability.

All arithmetic is 64-bit; log-determinants are accumulated per dimension
in log space so small variances at d = 64 never underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .config import MetricConfig
from .errors import NumericalError
from .formats import EmbeddingSet
from .gaussians import ClassGaussian, CovarianceMode, fit_class_gaussians
from .pca import fit_pca, project

NEGATIVE_CLAMP = 1e-9


@dataclass(frozen=True)
class PairwiseOverlap:
    class_i: int
    class_j: int
    distance: float
    coefficient: float


@dataclass(frozen=True)
class GbcScore:
    value: float
    pair_overlaps: tuple
    fingerprint: str = ""


def bhattacharyya_distance(g1: ClassGaussian, g2: ClassGaussian) -> float:
    """Closed-form distance between two class Gaussians of the same mode."""
    if g1.mode is not g2.mode:
        raise ValueError(f"covariance mode mismatch: {g1.mode} vs {g2.mode}")
    if g1.dim != g2.dim:
        raise ValueError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    dmu = g1.mean - g2.mean
    if g1.mode is CovarianceMode.FULL:
        avg = 0.5 * (g1.covariance + g2.covariance)
        try:
            chol = np.linalg.cholesky(avg)
        except np.linalg.LinAlgError as e:
            raise NumericalError(
                f"averaged covariance of classes ({g1.class_id}, {g2.class_id}) "
                f"is not positive definite"
            ) from e
        w = np.linalg.solve(chol, dmu)
        maha = 0.125 * float(w @ w)
        logdet_avg = 2.0 * np.log(np.diagonal(chol)).sum()
        sign1, logdet1 = np.linalg.slogdet(g1.covariance)
        sign2, logdet2 = np.linalg.slogdet(g2.covariance)
        if sign1 <= 0 or sign2 <= 0:
            raise NumericalError(
                f"non-positive covariance determinant for pair ({g1.class_id}, {g2.class_id})"
            )
        logterm = 0.5 * (logdet_avg - 0.5 * (logdet1 + logdet2))
    else:
        v1, v2 = g1.covariance, g2.covariance
        vavg = 0.5 * (v1 + v2)
        maha = 0.125 * float(np.sum(dmu * dmu / vavg))
        logterm = 0.5 * float(np.sum(np.log(vavg)) - 0.5 * (np.sum(np.log(v1)) + np.sum(np.log(v2))))
    dist = maha + logterm
    if not np.isfinite(dist):
        raise NumericalError(
            f"non-finite Bhattacharyya distance for pair ({g1.class_id}, {g2.class_id})"
        )
    if dist < -NEGATIVE_CLAMP:
        raise NumericalError(
            f"negative Bhattacharyya distance {dist} for pair ({g1.class_id}, {g2.class_id})"
        )
    return max(dist, 0.0)


def gbc_score(
    gaussians: Sequence[ClassGaussian],
    fingerprint: str = "",
    ordered_pairs: bool = False,
) -> GbcScore:
    """Negative sum of pairwise overlap coefficients over unordered pairs.

    With ordered_pairs=True each symmetric pair is counted twice (the
    literal i != j double sum); rankings are invariant to the factor 2.
    """
    if len(gaussians) < 2:
        raise ValueError(f"GBC needs >= 2 classes, got {len(gaussians)}")
    gs = sorted(gaussians, key=lambda g: g.class_id)
    overlaps = []
    total = 0.0
    for a in range(len(gs)):
        for b in range(a + 1, len(gs)):
            dist = bhattacharyya_distance(gs[a], gs[b])
            coeff = float(np.exp(-dist))
            overlaps.append(PairwiseOverlap(gs[a].class_id, gs[b].class_id, dist, coeff))
            total += coeff
    if ordered_pairs:
        total *= 2.0
    return GbcScore(-total, tuple(overlaps), fingerprint)


def gbc_pipeline(emb: EmbeddingSet, cfg: MetricConfig) -> GbcScore:
    """PCA-project, fit per-class Gaussians, and score class separability.

    The projection dimension is clamped to min(pca_dim, n, D) so small
    inputs never hard-fail; zero-variance trailing components are kept and
    floored downstream.
    """
    d = min(cfg.pca_dim, emb.n, emb.dim)
    model = fit_pca(emb, d)
    reduced = project(model, emb)
    gaussians = fit_class_gaussians(reduced, cfg.covariance_mode, cfg.var_floor)
    return gbc_score(gaussians, cfg.fingerprint(), ordered_pairs=cfg.pair_sum == "ordered")
