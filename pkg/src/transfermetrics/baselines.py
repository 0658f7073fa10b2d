"""Comparison transferability metrics: LEEP, H-score, LogME, IDS.

All scores follow the convention that higher means more transferable;
IDS is stored negated for this reason.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .errors import ValidationError
from .formats import EmbeddingSet, PredictionSet


@dataclass(frozen=True)
class MetricScore:
    metric: str
    value: float
    fingerprint: str = ""
    extras: Dict[str, object] = field(default_factory=dict)


def leep(preds: PredictionSet, fingerprint: str = "") -> MetricScore:
    """Log expected empirical prediction from source-head probabilities.

    Builds the empirical joint of target labels and source-prediction mass,
    conditions on the source label, and averages the per-sample log of the
    expected conditional probability of the true target label.
    """
    labels = preds.labels
    classes = np.unique(labels)
    c_max = int(classes.max()) + 1
    probs = preds.probs.astype(np.float64)
    n, z = probs.shape
    joint = np.zeros((c_max, z))
    for c in classes:
        joint[c] = probs[labels == c].sum(axis=0)
    joint /= n
    marginal = joint.sum(axis=0)
    cond = np.zeros_like(joint)
    nonzero = marginal > 0
    # source labels with zero total mass contribute nothing
    cond[:, nonzero] = joint[:, nonzero] / marginal[nonzero]
    per_sample = np.einsum("iz,iz->i", probs, cond[labels])
    if (per_sample <= 0).any():
        raise ValidationError(
            f"sample {int(np.argmax(per_sample <= 0))} has zero expected prediction mass"
        )
    per_sample = np.minimum(per_sample, 1.0)  # guard rounding above exact 1
    return MetricScore("leep", float(np.log(per_sample).mean()), fingerprint)


def hscore(emb: EmbeddingSet, fingerprint: str = "") -> MetricScore:
    """trace(pinv(cov(F)) @ cov_between): inter-class variance over redundancy.

    cov_between is the covariance of the rows after replacing each by its
    class mean; both covariances use the unbiased N-1 denominator. A
    rank-deficient feature covariance goes through the pseudo-inverse with
    singular values below 1e-10 * sigma_max dropped.
    """
    x = emb.features.astype(np.float64)
    n, d = x.shape
    g = np.empty_like(x)
    for c in emb.present_classes():
        mask = emb.labels == c
        g[mask] = x[mask].mean(axis=0)
    denom = max(n - 1, 1)
    xc = x - x.mean(axis=0)
    gc = g - g.mean(axis=0)
    cov_f = (xc.T @ xc) / denom
    cov_b = (gc.T @ gc) / denom
    value = float(np.trace(np.linalg.pinv(cov_f, rcond=1e-10, hermitian=True) @ cov_b))
    return MetricScore("hscore", max(value, 0.0), fingerprint)


def _evidence(sigma: np.ndarray, z: np.ndarray, y2: float, n: int, d: int,
              alpha: float, beta: float) -> float:
    """Log evidence of the Bayesian linear model at fixed precisions."""
    denom = alpha + beta * sigma
    m2 = float(np.sum(beta**2 * sigma * z**2 / denom**2))
    res = float(np.sum(alpha**2 * z**2 / denom**2)) + max(y2 - float(np.sum(z**2)), 0.0)
    logdet = float(np.sum(np.log(denom))) + (d - len(sigma)) * np.log(alpha)
    return 0.5 * (
        n * np.log(beta) + d * np.log(alpha) - n * np.log(2 * np.pi)
        - beta * res - alpha * m2 - logdet
    )


def _logme_single(f: np.ndarray, y: np.ndarray, tol: float = 1e-6, max_iter: int = 100):
    """Maximize evidence over (alpha, beta) by the alternating fixed point."""
    n, d = f.shape
    u, s, _ = np.linalg.svd(f, full_matrices=False)
    sigma = s**2
    z = u.T @ y
    y2 = float(y @ y)
    alpha, beta = 1.0, 1.0
    converged = False
    for _ in range(max_iter):
        denom = alpha + beta * sigma
        gamma = float(np.sum(beta * sigma / denom))
        m2 = float(np.sum(beta**2 * sigma * z**2 / denom**2))
        res = float(np.sum(alpha**2 * z**2 / denom**2)) + max(y2 - float(np.sum(z**2)), 0.0)
        new_alpha = gamma / m2 if m2 > 1e-300 else 1e12
        new_beta = (n - gamma) / res if res > 1e-300 else 1e12
        new_alpha = float(np.clip(new_alpha, 1e-12, 1e12))
        new_beta = float(np.clip(new_beta, 1e-12, 1e12))
        if abs(new_alpha - alpha) <= tol * abs(alpha) and abs(new_beta - beta) <= tol * abs(beta):
            alpha, beta = new_alpha, new_beta
            converged = True
            break
        alpha, beta = new_alpha, new_beta
    return _evidence(sigma, z, y2, n, d, alpha, beta) / n, converged, alpha, beta


def logme(emb: EmbeddingSet, fingerprint: str = "") -> MetricScore:
    """Mean maximized per-sample log evidence over one-vs-all class targets."""
    if emb.n < 2:
        raise ValueError("LogME needs n >= 2")
    classes = emb.present_classes()
    if len(classes) < 2:
        raise ValueError("LogME needs >= 2 classes")
    f = emb.features.astype(np.float64)
    values, all_converged = [], True
    for c in classes:
        y = (emb.labels == c).astype(np.float64)
        ev, converged, _, _ = _logme_single(f, y)
        values.append(ev)
        all_converged &= converged
    return MetricScore(
        "logme", float(np.mean(values)), fingerprint, {"converged": all_converged}
    )


def ids(source: EmbeddingSet, target: EmbeddingSet, fingerprint: str = "") -> MetricScore:
    """Negated mean nearest-neighbor distance from target rows to source rows."""
    if source.dim != target.dim:
        raise ValueError(f"dimension mismatch: source D={source.dim}, target D={target.dim}")
    src = source.features.astype(np.float64)
    tgt = target.features.astype(np.float64)
    src_sq = np.einsum("ij,ij->i", src, src)
    mins = np.empty(tgt.shape[0])
    chunk = max(1, 2**22 // max(src.shape[0], 1))
    for start in range(0, tgt.shape[0], chunk):
        block = tgt[start:start + chunk]
        d2 = (
            np.einsum("ij,ij->i", block, block)[:, None]
            - 2.0 * block @ src.T
            + src_sq[None, :]
        )
        mins[start:start + block.shape[0]] = np.sqrt(np.clip(d2.min(axis=1), 0.0, None))
    return MetricScore("ids", -float(mins.mean()), fingerprint)
