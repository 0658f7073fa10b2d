"""Synthetic transfer scenarios with analytically known class overlap.

Scenarios are diagonal-Gaussian mixtures, so the overlap integral and the
Bayes decision rule both factor per dimension and every estimate here can
be checked against a closed form. The Monte-Carlo overlap estimator
importance-samples from the equal mixture of the two densities, which
covers exactly the region where the integrand sqrt(p q) is non-negligible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .formats import EmbeddingSet
from .sampling import derive_rng


@dataclass(frozen=True)
class SyntheticScenario:
    class_means: np.ndarray       # (C, d)
    class_variances: np.ndarray   # (C, d), positive
    samples_per_class: int
    seed: int = 0

    def __post_init__(self):
        means = np.ascontiguousarray(np.atleast_2d(self.class_means), dtype=np.float64)
        variances = np.ascontiguousarray(np.atleast_2d(self.class_variances), dtype=np.float64)
        if means.shape != variances.shape:
            raise ValueError(f"means {means.shape} and variances {variances.shape} differ")
        if means.shape[0] < 2:
            raise ValueError("need >= 2 classes")
        if (variances <= 0).any():
            raise ValueError("variances must be positive")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")
        means.setflags(write=False)
        variances.setflags(write=False)
        object.__setattr__(self, "class_means", means)
        object.__setattr__(self, "class_variances", variances)

    @property
    def class_count(self) -> int:
        return self.class_means.shape[0]

    @property
    def dim(self) -> int:
        return self.class_means.shape[1]


def generate(scenario: SyntheticScenario) -> EmbeddingSet:
    """Draw samples_per_class points per class; deterministic per seed."""
    feats = []
    labels = []
    for c in range(scenario.class_count):
        rng = derive_rng(scenario.seed, c)
        x = scenario.class_means[c] + rng.standard_normal(
            (scenario.samples_per_class, scenario.dim)
        ) * np.sqrt(scenario.class_variances[c])
        feats.append(x)
        labels.append(np.full(scenario.samples_per_class, c, dtype=np.int32))
    return EmbeddingSet(
        np.concatenate(feats).astype(np.float32),
        np.concatenate(labels),
        scenario.class_count,
        f"synthetic-seed{scenario.seed}",
    )


def _diag_logpdf(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    return -0.5 * (
        np.sum((x - mean) ** 2 / var, axis=-1)
        + np.sum(np.log(2.0 * np.pi * var))
    )


def mc_bhattacharyya(
    mean1, var1, mean2, var2, samples: int, seed: int = 0
) -> Tuple[float, float]:
    """Monte-Carlo overlap integral of two diagonal Gaussians.

    Draws half the points from each density (an exact stratification of
    the 50/50 mixture) and averages sqrt(p q) / m with m the mixture
    density. Returns (estimate, standard error).
    """
    if samples < 2:
        raise ValueError("need >= 2 samples")
    mean1 = np.atleast_1d(np.asarray(mean1, dtype=np.float64))
    mean2 = np.atleast_1d(np.asarray(mean2, dtype=np.float64))
    var1 = np.atleast_1d(np.asarray(var1, dtype=np.float64))
    var2 = np.atleast_1d(np.asarray(var2, dtype=np.float64))
    rng = derive_rng(seed, 0)
    n1 = samples // 2
    n2 = samples - n1
    x1 = mean1 + rng.standard_normal((n1, mean1.shape[0])) * np.sqrt(var1)
    x2 = mean2 + rng.standard_normal((n2, mean2.shape[0])) * np.sqrt(var2)
    x = np.concatenate([x1, x2])
    lp = _diag_logpdf(x, mean1, var1)
    lq = _diag_logpdf(x, mean2, var2)
    # log m = log(0.5) + logaddexp(lp, lq); integrand in log space for stability
    log_integrand = 0.5 * (lp + lq) - (np.log(0.5) + np.logaddexp(lp, lq))
    values = np.exp(log_integrand)
    estimate = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(samples))
    return estimate, se


def bayes_error_estimate(
    scenario: SyntheticScenario, samples: int, seed: int = 1
) -> float:
    """Monte-Carlo error of the optimal (max prior x likelihood) classifier.

    Class priors are equal (samples_per_class is uniform across classes);
    fresh samples are drawn independently of ``generate``.
    """
    if samples < 1:
        raise ValueError("need >= 1 sample")
    rng = derive_rng(scenario.seed, 10_000 + seed)
    c = scenario.class_count
    true = rng.integers(0, c, size=samples)
    noise = rng.standard_normal((samples, scenario.dim))
    x = scenario.class_means[true] + noise * np.sqrt(scenario.class_variances[true])
    scores = np.stack(
        [
            _diag_logpdf(x, scenario.class_means[k], scenario.class_variances[k])
            for k in range(c)
        ],
        axis=1,
    )
    predicted = scores.argmax(axis=1)
    return float(np.mean(predicted != true))
