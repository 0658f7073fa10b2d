"""Metric configuration and its stable fingerprint.

The fingerprint is embedded in every output file so results can always be
traced back to the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace

VALID_METRICS = ("gbc", "leep", "logme", "hscore", "ids")
VALID_COV_MODES = ("full", "diagonal", "spherical")
VALID_PAIR_SUMS = ("unordered", "ordered")
VALID_STRATEGIES = ("class_balanced", "uniform")

PCA_DIM_SWEEP = (16, 32, 64, 128)


@dataclass(frozen=True)
class MetricConfig:
    metric: str = "gbc"
    pca_dim: int = 64
    covariance_mode: str = "spherical"
    var_floor: float = 1e-6
    pair_sum: str = "unordered"
    pixels_per_image: int = 1000
    sampling_strategy: str = "class_balanced"
    seed: int = 0

    def __post_init__(self):
        if self.metric not in VALID_METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {VALID_METRICS}")
        if self.covariance_mode not in VALID_COV_MODES:
            raise ValueError(
                f"unknown covariance mode {self.covariance_mode!r}; expected one of {VALID_COV_MODES}"
            )
        if self.pair_sum not in VALID_PAIR_SUMS:
            raise ValueError(f"pair_sum must be one of {VALID_PAIR_SUMS}")
        if self.sampling_strategy not in VALID_STRATEGIES:
            raise ValueError(f"sampling strategy must be one of {VALID_STRATEGIES}")
        if self.pca_dim < 1:
            raise ValueError("pca_dim must be >= 1")
        if self.var_floor <= 0:
            raise ValueError("var_floor must be positive")
        if self.pixels_per_image < 1:
            raise ValueError("pixels_per_image must be >= 1")

    def fingerprint(self) -> str:
        """Stable hex digest of the canonical serialized configuration."""
        canonical = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def with_(self, **changes) -> "MetricConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown MetricConfig fields: {sorted(unknown)}")
        return cls(**d)
