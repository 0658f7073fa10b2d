"""Rank-correlation evaluation of scores against reference accuracies.

Correlations are computed by explicit pair enumeration (scenario sizes are
small), which doubles as the normative tie semantics: tied pairs
contribute zero to the numerator while their weight still counts in the
denominator. Degenerate inputs (zero variance) yield None rather than a
silent zero.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ScenarioTable:
    scenario_id: str
    scenario_kind: str  # fixed-source | fixed-target
    rows: tuple        # of (pair_id, score, accuracy)

    def __post_init__(self):
        if self.scenario_kind not in ("fixed-source", "fixed-target"):
            raise ValidationError(f"bad scenario_kind {self.scenario_kind!r}")
        if len(self.rows) < 2:
            raise ValidationError(f"scenario {self.scenario_id!r} needs >= 2 rows")
        ids = [r[0] for r in self.rows]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"scenario {self.scenario_id!r} has duplicate pair_ids")
        for pid, score, acc in self.rows:
            if not np.isfinite(score):
                raise ValidationError(f"pair {pid!r} has non-finite score")
            if not (0.0 <= acc <= 1.0):
                raise ValidationError(f"pair {pid!r} accuracy {acc} outside [0, 1]")

    def scores(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows], dtype=np.float64)

    def accuracies(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows], dtype=np.float64)


@dataclass(frozen=True)
class ScenarioStats:
    scenario_id: str
    scenario_kind: str
    tau_weighted: Optional[float]
    tau: Optional[float]
    pearson: Optional[float]
    top1_hit: Optional[bool]
    top3_hit: Optional[bool]
    degenerate: bool


@dataclass(frozen=True)
class EvalReport:
    scenarios: tuple             # of ScenarioStats
    aggregates: dict             # kind -> {"tau_weighted": .., "tau": .., "pearson": .., ...}
    degenerate_ids: tuple
    scatter: dict                # scenario_id -> list of (pair_id, score, accuracy)


def _rank_desc_with_ties(values: np.ndarray) -> np.ndarray:
    """Average ranks with 0 = best (highest value)."""
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    pos = 0
    while i < len(order):
        j = i
        while j < len(order) and values[order[j]] == values[order[i]]:
            j += 1
        avg = (pos + pos + (j - i) - 1) / 2.0
        for t in range(i, j):
            ranks[order[t]] = avg
        pos += j - i
        i = j
    return ranks


def weighted_kendall_tau(scores, accuracies) -> Optional[float]:
    """Hyperbolic additive-weighted Kendall correlation.

    Pair (i, j) carries weight 1/(r_i + 1) + 1/(r_j + 1) with r the
    accuracy rank (0 = best, ties averaged), emphasizing correct ordering
    among the top-accuracy items. Returns None when all accuracies are
    equal (undefined).
    """
    s = np.asarray(scores, dtype=np.float64)
    a = np.asarray(accuracies, dtype=np.float64)
    if s.shape != a.shape or s.ndim != 1 or len(s) < 2:
        raise ValueError("scores and accuracies must be equal-length vectors with n >= 2")
    if np.all(a == a[0]):
        return None
    ranks = _rank_desc_with_ties(a)
    num = 0.0
    den = 0.0
    n = len(s)
    for i in range(n):
        for j in range(i + 1, n):
            w = 1.0 / (ranks[i] + 1.0) + 1.0 / (ranks[j] + 1.0)
            den += w
            num += w * np.sign(s[i] - s[j]) * np.sign(a[i] - a[j])
    return float(num / den)


def kendall_tau(scores, accuracies) -> Optional[float]:
    """Kendall tau-b with the standard tie correction."""
    s = np.asarray(scores, dtype=np.float64)
    a = np.asarray(accuracies, dtype=np.float64)
    if s.shape != a.shape or s.ndim != 1 or len(s) < 2:
        raise ValueError("scores and accuracies must be equal-length vectors with n >= 2")
    if np.all(s == s[0]) or np.all(a == a[0]):
        return None
    ds = np.sign(s[:, None] - s[None, :])
    da = np.sign(a[:, None] - a[None, :])
    iu = np.triu_indices(len(s), 1)
    prod = ds[iu] * da[iu]
    concordant_minus_discordant = prod.sum()
    n0 = len(prod)
    ties_s = np.sum(ds[iu] == 0)
    ties_a = np.sum(da[iu] == 0)
    denom = np.sqrt((n0 - ties_s) * (n0 - ties_a))
    if denom == 0:
        return None
    return float(concordant_minus_discordant / denom)


def pearson_r(scores, accuracies) -> Optional[float]:
    s = np.asarray(scores, dtype=np.float64)
    a = np.asarray(accuracies, dtype=np.float64)
    if s.shape != a.shape or s.ndim != 1 or len(s) < 2:
        raise ValueError("scores and accuracies must be equal-length vectors with n >= 2")
    if np.all(s == s[0]) or np.all(a == a[0]):
        return None
    sc = s - s.mean()
    ac = a - a.mean()
    return float((sc @ ac) / np.sqrt((sc @ sc) * (ac @ ac)))


def top_k_hit(table: ScenarioTable, k: int) -> bool:
    """Whether the accuracy-argmax pair appears among the k top-scoring ones.

    Score ties break by lexicographic pair_id; accuracy ties resolve to
    the lexicographically first pair among the tied best.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(table.rows) < k:
        raise ValueError(f"scenario has {len(table.rows)} rows, need >= {k}")
    best_acc = max(r[2] for r in table.rows)
    best_pair = min(r[0] for r in table.rows if r[2] == best_acc)
    ranked = sorted(table.rows, key=lambda r: (-r[1], r[0]))
    return best_pair in {r[0] for r in ranked[:k]}


def evaluate_scenarios(tables: Sequence[ScenarioTable]) -> EvalReport:
    """Per-scenario correlation statistics plus per-kind averages.

    Degenerate scenarios (all-equal accuracies) are flagged, listed, and
    excluded from the averages. Scatter rows are carried through for
    plotting exports.
    """
    if not tables:
        raise ValueError("no scenarios to evaluate")
    stats: List[ScenarioStats] = []
    scatter = {}
    for t in tables:
        tw = weighted_kendall_tau(t.scores(), t.accuracies())
        tau = kendall_tau(t.scores(), t.accuracies())
        r = pearson_r(t.scores(), t.accuracies())
        degenerate = tw is None
        top1 = top_k_hit(t, 1) if not degenerate else None
        top3 = top_k_hit(t, 3) if (not degenerate and len(t.rows) >= 3) else None
        stats.append(
            ScenarioStats(t.scenario_id, t.scenario_kind, tw, tau, r, top1, top3, degenerate)
        )
        scatter[t.scenario_id] = list(t.rows)
    aggregates = {}
    for kind in ("fixed-source", "fixed-target"):
        usable = [s for s in stats if s.scenario_kind == kind and not s.degenerate]
        if not usable:
            continue
        aggregates[kind] = {
            "scenarios": len(usable),
            "tau_weighted": float(np.mean([s.tau_weighted for s in usable])),
            "tau": float(np.mean([s.tau for s in usable if s.tau is not None])),
            "pearson": float(np.mean([s.pearson for s in usable if s.pearson is not None])),
            "top1_rate": float(np.mean([s.top1_hit for s in usable])),
            "top3_rate": (
                float(np.mean([s.top3_hit for s in usable if s.top3_hit is not None]))
                if any(s.top3_hit is not None for s in usable)
                else None
            ),
        }
    degenerate_ids = tuple(s.scenario_id for s in stats if s.degenerate)
    return EvalReport(tuple(stats), aggregates, degenerate_ids, scatter)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "scenarios": [
            {
                "scenario_id": s.scenario_id,
                "scenario_kind": s.scenario_kind,
                "tau_weighted": s.tau_weighted,
                "tau": s.tau,
                "pearson": s.pearson,
                "top1_hit": s.top1_hit,
                "top3_hit": s.top3_hit,
                "degenerate": s.degenerate,
            }
            for s in report.scenarios
        ],
        "aggregates": report.aggregates,
        "degenerate_ids": list(report.degenerate_ids),
    }


def report_to_json(report: EvalReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True, indent=2) + "\n"


def report_to_text(report: EvalReport) -> str:
    """Aligned table: one row per scenario plus aggregate rows."""

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, bool):
            return "yes" if v else "no"
        return f"{v:.4f}"

    header = f"{'scenario':<24}{'kind':<14}{'tau_w':>8}{'tau':>8}{'pearson':>9}{'top1':>6}{'top3':>6}"
    lines = [header, "-" * len(header)]
    for s in report.scenarios:
        lines.append(
            f"{s.scenario_id:<24}{s.scenario_kind:<14}"
            f"{fmt(s.tau_weighted):>8}{fmt(s.tau):>8}{fmt(s.pearson):>9}"
            f"{fmt(s.top1_hit):>6}{fmt(s.top3_hit):>6}"
        )
    for kind, agg in sorted(report.aggregates.items()):
        lines.append(
            f"{'average':<24}{kind:<14}"
            f"{agg['tau_weighted']:>8.4f}{agg['tau']:>8.4f}{agg['pearson']:>9.4f}"
            f"{agg['top1_rate']:>6.2f}"
            + (f"{agg['top3_rate']:>6.2f}" if agg.get("top3_rate") is not None else f"{'-':>6}")
        )
    return "\n".join(lines) + "\n"


def scatter_to_csv(report: EvalReport, scenario_id: str) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pair_id", "score", "accuracy"])
    for pid, score, acc in report.scatter[scenario_id]:
        writer.writerow([pid, repr(float(score)), repr(float(acc))])
    return buf.getvalue()
