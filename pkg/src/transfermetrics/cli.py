"""Command-line surface: score, rank, evaluate, ablate, synth.

Exit codes: 0 success, 1 data/validation failure, 2 usage error. Every
output file embeds the MetricConfig fingerprint and toolkit version, and
contains no timestamps, so re-running a command with identical inputs and
seed produces byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import MetricScore, hscore, ids, leep, logme
from .config import PCA_DIM_SWEEP, MetricConfig
from .errors import ToolkitError
from .formats import (
    ScenarioManifest,
    load_embeddings,
    load_manifest,
    load_predictions,
    save_embeddings,
)
from .gaussians import ClassGaussian, CovarianceMode
from .gbc import bhattacharyya_distance, gbc_pipeline
from .ranking import (
    EvalReport,
    ScenarioTable,
    evaluate_scenarios,
    report_to_dict,
    report_to_json,
    report_to_text,
    scatter_to_csv,
)
from .synthetic import SyntheticScenario, bayes_error_estimate, generate, mc_bhattacharyya

OUTPUT_DIR_ENV = "TRANSFERMETRICS_OUT"


class UsageError(Exception):
    pass


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _default_out_dir(args) -> Path:
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    return Path(os.environ.get(OUTPUT_DIR_ENV, "."))


def _config_from_args(args) -> MetricConfig:
    return MetricConfig(
        metric=args.metric,
        pca_dim=args.pca_dim,
        covariance_mode=args.cov_mode,
        var_floor=args.var_floor,
        pair_sum="ordered" if args.ordered_pairs else "unordered",
        seed=args.seed,
    )


def _score_entry(cfg: MetricConfig, embeddings_path, labels_path=None,
                 predictions_path=None, source_path=None) -> MetricScore:
    fp = cfg.fingerprint()
    if cfg.metric == "leep":
        if predictions_path is None:
            raise UsageError("metric 'leep' requires --predictions")
        preds = load_predictions(predictions_path)
        return leep(preds, fp)
    emb = load_embeddings(embeddings_path, labels_path)
    if cfg.metric == "gbc":
        score = gbc_pipeline(emb, cfg)
        return MetricScore("gbc", score.value, fp)
    if cfg.metric == "hscore":
        return hscore(emb, fp)
    if cfg.metric == "logme":
        return logme(emb, fp)
    if cfg.metric == "ids":
        if source_path is None:
            raise UsageError("metric 'ids' requires --source-embeddings")
        source = load_embeddings(source_path)
        return ids(source, emb, fp)
    raise UsageError(f"unknown metric {cfg.metric!r}")


def _score_payload(score: MetricScore, cfg: MetricConfig) -> dict:
    return {
        "metric": score.metric,
        "value": score.value,
        "fingerprint": score.fingerprint,
        "toolkit_version": __version__,
        "config": cfg.to_dict(),
        "extras": score.extras,
    }


def cmd_score(args) -> int:
    cfg = _config_from_args(args)
    score = _score_entry(
        cfg, args.embeddings, args.labels, args.predictions, args.source_embeddings
    )
    print(f"{score.metric}\t{score.value:.10g}\t{score.fingerprint}")
    if args.output:
        _write_json(Path(args.output), _score_payload(score, cfg))
    return 0


def _manifest_scores(manifest: ScenarioManifest, cfg: MetricConfig):
    """Score every manifest entry; returns (results, failures)."""
    if cfg.metric == "ids":
        raise UsageError("metric 'ids' needs a separate source set; use the score command")
    results, failures = [], []
    for entry in manifest.entries:
        try:
            score = _score_entry(cfg, entry.embeddings_path, entry.labels_path,
                                 entry.predictions_path)
            results.append((entry, score))
        except (ToolkitError, ValueError) as e:
            failures.append((entry.pair_id, str(e)))
    return results, failures


def cmd_rank(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = manifest.metric_config
    results, failures = _manifest_scores(manifest, cfg)
    for pid, message in failures:
        print(f"warning: {pid}: {message}", file=sys.stderr)
    if not results:
        print("error: all manifest entries failed", file=sys.stderr)
        return 1
    ranked = sorted(results, key=lambda r: (-r[1].value, r[0].pair_id))
    for i, (entry, score) in enumerate(ranked, 1):
        print(f"{i}\t{entry.pair_id}\t{score.value:.10g}")
    if args.output:
        payload = {
            "toolkit_version": __version__,
            "metric": cfg.metric,
            "fingerprint": cfg.fingerprint(),
            "config": cfg.to_dict(),
            "ranking": [
                {"rank": i, "pair_id": e.pair_id, "value": s.value}
                for i, (e, s) in enumerate(ranked, 1)
            ],
            "failures": [{"pair_id": p, "error": m} for p, m in failures],
        }
        _write_json(Path(args.output), payload)
    return 0


def _manifest_report(manifest: ScenarioManifest, cfg: MetricConfig):
    if not manifest.has_accuracies():
        raise UsageError("evaluation requires reference_accuracy on every manifest entry")
    results, failures = _manifest_scores(manifest, cfg)
    if not results:
        return None, failures
    rows = tuple(
        (e.pair_id, s.value, float(e.reference_accuracy)) for e, s in results
    )
    table = ScenarioTable(manifest.name, manifest.scenario_kind, rows)
    return evaluate_scenarios([table]), failures


def cmd_evaluate(args) -> int:
    manifest = load_manifest(args.manifest)
    cfg = manifest.metric_config
    report, failures = _manifest_report(manifest, cfg)
    for pid, message in failures:
        print(f"warning: {pid}: {message}", file=sys.stderr)
    if report is None:
        print("error: all manifest entries failed", file=sys.stderr)
        return 1
    out_dir = _default_out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = report_to_dict(report)
    payload["toolkit_version"] = __version__
    payload["fingerprint"] = cfg.fingerprint()
    payload["config"] = cfg.to_dict()
    _write_json(out_dir / f"{manifest.name}.report.json", payload)
    (out_dir / f"{manifest.name}.report.txt").write_text(report_to_text(report), encoding="utf-8")
    for sid in report.scatter:
        (out_dir / f"{sid}.scatter.csv").write_text(
            scatter_to_csv(report, sid), encoding="utf-8"
        )
    print(report_to_text(report), end="")
    return 0


def cmd_ablate(args) -> int:
    manifest = load_manifest(args.manifest)
    base = manifest.metric_config
    modes = args.modes.split(",") if args.modes else ["full", "diagonal", "spherical"]
    dims = [int(x) for x in args.dims.split(",")] if args.dims else list(PCA_DIM_SWEEP)
    cells = []
    for mode in modes:
        for dim in dims:
            cfg = base.with_(covariance_mode=mode, pca_dim=dim)
            report, failures = _manifest_report(manifest, cfg)
            cell = {
                "covariance_mode": mode,
                "pca_dim": dim,
                "fingerprint": cfg.fingerprint(),
                "failures": [{"pair_id": p, "error": m} for p, m in failures],
                "report": report_to_dict(report) if report is not None else None,
            }
            cells.append(cell)
            agg = report.aggregates if report else {}
            print(f"{mode}\td={dim}\t{json.dumps(agg, sort_keys=True)}")
    payload = {
        "toolkit_version": __version__,
        "base_config": base.to_dict(),
        "cells": cells,
    }
    if args.output:
        _write_json(Path(args.output), payload)
    return 0


def _scenario_from_spec(path) -> SyntheticScenario:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return SyntheticScenario(
        np.asarray(doc["class_means"], dtype=np.float64),
        np.asarray(doc["class_variances"], dtype=np.float64),
        int(doc["samples_per_class"]),
        int(doc.get("seed", 0)),
    )


def cmd_synth(args) -> int:
    scenario = _scenario_from_spec(args.spec)
    out_dir = _default_out_dir(args)
    out_dir.mkdir(parents=True, exist_ok=True)
    emb = generate(scenario)
    save_embeddings(emb, out_dir / "synthetic.embd")
    overlaps = []
    for i in range(scenario.class_count):
        for j in range(i + 1, scenario.class_count):
            gi = ClassGaussian(i, scenario.class_means[i], CovarianceMode.DIAGONAL,
                               scenario.class_variances[i], scenario.samples_per_class)
            gj = ClassGaussian(j, scenario.class_means[j], CovarianceMode.DIAGONAL,
                               scenario.class_variances[j], scenario.samples_per_class)
            dist = bhattacharyya_distance(gi, gj)
            est, se = mc_bhattacharyya(
                scenario.class_means[i], scenario.class_variances[i],
                scenario.class_means[j], scenario.class_variances[j],
                args.mc_samples, seed=scenario.seed,
            )
            overlaps.append({
                "class_i": i, "class_j": j,
                "closed_form_distance": dist,
                "closed_form_coefficient": float(np.exp(-dist)),
                "mc_coefficient": est,
                "mc_standard_error": se,
            })
    payload = {
        "toolkit_version": __version__,
        "seed": scenario.seed,
        "class_count": scenario.class_count,
        "samples_per_class": scenario.samples_per_class,
        "pairwise_overlaps": overlaps,
        "bayes_error_estimate": bayes_error_estimate(scenario, args.mc_samples),
    }
    _write_json(out_dir / "oracles.json", payload)
    print(f"wrote {out_dir / 'synthetic.embd'} and oracle values for "
          f"{scenario.class_count} classes")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transfermetrics",
        description="Transferability scoring from embedding dumps",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score one embedding set with one metric")
    p.add_argument("--metric", default="gbc",
                   choices=["gbc", "leep", "logme", "hscore", "ids"])
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--predictions", default=None)
    p.add_argument("--source-embeddings", default=None)
    p.add_argument("--pca-dim", type=int, default=64)
    p.add_argument("--cov-mode", default="spherical",
                   choices=["full", "diagonal", "spherical"])
    p.add_argument("--var-floor", type=float, default=1e-6)
    p.add_argument("--ordered-pairs", action="store_true",
                   help="double-count symmetric pairs in the GBC sum")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("rank", help="rank manifest entries by score")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("evaluate", help="correlate scores with reference accuracies")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep covariance mode x PCA dimension")
    p.add_argument("--manifest", required=True)
    p.add_argument("--modes", default=None, help="comma-separated covariance modes")
    p.add_argument("--dims", default=None, help="comma-separated PCA dimensions")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a synthetic scenario plus oracle values")
    p.add_argument("--spec", required=True)
    p.add_argument("--mc-samples", type=int, default=100_000)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (ToolkitError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
