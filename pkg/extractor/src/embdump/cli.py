"""Command line entry point for embdump."""

import argparse
import json
import logging
import sys

from embdump.backbones import BACKBONES
from embdump.extract import ExtractionError, ExtractionJob, extract


def build_parser():
    parser = argparse.ArgumentParser(
        prog="embdump",
        description="Dump image embeddings to EMBD/LBLS (and optional PRED) files.",
    )
    parser.add_argument("--backbone", default="resnet18", choices=BACKBONES)
    parser.add_argument(
        "--input", required=True,
        help="image folder: one subdirectory per class, or flat with --dense",
    )
    parser.add_argument(
        "--output", required=True,
        help="output prefix; writes <prefix>.embd/.lbls (and .pred)",
    )
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument(
        "--emit-probs", action="store_true",
        help="also write softmax probabilities of the classification head",
    )
    parser.add_argument(
        "--dense", action="store_true",
        help="emit one row per feature-map cell instead of per image",
    )
    parser.add_argument(
        "--labels", default=None,
        help="directory of same-stem grayscale label maps (dense mode)",
    )
    parser.add_argument(
        "--weights", default=None,
        help="local state_dict checkpoint; default is seeded random init",
    )
    parser.add_argument("--num-classes", type=int, default=1000,
                        help="width of the classification head")
    parser.add_argument("--image-size", type=int, default=224)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        job = ExtractionJob(
            backbone=args.backbone,
            input_dir=args.input,
            output_prefix=args.output,
            batch_size=args.batch_size,
            emit_probs=args.emit_probs,
            dense=args.dense,
            label_dir=args.labels,
            weights=args.weights,
            num_classes=args.num_classes,
            image_size=args.image_size,
            seed=args.seed,
        )
    except ValueError as exc:
        parser.error(str(exc))
    try:
        summary = extract(job)
    except (ExtractionError, OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
