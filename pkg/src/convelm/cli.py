"""Command-line entry points: augment, train, average, eval, gradcheck.

Each subcommand is a thin wrapper over the library. Failures print a
single JSON line to stderr ({"error": ..., "command": ...}) and exit
nonzero so callers can script against the tool.
"""
import argparse
import json
import os
import sys

from .data import augment_noise, load_idx, save_idx
from .gradcheck import run_gradcheck
from .orchestrator import load_run_config, run_average, run_eval, run_training

EXTENDED_IMAGES = "extended-train-images.idx3-ubyte"
EXTENDED_LABELS = "extended-train-labels.idx1-ubyte"


def cmd_augment(args):
    dataset = load_idx(args.train_images, args.train_labels)
    extended = augment_noise(dataset, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    save_idx(
        extended,
        os.path.join(args.out_dir, EXTENDED_IMAGES),
        os.path.join(args.out_dir, EXTENDED_LABELS),
    )
    print(f"wrote {len(extended)} examples ({len(dataset)} x 4) to {args.out_dir}")
    return 0


def cmd_train(args):
    overrides = dict(pair.split("=", 1) for pair in args.set or [])
    config = load_run_config(args.config, overrides)
    manifest = run_training(config)
    print(f"trained {config.workers} partitions into {config.out_dir}")
    return 0 if manifest["status"] == "ok" else 1


def cmd_average(args):
    out = run_average(args.checkpoints, args.out, weights=args.weights)
    print(f"averaged {len(args.checkpoints)} checkpoints into {out}")
    return 0


def cmd_eval(args):
    result, csv_text = run_eval(
        args.checkpoint, args.test_images, args.test_labels,
        csv_path=args.out, trial=args.trial,
    )
    sys.stdout.write(csv_text)
    return 0


def cmd_gradcheck(args):
    report = run_gradcheck(
        args.arch, seed=args.seed, side=args.side, kernel_size=args.kernel
    )
    print(report.summary())
    return 0 if report.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="convelm",
        description="Partitioned convolutional feature training with a ridge head.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="produce the 4x noise-extended training set")
    p.add_argument("--train-images", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="run k concurrent partition trainers")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("average", help="average checkpoints into one model")
    p.add_argument("checkpoints", nargs="+", metavar="CHECKPOINT")
    p.add_argument("--out", required=True)
    p.add_argument("--weights", type=float, nargs="+",
                   help="optional per-checkpoint weights (default uniform)")
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("eval", help="score a checkpoint against a labeled test set")
    p.add_argument("checkpoint")
    p.add_argument("--test-images", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--out", help="write the metrics CSV here as well")
    p.add_argument("--trial", default="holdout-0",
                   help="fold/trial tag recorded in the CSV row")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference audit of the backward pass")
    p.add_argument("arch")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--side", type=int, help="toy input side (small nets only)")
    p.add_argument("--kernel", type=int, help="toy kernel size")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as err:
        print(
            json.dumps({"error": f"{type(err).__name__}: {err}",
                        "command": args.command}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
