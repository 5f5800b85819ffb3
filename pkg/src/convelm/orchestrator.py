"""Run coordination: config handling, the k-worker map step, reduce, eval.

A run is described by a flat key=value config (file plus overrides).
The orchestrator loads the data, cuts the partition plan, hands every
worker the same initial parameters, runs the k training tasks
concurrently, and writes one checkpoint file and one report CSV per
partition. Workers share nothing; the only synchronization point is
the barrier before the reduce. Every run leaves its resolved config
and a machine-readable manifest next to its outputs.
"""
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, fields

import numpy as np

from . import cnn, elm, metrics
from .checkpoint_io import read_checkpoint, write_checkpoint
from .data import load_idx, make_partition_plan
from .reducer import average_checkpoints
from .trainer import TrainConfig, train_partition

EVAL_BATCH = 2500


class TrainingRunError(RuntimeError):
    """At least one worker failed; details live in the run manifest."""

    def __init__(self, message, manifest_path):
        self.manifest_path = manifest_path
        super().__init__(message)


@dataclass(frozen=True)
class RunConfig:
    train_images: str = ""
    train_labels: str = ""
    out_dir: str = "."
    arch: str = "6c-2s-12c-2s"
    kernel_size: int = 5
    workers: int = 1
    partition_mode: str = "iid-shuffle"
    iterations: int = 0
    base_alpha: float = 1.0
    batch_size: int = 2500
    seed: int = 0
    lam: float = 1e3
    num_classes: int = 10
    grad_normalize: bool = True
    reshuffle: bool = True
    static_rate: bool = False
    eval_mode: str = "holdout-5"

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        mode, _, n = self.eval_mode.partition("-")
        if mode not in ("holdout", "kfold") or not n.isdigit():
            raise ValueError(
                f"eval_mode must look like holdout-5 or kfold-6, got {self.eval_mode!r}"
            )

    def to_text(self):
        lines = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]
        return "\n".join(lines) + "\n"


def _coerce(name, kind, raw):
    raw = raw.strip()
    if kind is bool:
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ValueError(f"config key {name}: {raw!r} is not a boolean")
    try:
        return kind(raw)
    except ValueError as err:
        raise ValueError(f"config key {name}: {err}") from err


def parse_config_text(text):
    """Parse flat key=value lines; # starts a comment, blanks are skipped."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_run_config(path=None, overrides=None):
    """Build a RunConfig from an optional file plus key=value overrides."""
    raw = {}
    if path is not None:
        with open(path) as f:
            raw.update(parse_config_text(f.read()))
    raw.update(overrides or {})
    kinds = {f.name: f.type for f in fields(RunConfig)}
    typed = {}
    for key, value in raw.items():
        if key not in kinds:
            raise ValueError(f"unknown config key {key!r}")
        kind = {"str": str, "int": int, "float": float, "bool": bool}[kinds[key]] \
            if isinstance(kinds[key], str) else kinds[key]
        typed[key] = _coerce(key, kind, value) if isinstance(value, str) else value
    return RunConfig(**typed)


def _write_manifest(out_dir, payload):
    path = os.path.join(out_dir, "manifest.json")
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)
    return path


def run_training(config):
    """The map step: k concurrent train_partition calls over one dataset.

    Writes checkpoint-p<i>.celm and report-p<i>.csv per partition, the
    resolved config, and manifest.json. Raises TrainingRunError if any
    worker fails; completed checkpoints are kept and the manifest lists
    every failure.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "run-config.txt"), "w") as f:
        f.write(config.to_text())

    dataset = load_idx(config.train_images, config.train_labels)
    side = dataset.images.shape[2]
    channels = dataset.images.shape[1]
    spec = cnn.parse_arch(config.arch, config.kernel_size, side, channels)
    train_cfg = TrainConfig(
        arch=spec,
        elm=elm.ElmConfig(lam=config.lam, hidden_dim=spec.hidden_dim,
                          num_classes=config.num_classes),
        iterations=config.iterations,
        base_alpha=config.base_alpha,
        batch_size=min(config.batch_size, len(dataset) // config.workers),
        seed=config.seed,
        grad_normalize=config.grad_normalize,
        reshuffle=config.reshuffle,
        static_rate=config.static_rate,
    )
    plan = make_partition_plan(
        len(dataset), config.workers, config.partition_mode, config.seed,
        dataset.labels,
    )
    if plan.unassigned.size:
        print(
            f"partitioning left {plan.unassigned.size} of {len(dataset)} examples "
            f"unassigned (floor({len(dataset)}/{config.workers}) each)",
            file=sys.stderr,
        )
    init = cnn.init_params(spec, config.seed)

    def work(i):
        part = dataset.subset(plan.assignments[i])
        checkpoint, report = train_partition(
            part.images, part.labels, train_cfg, init, partition_id=i
        )
        ck_path = os.path.join(config.out_dir, f"checkpoint-p{i}.celm")
        write_checkpoint(checkpoint, ck_path)
        report_path = os.path.join(config.out_dir, f"report-p{i}.csv")
        tmp = f"{report_path}.tmp.{os.getpid()}"
        with open(tmp, "w") as f:
            f.write(report.to_csv())
        os.replace(tmp, report_path)
        return ck_path, report_path

    results = {}
    failures = {}
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {i: pool.submit(work, i) for i in range(config.workers)}
        for i, future in futures.items():
            try:
                results[i] = future.result()
            except Exception as err:  # kept per-partition; the manifest names them
                failures[i] = f"{type(err).__name__}: {err}"

    manifest = {
        "status": "ok" if not failures else "failed",
        "workers": config.workers,
        "unassigned_examples": int(plan.unassigned.size),
        "checkpoints": [results[i][0] for i in sorted(results)],
        "reports": [results[i][1] for i in sorted(results)],
        "failures": [
            {"partition": i, "error": failures[i]} for i in sorted(failures)
        ],
    }
    manifest_path = _write_manifest(config.out_dir, manifest)
    if failures:
        raise TrainingRunError(
            f"{len(failures)} of {config.workers} workers failed; see {manifest_path}",
            manifest_path,
        )
    return manifest


def run_average(checkpoint_paths, out_path, weights=None):
    """The reduce step over checkpoint files."""
    checkpoints = [read_checkpoint(p) for p in checkpoint_paths]
    averaged = average_checkpoints(checkpoints, weights=weights)
    return write_checkpoint(averaged, out_path)


def apply_model(checkpoint, images):
    """Predicted labels for an image batch, chunked to bound memory."""
    spec = checkpoint.spec
    out = []
    for lo in range(0, images.shape[0], EVAL_BATCH):
        feats = cnn.forward(checkpoint.params, images[lo:lo + EVAL_BATCH], spec).features
        out.append(elm.predict(elm.build_hidden(feats), checkpoint.beta))
    return np.concatenate(out)


def run_eval(checkpoint_path, test_images, test_labels, csv_path=None, trial="holdout-0"):
    """Forward a test set through a stored model and report the metrics.

    Returns the metrics dict and writes/returns a CSV with the row
    layout model_id,trial,accuracy,kappa,kappa_se.
    """
    checkpoint = read_checkpoint(checkpoint_path)
    dataset = load_idx(test_images, test_labels)
    if dataset.images.shape[2] != checkpoint.input_side \
            or dataset.images.shape[1] != checkpoint.input_channels:
        raise ValueError(
            f"test images are {dataset.images.shape[1:]}, checkpoint expects "
            f"({checkpoint.input_channels}, {checkpoint.input_side}, {checkpoint.input_side})"
        )
    predicted = apply_model(checkpoint, dataset.images)
    result = metrics.evaluate_predictions(
        dataset.labels, predicted, checkpoint.num_classes
    )
    model_id = os.path.splitext(os.path.basename(checkpoint_path))[0]
    csv_text = (
        "model_id,trial,accuracy,kappa,kappa_se\n"
        f"{model_id},{trial},{result['accuracy']:.4f},"
        f"{result['kappa']:.6f},{result['kappa_se']:.6f}\n"
    )
    if csv_path:
        with open(csv_path, "w") as f:
            f.write(csv_text)
    return result, csv_text
