"""Per-worker training loop: accumulate, solve, backpropagate, update.

One call to train_partition is one worker's whole job. Per iteration it
resets the U/V accumulator, then walks its partition in seeded-shuffle
order; each batch is pushed through the feature extractor, folded into
the accumulator, answered with a fresh ridge solve against the running
sums, and the solve's error signal is backpropagated into the kernels
for one SGD step at rate alpha0 / iteration. After the last iteration
the output weights are refit once over the whole partition with the
kernels frozen, so the emitted model pairs its final parameters with
the solution that actually belongs to them. Workers never communicate;
the reducer meets them afterward at the checkpoint files.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from . import cnn, elm
from .data import one_hot
from .ops import NotPositiveDefiniteError


class TrainError(RuntimeError):
    """Training aborted; carries the iteration and batch where it died."""

    def __init__(self, iteration, batch_index, cause):
        self.iteration = iteration
        self.batch_index = batch_index
        super().__init__(
            f"training aborted at iteration {iteration}, batch {batch_index}: {cause}"
        )


@dataclass(frozen=True)
class TrainConfig:
    arch: cnn.ArchSpec
    elm: elm.ElmConfig
    iterations: int = 0          # e = 0 means the closed-form fit only
    base_alpha: float = 1.0      # alpha0; iteration j trains at alpha0 / j
    batch_size: int = 2500
    seed: int = 0
    grad_normalize: bool = True  # divide summed gradients by batch size
    reshuffle: bool = True       # new permutation each iteration
    static_rate: bool = False    # hold alpha at alpha0 instead of alpha0 / j

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def learning_rate(j, alpha0, static=False):
    """Rate for iteration j >= 1: alpha0 / j, or alpha0 when static."""
    if j < 1:
        raise ValueError("iteration index starts at 1; iteration 0 performs no updates")
    return alpha0 if static else alpha0 / j


@dataclass
class Checkpoint:
    """One worker's trained model, the unit the reducer consumes."""
    arch_text: str
    kernel_size: int
    input_side: int
    input_channels: int
    lam: float
    hidden_dim: int
    num_classes: int
    seed: int
    iterations: int
    partition_ids: tuple
    params: list        # per stage (W, b), float32
    beta: np.ndarray

    @property
    def spec(self):
        return cnn.parse_arch(
            self.arch_text, self.kernel_size, self.input_side, self.input_channels
        )


@dataclass
class IterationRecord:
    iteration: int
    cost: float             # mean per-example squared-error cost
    train_accuracy: float   # percent
    seconds: float


@dataclass
class TrainReport:
    """One row per iteration, plus the iteration-0 closed-form fit."""
    records: list = field(default_factory=list)
    checkpoint: Checkpoint = None

    def to_csv(self):
        lines = ["iteration,cost,train_accuracy,seconds"]
        for r in self.records:
            lines.append(
                f"{r.iteration},{r.cost:.8g},{r.train_accuracy:.4f},{r.seconds:.3f}"
            )
        return "\n".join(lines) + "\n"


def _batch_starts(n, batch_size):
    return range(0, n, batch_size)


def train_partition(images, labels, config, init, partition_id=0):
    """Run the full per-worker loop over one data partition.

    Parameters
    ----------
    images, labels : the worker's slice, images shaped (n, c, side, side)
    config : TrainConfig
    init : shared initial parameters from cnn.init_params; never mutated
    partition_id : recorded in the checkpoint, not used numerically

    Returns (Checkpoint, TrainReport). The report carries a record for
    the iteration-0 closed-form fit and one per training iteration; for
    iterations >= 1 the cost and accuracy are measured online, batch by
    batch, against the solution available at that point in the pass.

    The checkpoint's beta is NOT the loop's last running solve: that
    solution mixes hidden features computed under parameters that kept
    moving within the pass. Once the updates stop, beta is refit in one
    full pass over the partition with the final parameters, so a fresh
    closed-form fit of the checkpoint's own params reproduces it.

    Raises TrainError (with iteration and batch context) if a ridge
    solve fails, which is how a diverging learning rate usually
    surfaces: exploded kernels saturate the hidden map and the
    accumulator loses numerical rank.
    """
    images = np.asarray(images)
    labels = np.asarray(labels)
    n = images.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty partition")
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds partition size {n}")
    spec = config.arch
    if spec.hidden_dim != config.elm.hidden_dim:
        raise ValueError(
            f"arch produces {spec.hidden_dim} features, elm config expects "
            f"{config.elm.hidden_dim}"
        )
    targets = one_hot(labels, config.elm.num_classes)

    params = init
    report = TrainReport()

    # iteration 0: closed-form fit of the untouched parameters. The
    # per-batch hidden matrices are cached so the record's cost and
    # accuracy can use the final beta exactly (parameters do not move).
    started = time.perf_counter()
    order = np.random.default_rng([config.seed, 1]).permutation(n)
    acc = elm.ElmAccumulator.zeros(config.elm)
    cached = []
    for lo in _batch_starts(n, config.batch_size):
        idx = order[lo:lo + config.batch_size]
        H = elm.build_hidden(cnn.forward(params, images[idx], spec).features)
        elm.accumulate(acc, H, targets[idx])
        cached.append((H, targets[idx]))
    try:
        beta = elm.solve_beta(acc, config.elm)
    except NotPositiveDefiniteError as err:
        raise TrainError(0, len(cached) - 1, err) from err
    cost = 0.0
    correct = 0
    for H, T in cached:
        scores = H @ beta
        cost += 0.5 * float(np.sum((scores - T) ** 2))
        correct += int(np.sum(np.argmax(scores, axis=1) == np.argmax(T, axis=1)))
    report.records.append(IterationRecord(
        0, cost / n, 100.0 * correct / n, time.perf_counter() - started
    ))
    del cached

    for j in range(1, config.iterations + 1):
        started = time.perf_counter()
        if config.reshuffle and j > 1:
            order = np.random.default_rng([config.seed, j]).permutation(n)
        alpha = learning_rate(j, config.base_alpha, config.static_rate)
        acc = elm.ElmAccumulator.zeros(config.elm)
        cost = 0.0
        correct = 0
        for bi, lo in enumerate(_batch_starts(n, config.batch_size)):
            idx = order[lo:lo + config.batch_size]
            batch = images[idx]
            T = targets[idx]
            trace = cnn.forward(params, batch, spec)
            H = elm.build_hidden(trace.features)
            elm.accumulate(acc, H, T)
            try:
                beta = elm.solve_beta(acc, config.elm)
            except NotPositiveDefiniteError as err:
                raise TrainError(j, bi, err) from err
            scores = H @ beta
            cost += 0.5 * float(np.sum((scores - T) ** 2))
            correct += int(np.sum(np.argmax(scores, axis=1) == np.argmax(T, axis=1)))
            grads = cnn.backward(params, trace, elm.elm_error(H, T, beta))
            if config.grad_normalize:
                scale = np.float32(1.0 / batch.shape[0])
                grads = [(gW * scale, gb * scale) for gW, gb in grads]
            params = cnn.sgd_update(params, grads, alpha)
        report.records.append(IterationRecord(
            j, cost / n, 100.0 * correct / n, time.perf_counter() - started
        ))

    if config.iterations > 0:
        # refit with the kernels frozen; the running beta is stale here
        acc = elm.ElmAccumulator.zeros(config.elm)
        last = -1
        for bi, lo in enumerate(_batch_starts(n, config.batch_size)):
            idx = order[lo:lo + config.batch_size]
            H = elm.build_hidden(cnn.forward(params, images[idx], spec).features)
            elm.accumulate(acc, H, targets[idx])
            last = bi
        try:
            beta = elm.solve_beta(acc, config.elm)
        except NotPositiveDefiniteError as err:
            raise TrainError(config.iterations, last, err) from err

    checkpoint = Checkpoint(
        arch_text=spec.text,
        kernel_size=spec.kernel_size,
        input_side=spec.input_side,
        input_channels=spec.input_channels,
        lam=config.elm.lam,
        hidden_dim=config.elm.hidden_dim,
        num_classes=config.elm.num_classes,
        seed=config.seed,
        iterations=config.iterations,
        partition_ids=(int(partition_id),),
        params=params,
        beta=beta,
    )
    report.checkpoint = checkpoint
    return checkpoint, report
