"""The reduce step: average k trained checkpoints into one model.

Parameter averaging is the headline reduce: every kernel, bias, and
output-weight tensor of the result is the elementwise mean of the
inputs. The exact alternative for the classifier alone, summing U/V
accumulators before a single solve, is also provided; the two have
different semantics (averaging beta is an approximation, merging
accumulators is not) and both are kept on purpose.
"""
from dataclasses import replace

import numpy as np

from .elm import ElmAccumulator
from .trainer import Checkpoint

_COMPAT_FIELDS = (
    "arch_text", "kernel_size", "input_side", "input_channels",
    "lam", "hidden_dim", "num_classes",
)


def _check_compatible(checkpoints):
    first = checkpoints[0]
    for i, ck in enumerate(checkpoints[1:], start=1):
        for name in _COMPAT_FIELDS:
            if getattr(ck, name) != getattr(first, name):
                raise ValueError(
                    f"checkpoint {i} (partitions {ck.partition_ids}) disagrees on "
                    f"{name}: {getattr(ck, name)!r} vs {getattr(first, name)!r}"
                )
        if len(ck.params) != len(first.params):
            raise ValueError(f"checkpoint {i} has {len(ck.params)} stages, expected {len(first.params)}")
        for l, ((W, b), (W0, b0)) in enumerate(zip(ck.params, first.params)):
            if W.shape != W0.shape or b.shape != b0.shape:
                raise ValueError(
                    f"checkpoint {i} stage {l}: shape {W.shape}/{b.shape} "
                    f"vs {W0.shape}/{b0.shape}"
                )
        if ck.beta.shape != first.beta.shape:
            raise ValueError(
                f"checkpoint {i}: beta shape {ck.beta.shape} vs {first.beta.shape}"
            )


def _mean(arrays, weights):
    # Accumulate in float64 so that averaging k identical float32 tensors
    # returns them bit-exactly and the result never depends on input order
    # (the caller has already fixed the order by sorting).
    stack = np.stack([np.asarray(a, dtype=np.float64) for a in arrays])
    if weights is None:
        avg = stack.mean(axis=0)
    else:
        w = np.asarray(weights, dtype=np.float64)
        avg = np.tensordot(w / w.sum(), stack, axes=1)
    return avg.astype(np.float32)


def average_checkpoints(checkpoints, weights=None):
    """Elementwise mean of k checkpoints' W, b, and beta tensors.

    Checkpoints are sorted by partition id before averaging, so the
    result is exactly invariant to input order. weights, when given,
    selects a weighted mean (e.g. by partition size) and must be listed
    in the same order as the checkpoints argument; the default is the
    plain unweighted mean regardless of partition sizes.
    """
    if len(checkpoints) < 1:
        raise ValueError("need at least one checkpoint to average")
    if weights is not None:
        if len(weights) != len(checkpoints):
            raise ValueError(
                f"{len(weights)} weights for {len(checkpoints)} checkpoints"
            )
        total = float(np.sum(np.asarray(weights, dtype=np.float64)))
        if not np.isfinite(total) or total <= 0.0:
            raise ValueError(f"weights must sum to a positive total, got {total}")
    _check_compatible(checkpoints)
    order = sorted(
        range(len(checkpoints)), key=lambda i: checkpoints[i].partition_ids
    )
    ordered = [checkpoints[i] for i in order]
    ordered_weights = None if weights is None else [weights[i] for i in order]

    stages = []
    for l in range(len(ordered[0].params)):
        W = _mean([ck.params[l][0] for ck in ordered], ordered_weights)
        b = _mean([ck.params[l][1] for ck in ordered], ordered_weights)
        stages.append((W, b))
    beta = _mean([ck.beta for ck in ordered], ordered_weights)
    ids = tuple(sorted(i for ck in ordered for i in ck.partition_ids))
    return replace(
        ordered[0], params=stages, beta=beta, partition_ids=ids
    )


def merge_accumulators(accs):
    """Elementwise sum of U, V, and counts: the exact classifier reduce."""
    if len(accs) < 1:
        raise ValueError("need at least one accumulator to merge")
    first = accs[0]
    U = first.U.copy()
    V = first.V.copy()
    count = first.count
    for i, acc in enumerate(accs[1:], start=1):
        if acc.U.shape != U.shape or acc.V.shape != V.shape:
            raise ValueError(
                f"accumulator {i} is {acc.U.shape}/{acc.V.shape}, "
                f"expected {U.shape}/{V.shape}"
            )
        U += acc.U
        V += acc.V
        count += acc.count
    return ElmAccumulator(U, V, count)
