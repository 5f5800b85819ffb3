"""Convolutional feature extractor: arch parsing, init, forward, backward, SGD.

Each stage is conv -> reLU -> mean-pool. The stack ends in a pooled
feature block that the classifier head flattens; no fully connected
layers exist here.
"""
import re
from dataclasses import dataclass, field

import numpy as np

from . import ops

_ARCH_RE = re.compile(r"^\d+c-\d+s(?:-\d+c-\d+s)*$")


@dataclass(frozen=True)
class ArchSpec:
    """Validated network architecture.

    stages holds (num_maps, pool_scale) pairs in order; sides holds the
    map side length entering each stage plus the final pooled side, so
    len(sides) == len(stages) + 1.
    """
    stages: tuple
    kernel_size: int
    input_side: int
    input_channels: int
    sides: tuple = field(init=False)

    def __post_init__(self):
        side = self.input_side
        sides = [side]
        for i, (maps, scale) in enumerate(self.stages):
            if maps < 1 or scale < 1:
                raise ValueError(f"stage {i + 1}: counts must be positive")
            conv_side = side - self.kernel_size + 1
            if conv_side < 1:
                raise ValueError(
                    f"stage {i + 1}: kernel {self.kernel_size} exceeds map side {side}"
                )
            if conv_side % scale:
                raise ValueError(
                    f"stage {i + 1}: pool scale {scale} does not divide "
                    f"conv output side {conv_side}"
                )
            side = conv_side // scale
            sides.append(side)
        object.__setattr__(self, "sides", tuple(sides))

    @property
    def hidden_dim(self):
        """Flattened length of the final pooled block (maps * side^2)."""
        return self.stages[-1][0] * self.sides[-1] ** 2

    @property
    def text(self):
        return "-".join(f"{m}c-{s}s" for m, s in self.stages)


def parse_arch(text, kernel_size, input_side, input_channels=1):
    """Parse an architecture string like "6c-2s-12c-2s" into an ArchSpec.

    The grammar is (<int>c-<int>s)+, case sensitive. Every stage must
    leave a positive integer side length: (side - kernel + 1) / scale.
    """
    if not _ARCH_RE.match(text):
        raise ValueError(
            f"architecture {text!r} does not match the (<int>c-<int>s)+ grammar"
        )
    nums = [int(tok[:-1]) for tok in text.split("-")]
    stages = tuple(zip(nums[0::2], nums[1::2]))
    return ArchSpec(stages, int(kernel_size), int(input_side), int(input_channels))


def init_params(spec, seed):
    """Draw initial parameters for every stage.

    Kernels are uniform on +-sqrt(6 / ((c_in + c_out) * k^2)), biases
    start at zero. The same (spec, seed) pair always produces the same
    bytes; the generator is platform stable.
    """
    rng = np.random.default_rng(seed)
    k = spec.kernel_size
    params = []
    c_in = spec.input_channels
    for c_out, _ in spec.stages:
        lim = np.sqrt(6.0 / ((c_in + c_out) * k * k))
        W = rng.uniform(-lim, lim, size=(c_out, c_in, k, k)).astype(np.float32)
        b = np.zeros(c_out, dtype=np.float32)
        params.append((W, b))
        c_in = c_out
    return params


@dataclass
class ForwardTrace:
    """Everything the backward pass needs from one forward pass.

    pre_acts[l] is z at stage l, pooled[l] the stage output after
    reLU and mean pooling. Stage l's input is x for l == 0, else
    pooled[l - 1]. features is pooled[-1], the block handed to the
    classifier head.
    """
    x: np.ndarray
    pre_acts: list
    pooled: list
    scales: list

    @property
    def features(self):
        return self.pooled[-1]

    def stage_input(self, l):
        return self.x if l == 0 else self.pooled[l - 1]


def forward(params, batch, spec):
    """Run the stage stack over a batch shaped (n, channels, side, side)."""
    batch = np.asarray(batch)
    if batch.ndim != 4:
        raise ValueError(f"batch must be 4-D (n, c, h, w), got shape {batch.shape}")
    if batch.shape[1] != spec.input_channels or batch.shape[2] != spec.input_side \
            or batch.shape[3] != spec.input_side:
        raise ValueError(
            f"batch shape {batch.shape[1:]} does not match spec "
            f"({spec.input_channels}, {spec.input_side}, {spec.input_side})"
        )
    a = batch
    pre_acts, pooled, scales = [], [], []
    for (W, b), (_, scale) in zip(params, spec.stages):
        z = ops.conv_forward(a, W, b)
        act = np.maximum(z, 0)
        p = ops.mean_pool_down(act, scale)
        pre_acts.append(z)
        pooled.append(p)
        scales.append(scale)
        a = p
    return ForwardTrace(batch, pre_acts, pooled, scales)


def backward(params, trace, d_features):
    """Backpropagate an upstream feature error into parameter gradients.

    d_features may be the final pooled block (n, maps, side, side) or its
    flat (n, L) form. Gradients are raw sums over the batch, exactly the
    per-example sums of the chain rule; any batch-size normalization is
    the caller's policy.

    reLU's derivative at exactly zero is taken as zero.
    """
    if not isinstance(trace, ForwardTrace) or not trace.pre_acts:
        raise ValueError("backward needs the ForwardTrace of a prior forward pass")
    d_features = np.asarray(d_features)
    last = trace.pooled[-1]
    if d_features.ndim == 2:
        d_features = d_features.reshape(last.shape)
    elif d_features.shape != last.shape:
        raise ValueError(
            f"d_features shape {d_features.shape} does not match final block {last.shape}"
        )
    grads = [None] * len(params)
    d_pool = d_features
    for l in range(len(params) - 1, -1, -1):
        z = trace.pre_acts[l]
        dz = ops.upsample_mean_grad(d_pool, trace.scales[l]) * (z > 0)
        gW = ops.conv_kernel_grad(trace.stage_input(l), dz)
        gb = dz.sum(axis=(0, 2, 3))
        grads[l] = (gW, gb)
        if l > 0:
            d_pool = ops.conv_input_grad(dz, params[l][0])
    return grads


def sgd_update(params, grads, alpha):
    """One gradient step: W - alpha * gW, b - alpha * gb. Pure; returns new arrays."""
    out = []
    for (W, b), (gW, gb) in zip(params, grads):
        out.append((W - alpha * gW, b - alpha * gb))
    return out
