"""Classifier head: scaled-tanh hidden map, decomposable accumulators, ridge solve.

The head keeps two running matrices, U = sum(H^T H) and V = sum(H^T T).
They add across batches and across data partitions, so the same solve
works for one worker or for any merge of workers. Output weights come
from beta = (I/lambda + U)^-1 V.

Convention warning: the ridge term is I/lambda, so LARGER lambda means
WEAKER regularization. This inverts the usual sklearn-style alpha.
"""
from dataclasses import dataclass

import numpy as np

from .ops import spd_solve

# scaled tanh constants for the hidden map H = SCALE * tanh(SLOPE * F)
TANH_SCALE = 1.7159
TANH_SLOPE = 2.0 / 3.0


@dataclass(frozen=True)
class ElmConfig:
    lam: float = 1e3        # ridge term is I/lam: larger lam = weaker ridge
    hidden_dim: int = 0     # L, the flattened feature width
    num_classes: int = 10

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")


@dataclass
class ElmAccumulator:
    """Single-writer running sums; merging two accumulators is elementwise."""
    U: np.ndarray
    V: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, config, dtype=np.float32):
        L, c = config.hidden_dim, config.num_classes
        return cls(np.zeros((L, L), dtype=dtype), np.zeros((L, c), dtype=dtype))


def build_hidden(features):
    """Flatten a feature block and apply the scaled tanh.

    A (n, maps, side, side) block flattens in C order (map major, then
    rows, then columns); an already flat (n, L) matrix passes through.
    Returns H = 1.7159 * tanh((2/3) * F).
    """
    features = np.asarray(features)
    if features.ndim < 2:
        raise ValueError(f"features must be at least 2-D, got shape {features.shape}")
    F = features.reshape(features.shape[0], -1)
    return TANH_SCALE * np.tanh(TANH_SLOPE * F)


def accumulate(acc, H, T):
    """Fold one batch into the running sums: U += H^T H, V += H^T T."""
    H = np.asarray(H)
    T = np.asarray(T)
    if H.ndim != 2 or T.ndim != 2 or H.shape[0] != T.shape[0]:
        raise ValueError(f"batch shapes disagree: H {H.shape}, T {T.shape}")
    if H.shape[1] != acc.U.shape[0] or T.shape[1] != acc.V.shape[1]:
        raise ValueError(
            f"accumulator is {acc.U.shape[0]}x{acc.V.shape[1]}, "
            f"batch is {H.shape[1]}x{T.shape[1]}"
        )
    if H.shape[0] == 0:
        return acc
    acc.U += H.T @ H
    acc.V += H.T @ T
    acc.count += H.shape[0]
    return acc


def solve_beta(acc, config):
    """Ridge solution beta = (I/lambda + U)^-1 V over the accumulated data."""
    if acc.count < 1:
        raise ValueError("cannot solve an empty accumulator")
    L = acc.U.shape[0]
    eye = np.eye(L, dtype=acc.U.dtype)
    A = acc.U + eye / np.asarray(config.lam, dtype=acc.U.dtype)
    return spd_solve(A, acc.V)


def elm_error(H, T, beta):
    """Error signal fed back into the feature extractor.

    The head cost is J = 0.5 * ||H beta - T||^2 with H = s*tanh(m*F).
    Differentiating through the hidden map at fixed beta gives

        dJ/dF = ((H beta - T) beta^T) * s*m*(1 - (H/s)^2)

    where the tanh derivative is recovered from H itself. The result is
    what cnn.backward expects as its upstream d_features.
    """
    H = np.asarray(H)
    T = np.asarray(T)
    beta = np.asarray(beta)
    if H.shape[0] != T.shape[0] or H.shape[1] != beta.shape[0] \
            or T.shape[1] != beta.shape[1]:
        raise ValueError(
            f"shapes disagree: H {H.shape}, T {T.shape}, beta {beta.shape}"
        )
    dH = (H @ beta - T) @ beta.T
    return dH * (TANH_SCALE * TANH_SLOPE) * (1.0 - (H / TANH_SCALE) ** 2)


def predict(H, beta):
    """Class labels by row argmax of H beta; ties go to the lowest index."""
    scores = np.asarray(H) @ np.asarray(beta)
    return np.argmax(scores, axis=1)
