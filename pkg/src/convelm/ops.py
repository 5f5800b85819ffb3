"""Dense float32 tensor kernels shared by every other module.

Tensors are plain numpy arrays. Production code keeps everything in
float32; these routines preserve the dtype they are given, so test
oracles can push float64 through the exact same code paths.

Convolution orientation: the forward primitive is cross-correlation
(no kernel flip). Gradient paths that need a flipped kernel apply
rot180 explicitly.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.linalg import get_lapack_funcs


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization hit a non-positive pivot.

    Carries the 1-based index of the failing leading minor. In this
    codebase the solve target is I/lambda + U with U = sum(H^T H), so
    this error nearly always means the ridge term is too small for the
    feature scale (lambda set too large) or the accumulator collapsed
    to numerical rank deficiency.
    """

    def __init__(self, pivot):
        self.pivot = int(pivot)
        super().__init__(
            f"leading minor {self.pivot} is not positive definite; "
            "the accumulator is rank deficient or the ridge term "
            "(I/lambda) is too small for the feature scale"
        )


def conv2d_valid(image, kernel):
    """Valid cross-correlation of one 2-D image with one 2-D kernel.

    out[i, j] = sum_{u, v} image[i+u, j+v] * kernel[u, v]

    Output shape is (h-kh+1, w-kw+1).
    """
    image = np.asarray(image)
    kernel = np.asarray(kernel)
    if image.ndim != 2 or kernel.ndim != 2:
        raise ValueError(
            f"conv2d_valid expects 2-D arrays, got {image.ndim}-D and {kernel.ndim}-D"
        )
    if kernel.shape[0] > image.shape[0] or kernel.shape[1] > image.shape[1]:
        raise ValueError(
            f"kernel {kernel.shape} does not fit inside image {image.shape}"
        )
    win = sliding_window_view(image, kernel.shape)
    return np.einsum("xyuv,uv->xy", win, kernel)


def rot180(kernel):
    """Rotate a 2-D kernel by 180 degrees (an exact involution)."""
    kernel = np.asarray(kernel)
    if kernel.ndim != 2:
        raise ValueError(f"rot180 expects a 2-D kernel, got {kernel.ndim}-D")
    return np.ascontiguousarray(kernel[::-1, ::-1])


def mean_pool_down(x, s):
    """Average s*s blocks over the last two axes.

    Works on a single 2-D map or on a batched (..., h, w) stack. The
    side lengths must divide by s exactly; nothing is padded.
    """
    x = np.asarray(x)
    s = int(s)
    if s < 1:
        raise ValueError(f"pool scale must be >= 1, got {s}")
    h, w = x.shape[-2], x.shape[-1]
    if h % s or w % s:
        raise ValueError(f"pool scale {s} does not divide map size {h}x{w}")
    shaped = x.reshape(x.shape[:-2] + (h // s, s, w // s, s))
    return shaped.mean(axis=(-3, -1))


def upsample_mean_grad(delta, s):
    """Adjoint of mean_pool_down: replicate each cell / s^2.

    Routing an error tensor backward through mean pooling spreads each
    pooled cell's gradient uniformly over its s*s source block.
    """
    delta = np.asarray(delta)
    s = int(s)
    if s < 1:
        raise ValueError(f"pool scale must be >= 1, got {s}")
    out = np.repeat(np.repeat(delta, s, axis=-2), s, axis=-1)
    return out / (s * s)


def spd_solve(A, B):
    """Solve A X = B for symmetric positive-definite A.

    Uses a Cholesky factorization and two triangular solves, never an
    explicit inverse. Raises NotPositiveDefiniteError naming the failing
    pivot when A is not numerically positive definite.
    """
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"system matrix must be square, got {A.shape}")
    squeeze = B.ndim == 1
    if squeeze:
        B = B[:, None]
    if B.shape[0] != A.shape[0]:
        raise ValueError(f"shape mismatch: A is {A.shape}, B is {B.shape}")
    potrf, potrs = get_lapack_funcs(("potrf", "potrs"), (A, B))
    c, info = potrf(A, lower=1, clean=0, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefiniteError(info)
    if info < 0:
        raise ValueError(f"illegal value in argument {-info} of the factorization")
    x, info = potrs(c, B, lower=1)
    if info != 0:
        raise ValueError(f"triangular solve failed with status {info}")
    return x[:, 0] if squeeze else x


# ---------------------------------------------------------------------------
# Batched NCHW kernels. These are the vectorized forms of conv2d_valid that
# the CNN stages actually run; each is equivalent to a python loop over the
# single-image primitive, which is how the tests pin them down.
# ---------------------------------------------------------------------------

def conv_forward(x, kernels, biases):
    """Batched multi-channel valid cross-correlation plus per-map bias.

    Parameters
    ----------
    x : (n, q, h, w) input batch
    kernels : (o, q, kh, kw) kernel bank
    biases : (o,) one scalar bias per output map

    Returns the (n, o, h-kh+1, w-kw+1) pre-activation batch:
    z[n, o] = sum_q conv2d_valid(x[n, q], kernels[o, q]) + biases[o]
    """
    x = np.asarray(x)
    kernels = np.asarray(kernels)
    biases = np.asarray(biases)
    n, q, h, w = x.shape
    o, qk, kh, kw = kernels.shape
    if qk != q:
        raise ValueError(f"kernel channels {qk} != input channels {q}")
    if kh > h or kw > w:
        raise ValueError(f"kernel {kh}x{kw} does not fit inside {h}x{w} maps")
    oh, ow = h - kh + 1, w - kw + 1
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, q * kh * kw)
    z = cols @ kernels.reshape(o, -1).T
    z = z.reshape(n, oh, ow, o).transpose(0, 3, 1, 2)
    return z + biases[None, :, None, None]


def conv_kernel_grad(a_prev, delta):
    """Kernel gradient of conv_forward, summed over the batch.

    grad[o, q, u, v] = sum_{n, p, r} a_prev[n, q, u+p, v+r] * delta[n, o, p, r]

    which is conv2d_valid(a_prev[n, q], delta[n, o]) accumulated over n.
    No kernel flip appears here: differentiating the cross-correlation
    forward pass yields another cross-correlation.
    """
    a_prev = np.asarray(a_prev)
    delta = np.asarray(delta)
    ph, pw = delta.shape[-2], delta.shape[-1]
    win = sliding_window_view(a_prev, (ph, pw), axis=(2, 3))
    return np.einsum("nquvpr,nopr->oquv", win, delta, optimize=True)


def conv_input_grad(delta, kernels):
    """Input gradient of conv_forward: full correlation with rot180 kernels.

    dprev[n, q, x, y] = sum_{o, u, v} delta[n, o, x-u, y-v] * kernels[o, q, u, v]

    implemented by zero-padding delta by k-1 and cross-correlating with the
    explicitly flipped kernels (the full-convolution adjoint of the forward).
    """
    delta = np.asarray(delta)
    kernels = np.asarray(kernels)
    kh, kw = kernels.shape[-2], kernels.shape[-1]
    pad = np.pad(delta, ((0, 0), (0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1)))
    win = sliding_window_view(pad, (kh, kw), axis=(2, 3))
    flipped = kernels[:, :, ::-1, ::-1]
    return np.einsum("noxyuv,oquv->nqxy", win, flipped, optimize=True)
