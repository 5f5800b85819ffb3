"""Tour of the five tensor primitives on numbers small enough to check by eye.

Everything downstream (feature extractor, ridge head, gradient checks)
is built from these: valid cross-correlation, a 180-degree kernel flip,
mean pooling, the pooling adjoint, and a Cholesky solve.
"""
import numpy as np

from convelm import ops

x = np.arange(16, dtype=np.float32).reshape(4, 4)
k = np.zeros((3, 3), dtype=np.float32)
k[1, 1] = 1.0  # identity tap: output should equal the 2x2 interior

print("input:")
print(x)
print("valid xcorr with a center-tap kernel (keeps the interior):")
print(ops.conv2d_valid(x, k))

edge = np.array([[0, 0, 0], [-1, 0, 1], [0, 0, 0]], dtype=np.float32)
print("horizontal difference kernel:")
print(ops.conv2d_valid(x, edge))
print("same kernel rotated 180 degrees flips the sign:")
print(ops.conv2d_valid(x, ops.rot180(edge)))

# pooling averages disjoint s x s tiles; its gradient spreads a value
# back evenly over the tile it came from
pooled = ops.mean_pool_down(x[None, None], 2)[0, 0]
print("2x2 mean pool:")
print(pooled)
spread = ops.upsample_mean_grad(pooled[None, None], 2)[0, 0]
print("adjoint spreads each mean back over its tile (divided by 4):")
print(spread)

# the adjoint identity <pool(x), y> == <x, unpool(y)> is what makes the
# backward pass of the pooling stage correct
y = np.random.default_rng(0).normal(size=(1, 1, 2, 2)).astype(np.float32)
lhs = float(np.sum(ops.mean_pool_down(x[None, None], 2) * y))
rhs = float(np.sum(x[None, None] * ops.upsample_mean_grad(y, 2)))
print(f"adjoint identity: {lhs:.6f} == {rhs:.6f}")

# ridge solves go through a Cholesky factorization, never an inverse
rng = np.random.default_rng(1)
A = rng.normal(size=(5, 5)).astype(np.float32)
spd = A @ A.T + 5.0 * np.eye(5, dtype=np.float32)
b = rng.normal(size=(5, 2)).astype(np.float32)
x_solve = ops.spd_solve(spd, b)
print("spd_solve residual:", float(np.abs(spd @ x_solve - b).max()))
