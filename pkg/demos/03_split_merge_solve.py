"""Why the ridge head parallelizes: its normal equations are sums.

U = H'H and V = H'T decompose over any split of the rows, so p workers
can each accumulate their own slice and a reducer adds the pieces before
a single solve. The merged solution matches the whole-batch one to
floating-point noise, for any p and any ordering of the parts.
"""
import numpy as np

from convelm import cnn, elm, reducer, make_dataset

data = make_dataset(2000, seed=7)
spec = cnn.parse_arch("6c-2s-12c-2s", kernel_size=5, input_side=28)
head = elm.ElmConfig(lam=1.0, hidden_dim=spec.hidden_dim, num_classes=10)
params = cnn.init_params(spec, seed=0)

from convelm.data import one_hot

H = elm.build_hidden(cnn.forward(params, data.images, spec).features)
T = one_hot(data.labels, 10)

whole = elm.ElmAccumulator.zeros(head)
elm.accumulate(whole, H, T)
beta_whole = elm.solve_beta(whole, head)

for p in (2, 4, 8):
    parts = []
    for rows in np.array_split(np.arange(len(H)), p):
        acc = elm.ElmAccumulator.zeros(head)
        elm.accumulate(acc, H[rows], T[rows])
        parts.append(acc)
    merged = reducer.merge_accumulators(parts)
    beta_merged = elm.solve_beta(merged, head)
    rel = float(np.linalg.norm(beta_merged - beta_whole)
                / np.linalg.norm(beta_whole))
    print(f"p={p}: relative difference vs whole-batch beta = {rel:.2e}")

# contrast: averaging per-part BETAS is only an approximation, because
# solve is not linear in the accumulator. The exact route is to merge
# accumulators first and solve once.
betas = []
for rows in np.array_split(np.arange(len(H)), 4):
    acc = elm.ElmAccumulator.zeros(head)
    elm.accumulate(acc, H[rows], T[rows])
    betas.append(elm.solve_beta(acc, head))
beta_avg = np.mean(betas, axis=0)
rel = float(np.linalg.norm(beta_avg - beta_whole) / np.linalg.norm(beta_whole))
print(f"averaging 4 per-part betas instead: relative difference = {rel:.2e}")
