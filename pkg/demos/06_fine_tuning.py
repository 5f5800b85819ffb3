"""Backpropagating the ridge head's error into the kernels.

Zero iterations already works (demo 02). Each extra iteration walks the
data in a fresh shuffle, re-solves the head against running feature
sums, pushes the solve's error back through pool/ReLU/conv, and nudges
the kernels by alpha0 / iteration. After the last iteration the head is
refit once with the kernels frozen.

The learning rate decides everything. A sane alpha0 buys a couple of
points over random kernels; a huge one explodes them until the hidden
features saturate and the ridge solve aborts on a rank-deficient
accumulator.
"""
from convelm import cnn, elm, trainer, metrics, make_dataset

train = make_dataset(4000, seed=42)
test = make_dataset(2000, seed=43)
spec = cnn.parse_arch("6c-2s-12c-2s", kernel_size=5, input_side=28)
head = elm.ElmConfig(lam=1e3, hidden_dim=spec.hidden_dim, num_classes=10)
init = cnn.init_params(spec, seed=0)


def run(iterations, alpha0):
    tc = trainer.TrainConfig(arch=spec, elm=head, iterations=iterations,
                             base_alpha=alpha0, batch_size=500, seed=0)
    ck, report = trainer.train_partition(train.images, train.labels, tc, init)
    H = elm.build_hidden(cnn.forward(ck.params, test.images, spec).features)
    cm = metrics.confusion_matrix(test.labels, elm.predict(H, ck.beta), 10)
    acc = metrics.accuracy(cm)
    print(f"e={iterations} alpha0={alpha0:g}: test {acc:.2f}%")
    for r in report.records:
        print(f"    iteration {r.iteration}: cost {r.cost:.4f}  "
              f"train {r.train_accuracy:.2f}%")
    return acc


base = run(0, 0.0)
tuned = run(3, 1.0)
print(f"fine-tuning gained {tuned - base:+.2f} points over the e=0 fit\n")

print("now the same three iterations at alpha0=50:")
try:
    run(3, 50.0)
except trainer.TrainError as err:
    print(f"  diverged: {err}")
