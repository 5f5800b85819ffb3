"""Train the closed-form pipeline once, end to end, with zero iterations.

A random-kernel conv stack turns images into pooled feature maps; the
classifier head is then a single ridge solve, no gradient descent. This
is the e=0 baseline every other demo compares against.

Note the regularizer convention: the ridge term is I/lambda, so LARGER
lambda means WEAKER regularization.
"""
import time

import numpy as np

from convelm import cnn, elm, trainer, metrics, make_dataset

train = make_dataset(4000, seed=42)
test = make_dataset(2000, seed=43)
spec = cnn.parse_arch("6c-2s-12c-2s", kernel_size=5, input_side=28)
print(f"arch {spec.text}: {spec.hidden_dim} pooled features per image")

init = cnn.init_params(spec, seed=0)


def fit_and_score(lam):
    head = elm.ElmConfig(lam=lam, hidden_dim=spec.hidden_dim, num_classes=10)
    tc = trainer.TrainConfig(arch=spec, elm=head, iterations=0,
                             batch_size=1000, seed=0)
    t0 = time.perf_counter()
    ck, report = trainer.train_partition(train.images, train.labels, tc, init)
    H = elm.build_hidden(cnn.forward(ck.params, test.images, spec).features)
    pred = elm.predict(H, ck.beta)
    cm = metrics.confusion_matrix(test.labels, pred, 10)
    acc = metrics.accuracy(cm)
    secs = time.perf_counter() - t0
    print(f"lambda {lam:>8g}: train {report.records[0].train_accuracy:5.2f}%  "
          f"test {acc:5.2f}%  ({secs:.1f}s)")
    return acc


# too small a lambda crushes beta toward zero and underfits; the default
# 1e3 leaves the solve nearly unregularized on well-scaled features
for lam in (1e-2, 1e0, 1e3):
    fit_and_score(lam)
