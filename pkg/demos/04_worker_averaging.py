"""Data-parallel training by parameter averaging, the well-behaved case.

Four workers each see a random quarter of the training set, share one
kernel initialization, fit their own closed-form head, and never talk
to each other. The reducer averages kernels, biases, and output weights
into one model. On iid partitions the averaged model lands within a
point or so of a single model trained on everything.
"""
import numpy as np

from convelm import cnn, elm, trainer, reducer, metrics, make_dataset
from convelm.data import make_partition_plan

train = make_dataset(4000, seed=42)
test = make_dataset(2000, seed=43)
spec = cnn.parse_arch("6c-2s-12c-2s", kernel_size=5, input_side=28)
head = elm.ElmConfig(lam=1e3, hidden_dim=spec.hidden_dim, num_classes=10)
init = cnn.init_params(spec, seed=0)


def score(ck):
    H = elm.build_hidden(cnn.forward(ck.params, test.images, spec).features)
    cm = metrics.confusion_matrix(test.labels, elm.predict(H, ck.beta), 10)
    return metrics.accuracy(cm)


tc = trainer.TrainConfig(arch=spec, elm=head, iterations=0,
                         batch_size=1000, seed=0)
single, _ = trainer.train_partition(train.images, train.labels, tc, init)
print(f"single model on all {len(train.images)} examples: {score(single):.2f}%")

plan = make_partition_plan(len(train.images), k=4, mode="iid-shuffle",
                           seed=0, labels=train.labels)
checkpoints = []
for pid, rows in enumerate(plan.assignments):
    ck, _ = trainer.train_partition(train.images[rows], train.labels[rows],
                                    tc, init, partition_id=pid)
    checkpoints.append(ck)
    print(f"  worker {pid} ({len(rows)} examples): {score(ck):.2f}%")

merged = reducer.average_checkpoints(checkpoints)
print(f"averaged model: {score(merged):.2f}%")
print("partitions folded in:", merged.partition_ids)
