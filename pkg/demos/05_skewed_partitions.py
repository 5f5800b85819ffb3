"""Where parameter averaging breaks: non-iid partitions.

Same four workers, same reducer, but each partition is dominated by a
couple of classes. Every worker fits a head that barely knows the
classes it never saw, and averaging such disagreeing models loses
accuracy instead of recovering it. Run 04_worker_averaging.py first for
the iid baseline.
"""
import numpy as np

from convelm import cnn, elm, trainer, reducer, metrics, make_dataset
from convelm.data import make_partition_plan

train = make_dataset(4000, seed=42)
test = make_dataset(2000, seed=43)
spec = cnn.parse_arch("6c-2s-12c-2s", kernel_size=5, input_side=28)
head = elm.ElmConfig(lam=1e3, hidden_dim=spec.hidden_dim, num_classes=10)
init = cnn.init_params(spec, seed=0)
tc = trainer.TrainConfig(arch=spec, elm=head, iterations=0,
                         batch_size=1000, seed=0)


def score(ck):
    H = elm.build_hidden(cnn.forward(ck.params, test.images, spec).features)
    cm = metrics.confusion_matrix(test.labels, elm.predict(H, ck.beta), 10)
    return metrics.accuracy(cm)


single, _ = trainer.train_partition(train.images, train.labels, tc, init)
print(f"single model: {score(single):.2f}%")

plan = make_partition_plan(len(train.images), k=4, mode="class-skewed",
                           seed=0, labels=train.labels)
checkpoints = []
for pid, rows in enumerate(plan.assignments):
    counts = np.bincount(train.labels[rows], minlength=10)
    top = np.argsort(counts)[::-1][:2]
    ck, _ = trainer.train_partition(train.images[rows], train.labels[rows],
                                    tc, init, partition_id=pid)
    checkpoints.append(ck)
    print(f"  worker {pid}: mostly classes {top[0]} and {top[1]} "
          f"({100.0 * counts[top].sum() / counts.sum():.0f}% of its data), "
          f"test {score(ck):.2f}%")

merged = reducer.average_checkpoints(checkpoints)
drop = score(single) - score(merged)
print(f"averaged model: {score(merged):.2f}%  ({drop:.1f} points below single)")
