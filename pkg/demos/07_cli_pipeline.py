"""The whole map/reduce round trip through the command-line surface.

Builds a small IDX dataset on disk, then drives the same five verbs a
shell user would: augment the training set with noise, train several
workers from one config, average their checkpoints, and evaluate both a
single worker and the averaged model on held-out data. Every step here
is `convelm <verb> ...` in disguise; cli.main is called directly so the
demo also shows the exit codes.
"""
import os
import tempfile

from convelm import cli, make_dataset
from convelm.data import save_idx

root = tempfile.mkdtemp(prefix="convelm-demo-")
print("working under", root)

train = make_dataset(1200, seed=5)
test = make_dataset(400, seed=6)
save_idx(train, os.path.join(root, "train-images.idx3-ubyte"),
         os.path.join(root, "train-labels.idx1-ubyte"))
save_idx(test, os.path.join(root, "test-images.idx3-ubyte"),
         os.path.join(root, "test-labels.idx1-ubyte"))


def run(*argv):
    print("\n$ convelm", " ".join(argv))
    rc = cli.main(list(argv))
    print(f"(exit {rc})")
    assert rc == 0


run("augment",
    "--train-images", os.path.join(root, "train-images.idx3-ubyte"),
    "--train-labels", os.path.join(root, "train-labels.idx1-ubyte"),
    "--out-dir", os.path.join(root, "extended"),
    "--seed", "9")

config = os.path.join(root, "run-config.txt")
with open(config, "w") as fh:
    fh.write("\n".join([
        "# three workers, one fine-tuning iteration each",
        f"train_images = {root}/extended/extended-train-images.idx3-ubyte",
        f"train_labels = {root}/extended/extended-train-labels.idx1-ubyte",
        f"out_dir = {root}/run",
        "arch = 2c-2s-4c-2s",
        "kernel_size = 5",
        "workers = 3",
        "iterations = 1",
        "base_alpha = 0.5",
        "batch_size = 400",
        "seed = 13",
    ]) + "\n")

run("train", "--config", config)
run("average",
    os.path.join(root, "run", "checkpoint-p0.celm"),
    os.path.join(root, "run", "checkpoint-p1.celm"),
    os.path.join(root, "run", "checkpoint-p2.celm"),
    "--out", os.path.join(root, "run", "averaged.celm"))

# worker 0 alone, then the average of all three. With iterations = 1
# the workers' kernels have drifted apart before the reduce, so the
# averaged score can trail a single worker here; at iterations = 0
# averaging is the safe operation (compare demos 04 and 06).
run("eval", os.path.join(root, "run", "checkpoint-p0.celm"),
    "--test-images", os.path.join(root, "test-images.idx3-ubyte"),
    "--test-labels", os.path.join(root, "test-labels.idx1-ubyte"))
run("eval", os.path.join(root, "run", "averaged.celm"),
    "--test-images", os.path.join(root, "test-images.idx3-ubyte"),
    "--test-labels", os.path.join(root, "test-labels.idx1-ubyte"))

# and the gradient sanity check the test suite leans on
run("gradcheck", "2c-2s-2c-2s")
