"""Dataset ingestion (IDX files), noise augmentation, one-hot targets, partitioning."""
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# noise parameters for the extended training set; visible but classifiable
GAUSSIAN_SIGMA = 0.1
SALT_PEPPER_DENSITY = 0.05
POISSON_PEAK = 255.0


@dataclass
class Dataset:
    """Images as float32 in [0, 1], shaped (m, channels, side, side)."""
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} images vs {self.labels.shape[0]} labels"
            )

    def __len__(self):
        return self.images.shape[0]

    def subset(self, indices):
        return Dataset(self.images[indices], self.labels[indices])


def load_idx(images_path, labels_path):
    """Read an IDX image/label file pair into a Dataset.

    Headers are big-endian: images carry magic 0x00000803 and three
    dimension words, labels carry 0x00000801 and one. The two counts
    must agree. Pixels are scaled from bytes to [0, 1].
    """
    with open(images_path, "rb") as f:
        head = f.read(16)
        if len(head) < 16:
            raise ValueError(f"{images_path}: truncated IDX header")
        magic, m, rows, cols = struct.unpack(">IIII", head)
        if magic != IDX_IMAGE_MAGIC:
            raise ValueError(
                f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        raw = f.read()
    if len(raw) != m * rows * cols:
        raise ValueError(
            f"{images_path}: payload holds {len(raw)} bytes, header promises {m * rows * cols}"
        )
    with open(labels_path, "rb") as f:
        head = f.read(8)
        if len(head) < 8:
            raise ValueError(f"{labels_path}: truncated IDX header")
        magic, m_labels = struct.unpack(">II", head)
        if magic != IDX_LABEL_MAGIC:
            raise ValueError(
                f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        label_raw = f.read()
    if m_labels != m:
        raise ValueError(f"count mismatch: {m} images vs {m_labels} labels")
    if len(label_raw) != m_labels:
        raise ValueError(
            f"{labels_path}: payload holds {len(label_raw)} bytes, header promises {m_labels}"
        )
    images = np.frombuffer(raw, dtype=np.uint8).reshape(m, 1, rows, cols)
    images = images.astype(np.float32) / 255.0
    labels = np.frombuffer(label_raw, dtype=np.uint8).astype(np.int64)
    return Dataset(images, labels)


def save_idx(dataset, images_path, labels_path):
    """Write a Dataset back out as an IDX pair (the exact inverse of load_idx).

    Pixels are rounded to bytes, so a Dataset that came from load_idx
    round-trips bit-exactly.
    """
    images = dataset.images
    m, _, rows, cols = images.shape
    pixel_bytes = np.rint(np.clip(images, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, m, rows, cols))
        f.write(pixel_bytes.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, m))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def _poisson_copy(rng, images, out):
    # chunked so the integer intermediates stay small
    step = 8192
    for lo in range(0, images.shape[0], step):
        counts = rng.poisson(images[lo:lo + step].astype(np.float64) * POISSON_PEAK)
        out[lo:lo + step] = counts / POISSON_PEAK
    np.clip(out, 0.0, 1.0, out=out)


def augment_noise(dataset, seed):
    """Grow a dataset 4x: original plus gaussian, salt-and-pepper, poisson copies.

    gaussian adds N(0, 0.1) per pixel; salt-and-pepper forces ~5% of
    pixels to 0 or 1 (half each in expectation); poisson treats each
    pixel as a rate at peak 255, samples a count, and rescales. All
    copies clamp to [0, 1] and keep their source labels.
    """
    rng = np.random.default_rng([seed])
    images = dataset.images
    m = images.shape[0]
    out = np.empty((4 * m,) + images.shape[1:], dtype=np.float32)

    out[:m] = images

    g = out[m:2 * m]
    g[:] = images
    g += rng.normal(0.0, GAUSSIAN_SIGMA, size=images.shape).astype(np.float32)
    np.clip(g, 0.0, 1.0, out=g)

    sp = out[2 * m:3 * m]
    sp[:] = images
    flip = rng.random(images.shape) < SALT_PEPPER_DENSITY
    salt = rng.random(images.shape) < 0.5
    sp[flip] = salt[flip].astype(np.float32)

    _poisson_copy(rng, images, out[3 * m:])

    labels = np.tile(dataset.labels, 4)
    return Dataset(out, labels)


@dataclass
class PartitionPlan:
    """Disjoint index blocks of equal size P = floor(m / k).

    Examples beyond k * P are listed in unassigned; callers must surface
    that count rather than dropping it silently.
    """
    assignments: list
    unassigned: np.ndarray
    mode: str
    seed: int


def make_partition_plan(m, k, mode, seed, labels=None):
    """Assign m example indices to k workers.

    iid-shuffle deals a seeded permutation into k contiguous blocks, so
    every partition approximates the global class mix. class-skewed
    sorts the permuted indices by label first, giving each partition a
    small dominant set of classes (the non-iid failure case).
    """
    if k < 1:
        raise ValueError(f"need at least one partition, got k={k}")
    if m < k:
        raise ValueError(f"cannot split {m} examples into {k} partitions")
    perm = np.random.default_rng([seed]).permutation(m)
    if mode == "iid-shuffle":
        order = perm
    elif mode == "class-skewed":
        if labels is None:
            raise ValueError("class-skewed partitioning needs labels")
        labels = np.asarray(labels)
        if labels.shape[0] != m:
            raise ValueError(f"{labels.shape[0]} labels for {m} examples")
        order = perm[np.argsort(labels[perm], kind="stable")]
    else:
        raise ValueError(f"unknown partition mode {mode!r}")
    P = m // k
    assignments = [order[i * P:(i + 1) * P] for i in range(k)]
    return PartitionPlan(assignments, order[k * P:], mode, seed)


def one_hot(labels, num_classes):
    """Targets in {0, 1}: T[i, labels[i]] = 1."""
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        bad = labels[(labels < 0) | (labels >= num_classes)][0]
        raise ValueError(f"label {bad} outside [0, {num_classes})")
    return np.eye(num_classes, dtype=np.float32)[labels]
