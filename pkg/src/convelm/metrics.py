"""Evaluation: confusion matrix, accuracy, Cohen's kappa, holdout and k-fold drivers."""
import numpy as np


def confusion_matrix(true_labels, predicted_labels, num_classes):
    """Count grid with rows = true class, columns = predicted class."""
    true_labels = np.asarray(true_labels)
    predicted_labels = np.asarray(predicted_labels)
    if true_labels.shape != predicted_labels.shape:
        raise ValueError(
            f"{true_labels.shape[0]} true labels vs {predicted_labels.shape[0]} predictions"
        )
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (true_labels, predicted_labels), 1)
    return cm


def accuracy(cm):
    """Percent of examples on the diagonal: 100 * trace / n."""
    cm = np.asarray(cm)
    n = cm.sum()
    if n < 1:
        raise ValueError("empty confusion matrix")
    return 100.0 * np.trace(cm) / n


def cohen_kappa(cm):
    """Chance-corrected agreement and its large-sample standard error.

    kappa = (p_o - p_e) / (1 - p_e) with p_o the observed agreement and
    p_e the agreement expected from the marginals; the standard error is
    sqrt(p_o (1 - p_o) / (n (1 - p_e)^2)).
    """
    cm = np.asarray(cm, dtype=np.float64)
    n = cm.sum()
    if n < 1:
        raise ValueError("empty confusion matrix")
    p_o = np.trace(cm) / n
    p_e = float(cm.sum(axis=1) @ cm.sum(axis=0)) / (n * n)
    if 1.0 - p_e == 0.0:
        raise ValueError(
            "marginals collapsed to a single class; kappa is undefined (p_e = 1)"
        )
    kappa = (p_o - p_e) / (1.0 - p_e)
    se = np.sqrt(p_o * (1.0 - p_o) / (n * (1.0 - p_e) ** 2))
    return float(kappa), float(se)


def evaluate_predictions(true_labels, predicted_labels, num_classes):
    """Bundle the standard metrics for one model on one test set."""
    cm = confusion_matrix(true_labels, predicted_labels, num_classes)
    kappa, se = cohen_kappa(cm)
    return {
        "accuracy": accuracy(cm),
        "kappa": kappa,
        "kappa_se": se,
        "confusion": cm,
    }


def kfold_split(m, folds, seed):
    """Seeded permutation cut into contiguous fold slices.

    Returns (train_indices, test_indices) per fold; every index tests
    exactly once. The first m % folds folds absorb the remainder.
    """
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    if folds > m:
        raise ValueError(f"cannot cut {m} examples into {folds} folds")
    perm = np.random.default_rng([seed]).permutation(m)
    base = m // folds
    extra = m % folds
    splits = []
    stop = 0
    for i in range(folds):
        start = stop
        stop = start + base + (1 if i < extra else 0)
        test = perm[start:stop]
        train = np.concatenate([perm[:start], perm[stop:]])
        splits.append((train, test))
    return splits


def holdout_trials(run_trial, seeds):
    """Repeat a train/eval function over seeds and summarize.

    run_trial(seed) must return a scalar score. Returns the per-seed
    scores plus (mean, sample standard deviation), the form behind
    "score +- band" reporting. The deviation is the ddof=1 sample
    estimate across trials.
    """
    scores = [float(run_trial(seed)) for seed in seeds]
    mean = float(np.mean(scores))
    sd = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
    return scores, mean, sd
