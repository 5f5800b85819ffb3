"""convelm: partitioned training of convolutional features with a ridge head.

k workers each train the same small convolutional network plus a
closed-form ridge classifier on disjoint slices of the data; a reducer
averages the resulting parameters into one model. The ridge solve is
built from per-batch accumulators so the fit over a dataset equals the
fit over any partitioning of it.

Regularization convention: the ridge term enters as identity / lam, so
LARGER lam means WEAKER regularization.
"""
from .cnn import ArchSpec, ForwardTrace, backward, forward, init_params, parse_arch, sgd_update
from .data import (
    Dataset,
    PartitionPlan,
    augment_noise,
    load_idx,
    make_partition_plan,
    one_hot,
    save_idx,
)
from .elm import (
    ElmAccumulator,
    ElmConfig,
    accumulate,
    build_hidden,
    elm_error,
    predict,
    solve_beta,
)
from .gradcheck import GradcheckReport, run_gradcheck
from .metrics import (
    accuracy,
    cohen_kappa,
    confusion_matrix,
    evaluate_predictions,
    holdout_trials,
    kfold_split,
)
from .checkpoint_io import checkpoint_bytes, read_checkpoint, write_checkpoint
from .ops import NotPositiveDefiniteError, conv2d_valid, mean_pool_down, rot180, spd_solve
from .orchestrator import (
    RunConfig,
    TrainingRunError,
    apply_model,
    load_run_config,
    run_average,
    run_eval,
    run_training,
)
from .reducer import average_checkpoints, merge_accumulators
from .synth import make_dataset, render_glyph
from .trainer import (
    Checkpoint,
    IterationRecord,
    TrainConfig,
    TrainError,
    TrainReport,
    learning_rate,
    train_partition,
)

__version__ = "0.1.0"

__all__ = [
    "ArchSpec", "ForwardTrace", "backward", "forward", "init_params",
    "parse_arch", "sgd_update",
    "Dataset", "PartitionPlan", "augment_noise", "load_idx",
    "make_partition_plan", "one_hot", "save_idx",
    "ElmAccumulator", "ElmConfig", "accumulate", "build_hidden",
    "elm_error", "predict", "solve_beta",
    "GradcheckReport", "run_gradcheck",
    "accuracy", "cohen_kappa", "confusion_matrix", "evaluate_predictions",
    "holdout_trials", "kfold_split",
    "checkpoint_bytes", "read_checkpoint", "write_checkpoint",
    "NotPositiveDefiniteError", "conv2d_valid", "mean_pool_down", "rot180",
    "spd_solve",
    "RunConfig", "TrainingRunError", "apply_model", "load_run_config",
    "run_average", "run_eval", "run_training",
    "average_checkpoints", "merge_accumulators",
    "make_dataset", "render_glyph",
    "Checkpoint", "IterationRecord", "TrainConfig", "TrainError",
    "TrainReport", "learning_rate", "train_partition",
    "__version__",
]
