"""Finite-difference validation of the backward pass and the head error.

Both routes run in float64 through the same production code (the ops
preserve whatever dtype they are given): the analytic side is
cnn.backward fed by elm.elm_error, the oracle side is central
differences of the scalar cost J = 0.5 * ||H beta - T||^2 at a frozen
beta, step 1e-3 on every parameter entry.

Central differences lie near reLU kinks: a pre-activation within the
perturbation's reach of zero flips its gate between the two cost
evaluations and the quotient stops estimating the derivative (observed
errors up to 3e-1 from a |z| of 5e-4). The toy builder therefore
resamples deterministically until every |z| clears a margin and every
stage keeps a healthy share of positive gates, which also rules out
dead all-negative nets that would pass vacuously.
"""
from dataclasses import dataclass

import numpy as np

from . import cnn, elm

EPSILON = 1e-3          # central-difference step
THRESHOLD = 1e-3        # max relative error allowed
KINK_MARGIN = 3e-3      # min |z| so the step cannot cross a reLU gate
LIVE_RANGE = (0.2, 0.8)  # per-stage share of positive gates
MAX_STAGES = 2
MAX_SIDE = 12
_BATCH = 3


@dataclass
class GradcheckReport:
    arch_text: str
    seed: int
    max_rel_err: float
    threshold: float
    passed: bool
    vacuous: bool
    entries: int
    toy_attempts: int

    def summary(self):
        verdict = "PASS" if self.passed else "FAIL"
        line = (
            f"{verdict} arch={self.arch_text} seed={self.seed} "
            f"max_rel_err={self.max_rel_err:.3e} threshold={self.threshold:g} "
            f"entries={self.entries}"
        )
        if self.vacuous:
            line += " WARNING: all gradients zero, the comparison is vacuous"
        return line


def _default_geometry(arch_text):
    stages = arch_text.count("c")
    return (8, 5) if stages == 1 else (10, 3)


def _build_toy(spec, seed):
    """Sample a float64 net and batch clear of reLU kinks and dead stages."""
    for attempt in range(500):
        rng = np.random.default_rng([seed, attempt])
        params = [
            (W.astype(np.float64), b.astype(np.float64))
            for W, b in cnn.init_params(spec, seed * 1000 + attempt)
        ]
        x = rng.uniform(0.0, 1.0, size=(_BATCH, spec.input_channels,
                                        spec.input_side, spec.input_side))
        trace = cnn.forward(params, x, spec)
        clear = min(np.abs(z).min() for z in trace.pre_acts)
        alive = min(float((z > 0).mean()) for z in trace.pre_acts)
        if clear > KINK_MARGIN and LIVE_RANGE[0] <= alive <= LIVE_RANGE[1]:
            labels = rng.integers(0, 3, size=_BATCH)
            return params, x, np.eye(3)[labels], attempt
    raise RuntimeError(
        f"no workable toy for {spec.text} within 500 draws from seed {seed}"
    )


def _cost(params, x, spec, beta, T):
    H = elm.build_hidden(cnn.forward(params, x, spec).features)
    return 0.5 * float(np.sum((H @ beta - T) ** 2))


def _max_param_rel_err(params, x, spec, beta, T, corrupt):
    trace = cnn.forward(params, x, spec)
    H = elm.build_hidden(trace.features)
    grads = cnn.backward(params, trace, elm.elm_error(H, T, beta))
    if corrupt:
        grads[0][0].flat[0] += 0.05
    worst = 0.0
    entries = 0
    all_zero = True
    for l, (W, b) in enumerate(params):
        for arr, grad in ((W, grads[l][0]), (b, grads[l][1])):
            flat = arr.reshape(-1)
            gflat = np.asarray(grad).reshape(-1)
            for i in range(flat.size):
                saved = flat[i]
                flat[i] = saved + EPSILON
                j_plus = _cost(params, x, spec, beta, T)
                flat[i] = saved - EPSILON
                j_minus = _cost(params, x, spec, beta, T)
                flat[i] = saved
                numeric = (j_plus - j_minus) / (2.0 * EPSILON)
                analytic = float(gflat[i])
                if analytic != 0.0 or numeric != 0.0:
                    all_zero = False
                rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-10)
                worst = max(worst, rel)
                entries += 1
    return worst, entries, all_zero


def _max_head_rel_err(seed):
    # the head suite: J as a function of the raw features on a 4x3 toy
    rng = np.random.default_rng([seed, 77])
    F = rng.normal(0.0, 1.0, size=(4, 3))
    T = np.eye(2)[rng.integers(0, 2, size=4)]
    beta = rng.normal(0.0, 0.5, size=(3, 2))
    analytic = elm.elm_error(elm.build_hidden(F), T, beta)
    worst = 0.0
    flat = F.reshape(-1)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + EPSILON
        j_plus = 0.5 * float(np.sum((elm.build_hidden(F) @ beta - T) ** 2))
        flat[i] = saved - EPSILON
        j_minus = 0.5 * float(np.sum((elm.build_hidden(F) @ beta - T) ** 2))
        flat[i] = saved
        numeric = (j_plus - j_minus) / (2.0 * EPSILON)
        a = float(analytic.reshape(-1)[i])
        worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-10))
    return worst, flat.size


def run_gradcheck(arch_text, seed=0, side=None, kernel_size=None,
                  batch=None, targets=None, corrupt_gradient=False):
    """Check every parameter gradient of a small net against central differences.

    arch_text must stay small (at most 2 stages, side at most 12); this
    is a validation probe, not a training path. batch/targets override
    the generated toy (used to probe degenerate inputs); beta is solved
    once on the unperturbed toy and then frozen, since the cost whose
    gradient the backward pass computes treats beta as a constant.
    corrupt_gradient deliberately breaks one analytic entry so tests can
    confirm the harness actually fails.
    """
    default_side, default_kernel = _default_geometry(arch_text)
    spec = cnn.parse_arch(
        arch_text,
        default_kernel if kernel_size is None else kernel_size,
        default_side if side is None else side,
    )
    if len(spec.stages) > MAX_STAGES or spec.input_side > MAX_SIDE:
        raise ValueError(
            f"gradcheck guardrail: at most {MAX_STAGES} stages and side "
            f"{MAX_SIDE}, got {len(spec.stages)} stages at side {spec.input_side}"
        )
    if batch is None:
        params, x, T, attempts = _build_toy(spec, seed)
    else:
        x = np.asarray(batch, dtype=np.float64)
        rng = np.random.default_rng([seed])
        params = [
            (W.astype(np.float64), b.astype(np.float64))
            for W, b in cnn.init_params(spec, seed)
        ]
        if targets is None:
            targets = np.eye(3)[rng.integers(0, 3, size=x.shape[0])]
        T = np.asarray(targets, dtype=np.float64)
        attempts = 0

    head_cfg = elm.ElmConfig(lam=1e3, hidden_dim=spec.hidden_dim,
                             num_classes=T.shape[1])
    acc = elm.ElmAccumulator.zeros(head_cfg, dtype=np.float64)
    H = elm.build_hidden(cnn.forward(params, x, spec).features)
    elm.accumulate(acc, H, T)
    beta = elm.solve_beta(acc, head_cfg)

    worst, entries, all_zero = _max_param_rel_err(params, x, spec, beta, T,
                                                  corrupt_gradient)
    head_worst, head_entries = _max_head_rel_err(seed)
    worst = max(worst, head_worst)
    return GradcheckReport(
        arch_text=spec.text,
        seed=seed,
        max_rel_err=worst,
        threshold=THRESHOLD,
        passed=worst < THRESHOLD,
        vacuous=all_zero,
        entries=entries + head_entries,
        toy_attempts=attempts,
    )
