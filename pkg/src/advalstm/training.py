"""Training: hinge objectives, latent-space perturbations, Adam, and the
epoch loop.

Three training modes share one objective shape

    loss = scale * sum_s l(y_s, yhat_s)
         + weight * scale * sum_s l(y_s, yhat_perturbed_s)
         + 0.5 * l2 * ||params||^2

with l the hinge loss max(0, 1 - y*yhat).  Mode "normal" has no
perturbed term.  Mode "adversarial" perturbs the latent representation
e by the fast-gradient direction r = eps * g / ||g|| with g = dl/de;
for this linear head g = -y * w_head whenever the hinge is active, and
no perturbation is generated otherwise.  Mode "random_perturbation"
perturbs every example by a uniform draw from the eps-sphere instead.

The perturbation is a constant during differentiation: gradients flow
through e into the network but not through r's dependence on w_head.
Batch sums are scaled by (train-set size / batch size) so the L2 term
keeps the same relative weight at any batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ContractError, DivergenceError, NumericError, ShapeError
from .model import (
    ForwardTrace,
    ModelDims,
    ParamSet,
    classify,
    forward,
    head_confidence,
    init_params,
)

MODES = ("normal", "adversarial", "random_perturbation")

# Below this gradient norm the fast-gradient direction is undefined and
# no adversarial example is generated.
GRAD_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of one training run."""

    mode: str = "normal"
    l2_coef: float = 0.01          # weight of the squared-norm regularizer
    adv_weight: float = 0.05       # weight of the perturbed-loss term
    adv_scale: float = 0.01        # perturbation radius
    learning_rate: float = 0.01
    batch_size: int = 1024
    epochs: int = 150
    seed: int = 0
    patience: int = 20             # epochs without val-acc improvement; 0 disables

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("l2_coef", "adv_weight", "adv_scale"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ContractError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        if self.patience < 0:
            raise ContractError(f"patience must be >= 0, got {self.patience}")


def _check_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ContractError("labels must be +1 or -1")
    return y


def hinge_loss(y, yhat) -> np.ndarray:
    """max(0, 1 - y*yhat), elementwise."""
    y = _check_labels(y)
    return np.maximum(0.0, 1.0 - y * np.asarray(yhat, dtype=np.float64))


def hinge_grad(y, yhat) -> np.ndarray:
    """Subgradient of the hinge w.r.t. yhat: -y where y*yhat < 1, else 0
    (0 at the kink)."""
    y = _check_labels(y)
    active = (y * np.asarray(yhat, dtype=np.float64)) < 1.0
    return np.where(active, -y, 0.0)


def _add_l2(grads: ParamSet, params: ParamSet, l2_coef: float) -> None:
    if l2_coef:
        for name, a in params.items():
            getattr(grads, name)[...] += l2_coef * a


def objective_normal(
    x: np.ndarray, y: np.ndarray, params: ParamSet, l2_coef: float, scale: float = 1.0
) -> tuple[float, ParamSet]:
    """Clean hinge sum plus L2 regularizer; returns (loss, gradients)."""
    y = _check_labels(y)
    if y.size == 0:
        raise ContractError("objective needs a non-empty batch")
    trace = forward(x, params)
    loss = scale * float(np.sum(hinge_loss(y, trace.yhat)))
    loss += 0.5 * l2_coef * params.l2_norm_sq()
    if not np.isfinite(loss):
        raise NumericError("objective is non-finite")
    grads, _ = trace_backward_hinge(params, trace, y, scale)
    _add_l2(grads, params, l2_coef)
    return loss, grads


def trace_backward_hinge(
    params: ParamSet,
    trace: ForwardTrace,
    y: np.ndarray,
    scale: float,
    adv_upstream: np.ndarray | None = None,
    e_adv: np.ndarray | None = None,
) -> tuple[ParamSet, np.ndarray]:
    from .model import backward

    d_yhat = scale * hinge_grad(y, trace.yhat)
    return backward(params, trace, d_yhat, d_yhat_adv=adv_upstream, e_adv=e_adv)


def gen_adversarial(
    e: np.ndarray, y: float, params: ParamSet, eps: float
) -> tuple[np.ndarray, np.ndarray] | None:
    """Fast-gradient adversarial example at the latent representation.

    Returns (e_adv, r_adv) with ||r_adv|| = eps, or None when the hinge
    is inactive (y*yhat >= 1) or the gradient norm is below the floor.
    """
    if eps < 0:
        raise ContractError(f"perturbation scale must be >= 0, got {eps}")
    if y not in (-1, 1):
        raise ContractError(f"label must be +1 or -1, got {y}")
    e = np.asarray(e, dtype=np.float64)
    yhat = float(head_confidence(e, params))
    if y * yhat >= 1.0:
        return None
    g = -y * params.w_head  # dl/de of the active hinge through the linear head
    norm = float(np.linalg.norm(g))
    if norm < GRAD_NORM_FLOOR:
        return None
    r_adv = (eps / norm) * g
    return e + r_adv, r_adv


def adversarial_perturbations(
    yhat: np.ndarray, y: np.ndarray, params: ParamSet, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Batched fast-gradient perturbations at e.

    Returns (r_adv, mask): r_adv has a zero row wherever mask is False
    (hinge inactive or degenerate head).
    """
    if eps < 0:
        raise ContractError(f"perturbation scale must be >= 0, got {eps}")
    y = _check_labels(y)
    norm = float(np.linalg.norm(params.w_head))
    mask = (y * np.asarray(yhat) < 1.0) & (norm >= GRAD_NORM_FLOOR)
    if norm < GRAD_NORM_FLOOR:
        return np.zeros(y.shape + params.w_head.shape), mask
    direction = -(eps / norm) * params.w_head
    r_adv = np.where(mask[..., None], y[..., None] * direction, 0.0)
    return r_adv, mask


def gen_random_perturbation(
    e: np.ndarray, eps: float, rng: np.random.Generator
) -> np.ndarray:
    """e plus a uniform draw from the sphere of radius eps."""
    if eps < 0:
        raise ContractError(f"perturbation scale must be >= 0, got {eps}")
    return e + sphere_noise(np.asarray(e).shape, eps, rng)


def sphere_noise(shape: tuple, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from the eps-sphere along the last axis."""
    v = rng.standard_normal(shape)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    while np.any(norms < GRAD_NORM_FLOOR):  # essentially never
        bad = norms[..., 0] < GRAD_NORM_FLOOR
        v[bad] = rng.standard_normal(v[bad].shape)
        norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return (eps / norms) * v


def _perturbed_objective(
    trace: ForwardTrace,
    y: np.ndarray,
    params: ParamSet,
    r: np.ndarray,
    mask: np.ndarray,
    l2_coef: float,
    weight: float,
    scale: float,
) -> tuple[float, ParamSet]:
    """Objective with a fixed perturbation r at e (r enters as a constant)."""
    e_adv = trace.e + r
    yhat_adv = head_confidence(e_adv, params)
    clean = np.sum(hinge_loss(y, trace.yhat))
    perturbed = np.sum(hinge_loss(y, yhat_adv) * mask)
    loss = scale * float(clean + weight * perturbed) + 0.5 * l2_coef * params.l2_norm_sq()
    if not np.isfinite(loss):
        raise NumericError("objective is non-finite")
    adv_upstream = scale * weight * hinge_grad(y, yhat_adv) * mask
    grads, _ = trace_backward_hinge(params, trace, y, scale, adv_upstream, e_adv)
    _add_l2(grads, params, l2_coef)
    return loss, grads


def objective_adversarial_frozen(
    x: np.ndarray,
    y: np.ndarray,
    params: ParamSet,
    r_adv: np.ndarray,
    mask: np.ndarray,
    l2_coef: float,
    adv_weight: float,
    scale: float = 1.0,
) -> tuple[float, ParamSet]:
    """Adversarial objective with externally supplied perturbations.

    This is the function whose exact gradient the training step takes;
    finite-differencing it (holding r_adv and mask fixed) must agree
    with the analytic gradients.
    """
    y = _check_labels(y)
    trace = forward(x, params)
    return _perturbed_objective(trace, y, params, r_adv, mask, l2_coef, adv_weight, scale)


def objective_adversarial(
    x: np.ndarray,
    y: np.ndarray,
    params: ParamSet,
    l2_coef: float,
    adv_weight: float,
    adv_scale: float,
    scale: float = 1.0,
) -> tuple[float, ParamSet]:
    """Clean + adversarial hinge objective; returns (loss, gradients).

    With adv_weight = 0 this is exactly objective_normal, bit for bit.
    """
    if adv_weight == 0.0:
        return objective_normal(x, y, params, l2_coef, scale)
    y = _check_labels(y)
    if y.size == 0:
        raise ContractError("objective needs a non-empty batch")
    trace = forward(x, params)
    r_adv, mask = adversarial_perturbations(trace.yhat, y, params, adv_scale)
    return _perturbed_objective(trace, y, params, r_adv, mask, l2_coef, adv_weight, scale)


def objective_random(
    x: np.ndarray,
    y: np.ndarray,
    params: ParamSet,
    l2_coef: float,
    adv_weight: float,
    adv_scale: float,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> tuple[float, ParamSet]:
    """Clean + random-perturbation objective (every example perturbed)."""
    y = _check_labels(y)
    if y.size == 0:
        raise ContractError("objective needs a non-empty batch")
    trace = forward(x, params)
    r = sphere_noise(trace.e.shape, adv_scale, rng)
    mask = np.ones(y.shape, dtype=bool)
    return _perturbed_objective(trace, y, params, r, mask, l2_coef, adv_weight, scale)


def attacked_confidences(
    x: np.ndarray, y: np.ndarray, params: ParamSet, eps: float
) -> tuple[np.ndarray, np.ndarray]:
    """Clean and under-attack confidences for every example.

    The attack regenerates fast-gradient perturbations against the given
    parameters; examples without an adversarial example (inactive hinge)
    keep their clean representation.
    """
    trace = forward(x, params)
    r_adv, _ = adversarial_perturbations(trace.yhat, y, params, eps)
    return trace.yhat, head_confidence(trace.e + r_adv, params)


@dataclass
class AdamState:
    """Adam accumulators over the flattened parameter vector."""

    step: int
    m: np.ndarray
    v: np.ndarray

    @classmethod
    def for_params(cls, params: ParamSet) -> "AdamState":
        n = params.to_vector().size
        return cls(step=0, m=np.zeros(n), v=np.zeros(n))


def adam_step(
    params: ParamSet,
    grads: ParamSet,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[ParamSet, AdamState]:
    """One bias-corrected Adam update; returns the new params and state."""
    p = params.to_vector()
    g = grads.to_vector()
    if state.m.shape != p.shape or state.v.shape != p.shape or g.shape != p.shape:
        raise ShapeError("Adam state/gradient shapes do not match the parameters")
    t = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    p_new = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params.from_vector(p_new), AdamState(step=t, m=m, v=v)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float  # mean clean hinge over the train split
    val_loss: float    # mean clean hinge over the validation split
    val_acc: float     # percent


@dataclass
class TrainResult:
    params: ParamSet          # best-validation-accuracy checkpoint
    best_epoch: int           # 0 means the initialization was returned
    history: list[EpochRecord] = field(default_factory=list)
    final_params: ParamSet | None = None


def _mean_hinge(x: np.ndarray, y: np.ndarray, params: ParamSet) -> tuple[float, float]:
    """(mean hinge, accuracy percent) of a split; (nan, nan) when empty."""
    if y.size == 0:
        return float("nan"), float("nan")
    yhat = forward(x, params).yhat
    loss = float(np.mean(hinge_loss(y, yhat)))
    acc = 100.0 * float(np.mean(classify(yhat) == y))
    return loss, acc


def train(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    dims: ModelDims,
    config: TrainConfig,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Seeded mini-batch training with best-validation-accuracy selection.

    Shuffling, initialization, and random perturbations all draw from
    one generator seeded by ``config.seed``, so identical inputs and
    seeds reproduce identical checkpoints.  Epochs end early after
    ``patience`` epochs without a validation-accuracy improvement.
    Raises DivergenceError when the loss stops being finite.
    """
    y_train = _check_labels(y_train)
    if y_train.size == 0:
        raise ContractError("training needs a non-empty train split")
    if y_val.size:
        y_val = _check_labels(y_val)

    rng = np.random.default_rng(config.seed)
    params = init_params(dims, rng)
    state = AdamState.for_params(params)
    n = y_train.size
    scale_total = float(n)

    best_params = params.copy()
    best_epoch = 0
    best_acc = -np.inf
    history: list[EpochRecord] = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            scale = scale_total / idx.size
            try:
                if config.mode == "adversarial":
                    loss, grads = objective_adversarial(
                        xb, yb, params, config.l2_coef,
                        config.adv_weight, config.adv_scale, scale,
                    )
                elif config.mode == "random_perturbation":
                    loss, grads = objective_random(
                        xb, yb, params, config.l2_coef,
                        config.adv_weight, config.adv_scale, rng, scale,
                    )
                else:
                    loss, grads = objective_normal(xb, yb, params, config.l2_coef, scale)
            except NumericError as exc:
                raise DivergenceError(f"epoch {epoch}: {exc}") from exc
            params, state = adam_step(params, grads, state, config.learning_rate)

        try:
            train_loss, _ = _mean_hinge(x_train, y_train, params)
            val_loss, val_acc = _mean_hinge(x_val, y_val, params)
        except NumericError as exc:
            raise DivergenceError(f"epoch {epoch}: {exc}") from exc
        if not np.isfinite(train_loss):
            raise DivergenceError(f"epoch {epoch}: training loss is non-finite")
        record = EpochRecord(epoch=epoch, train_loss=train_loss,
                             val_loss=val_loss, val_acc=val_acc)
        history.append(record)
        if on_epoch is not None:
            on_epoch(record)

        if np.isfinite(val_acc) and val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_params = params.copy()
        if config.patience and np.isfinite(best_acc) and epoch - best_epoch >= config.patience:
            break

    if not np.isfinite(best_acc) and history:
        # No usable validation split: fall back to the final epoch.
        best_params = params.copy()
        best_epoch = history[-1].epoch
    return TrainResult(
        params=best_params,
        best_epoch=best_epoch,
        history=history,
        final_params=params.copy(),
    )


def make_train_config(**kwargs) -> TrainConfig:
    """replace()-style constructor used by grid search."""
    return replace(TrainConfig(), **kwargs)
