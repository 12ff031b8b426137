"""Attentive-LSTM model: forward passes with cached activations and
hand-derived backward passes.

Architecture, for one example with a lag window ``x`` of shape (T, D):

    m_t = tanh(W_map x_t + b_map)                    feature mapping
    h_t = LSTM(m_t, h_{t-1})                         recurrence (no peepholes)
    score_t = u_att . tanh(W_att h_t + b_att)        attention logit
    alpha = softmax(score), a = sum_t alpha_t h_t    temporal pooling
    e = [a; h_T]                                     latent representation
    yhat = w_head . e + b_head                       confidence, class = sign

Every function broadcasts over leading batch axes, so the same code
path serves a single (T, D) window and a batch (B, T, D).  All math is
float64; backward passes are exact adjoints of the forward code and are
validated against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import expit as sigmoid

from .errors import NumericError, ShapeError

PARAM_FIELDS = (
    "w_map", "b_map",
    "w_i", "b_i", "w_f", "b_f", "w_o", "b_o", "w_g", "b_g",
    "w_att", "b_att", "u_att",
    "w_head", "b_head",
)


@dataclass(frozen=True)
class ModelDims:
    """Layer sizes.  ``att_size`` defaults to ``hidden_size``."""

    feat_dim: int = 11
    map_size: int = 16
    hidden_size: int = 16
    att_size: int = 0

    def __post_init__(self):
        if self.att_size == 0:
            object.__setattr__(self, "att_size", self.hidden_size)
        for name in ("feat_dim", "map_size", "hidden_size", "att_size"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass
class ParamSet:
    """All trainable parameters.

    LSTM gate weights act on the concatenation [m_t; h_{t-1}], in the
    order input (i), forget (f), output (o), candidate (g).
    """

    w_map: np.ndarray  # (map, feat)
    b_map: np.ndarray  # (map,)
    w_i: np.ndarray    # (hidden, map + hidden)
    b_i: np.ndarray    # (hidden,)
    w_f: np.ndarray
    b_f: np.ndarray
    w_o: np.ndarray
    b_o: np.ndarray
    w_g: np.ndarray
    b_g: np.ndarray
    w_att: np.ndarray  # (att, hidden)
    b_att: np.ndarray  # (att,)
    u_att: np.ndarray  # (att,)
    w_head: np.ndarray  # (2 * hidden,)
    b_head: np.ndarray  # ()

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_FIELDS:
            yield name, getattr(self, name)

    @property
    def dims(self) -> ModelDims:
        return ModelDims(
            feat_dim=self.w_map.shape[1],
            map_size=self.w_map.shape[0],
            hidden_size=self.w_i.shape[0],
            att_size=self.w_att.shape[0],
        )

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, a in self.items()])

    def from_vector(self, vec: np.ndarray) -> "ParamSet":
        """New ParamSet with this one's shapes and ``vec``'s values."""
        vec = np.asarray(vec, dtype=np.float64)
        expected = sum(a.size for _, a in self.items())
        if vec.shape != (expected,):
            raise ShapeError(f"parameter vector must have shape ({expected},), got {vec.shape}")
        pieces = {}
        offset = 0
        for name, a in self.items():
            pieces[name] = vec[offset : offset + a.size].reshape(a.shape).copy()
            offset += a.size
        return ParamSet(**pieces)

    def zeros_like(self) -> "ParamSet":
        return ParamSet(**{name: np.zeros_like(a) for name, a in self.items()})

    def copy(self) -> "ParamSet":
        return ParamSet(**{name: a.copy() for name, a in self.items()})

    def l2_norm_sq(self) -> float:
        """Squared Frobenius norm over every parameter tensor.

        Overflows to inf rather than warning; callers treat non-finite
        objectives as divergence.
        """
        with np.errstate(over="ignore"):
            return float(sum(np.sum(a * a) for _, a in self.items()))


def init_params(dims: ModelDims, rng: np.random.Generator) -> ParamSet:
    """Seeded initialization: uniform(-r, r) with r = sqrt(6/(fan_in+fan_out))
    for weights, zeros for biases, except the forget-gate bias at 1.0."""

    def uniform(shape, fan_in, fan_out):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-r, r, size=shape)

    d, e, u, a = dims.feat_dim, dims.map_size, dims.hidden_size, dims.att_size
    z = e + u  # LSTM input width
    return ParamSet(
        w_map=uniform((e, d), d, e),
        b_map=np.zeros(e),
        w_i=uniform((u, z), z, u),
        b_i=np.zeros(u),
        w_f=uniform((u, z), z, u),
        b_f=np.full(u, 1.0),
        w_o=uniform((u, z), z, u),
        b_o=np.zeros(u),
        w_g=uniform((u, z), z, u),
        b_g=np.zeros(u),
        w_att=uniform((a, u), u, a),
        b_att=np.zeros(a),
        u_att=uniform((a,), a, 1),
        w_head=uniform((2 * u,), 2 * u, 1),
        b_head=np.zeros(()),
    )


@dataclass
class LstmTrace:
    """Cached LSTM activations, all (..., T, hidden) except z."""

    z: np.ndarray       # (..., T, map + hidden) gate inputs [m_t; h_{t-1}]
    gate_i: np.ndarray
    gate_f: np.ndarray
    gate_o: np.ndarray
    gate_g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


@dataclass
class AttentionTrace:
    proj: np.ndarray     # (..., T, att) tanh(W_att h + b_att)
    logits: np.ndarray   # (..., T)
    weights: np.ndarray  # (..., T) softmax over time
    pooled: np.ndarray   # (..., hidden)


@dataclass
class ForwardTrace:
    """Everything the backward pass (and perturbation injection) needs."""

    x: np.ndarray        # (..., T, feat)
    m: np.ndarray        # (..., T, map)
    lstm: LstmTrace
    att: AttentionTrace
    e: np.ndarray        # (..., 2 * hidden) = [pooled; h_T]
    yhat: np.ndarray     # (...,)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


def map_forward(x: np.ndarray, params: ParamSet) -> np.ndarray:
    """Feature mapping: tanh dense layer, (..., feat) -> (..., map)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.w_map.shape[1]:
        raise ShapeError(
            f"input feature dim {x.shape[-1]} != mapping dim {params.w_map.shape[1]}"
        )
    return np.tanh(x @ params.w_map.T + params.b_map)


def lstm_forward(m: np.ndarray, params: ParamSet) -> LstmTrace:
    """Run the LSTM over (..., T, map) starting from h_0 = c_0 = 0."""
    m = np.asarray(m, dtype=np.float64)
    u = params.w_i.shape[0]
    if m.shape[-1] + u != params.w_i.shape[1]:
        raise ShapeError(
            f"LSTM expects input width {params.w_i.shape[1] - u}, got {m.shape[-1]}"
        )
    steps = m.shape[-2]
    lead = m.shape[:-2]
    h = np.zeros(lead + (u,))
    c = np.zeros(lead + (u,))
    cache = {k: [] for k in ("z", "gate_i", "gate_f", "gate_o", "gate_g", "c", "tanh_c", "h")}
    for t in range(steps):
        z = np.concatenate([m[..., t, :], h], axis=-1)
        i = sigmoid(z @ params.w_i.T + params.b_i)
        f = sigmoid(z @ params.w_f.T + params.b_f)
        o = sigmoid(z @ params.w_o.T + params.b_o)
        g = np.tanh(z @ params.w_g.T + params.b_g)
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        for key, val in zip(cache, (z, i, f, o, g, c, tc, h)):
            cache[key].append(val)
    stacked = {k: np.stack(v, axis=-2) for k, v in cache.items()}
    return LstmTrace(**stacked)


def attention_forward(h_seq: np.ndarray, params: ParamSet) -> AttentionTrace:
    """Temporal attention over hidden states (..., T, hidden)."""
    h_seq = np.asarray(h_seq, dtype=np.float64)
    if h_seq.shape[-1] != params.w_att.shape[1]:
        raise ShapeError(
            f"attention expects hidden dim {params.w_att.shape[1]}, got {h_seq.shape[-1]}"
        )
    proj = np.tanh(h_seq @ params.w_att.T + params.b_att)
    logits = proj @ params.u_att
    weights = softmax(logits, axis=-1)
    pooled = np.einsum("...t,...tu->...u", weights, h_seq)
    return AttentionTrace(proj=proj, logits=logits, weights=weights, pooled=pooled)


def head_forward(
    pooled: np.ndarray, h_last: np.ndarray, params: ParamSet
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate [pooled; h_last] and apply the linear head.

    Returns (e, yhat); the final class is sign(yhat), with 0 -> +1.
    """
    e = np.concatenate([pooled, h_last], axis=-1)
    if e.shape[-1] != params.w_head.shape[0]:
        raise ShapeError(
            f"head expects representation dim {params.w_head.shape[0]}, got {e.shape[-1]}"
        )
    yhat = e @ params.w_head + params.b_head
    return e, yhat


def head_confidence(e: np.ndarray, params: ParamSet) -> np.ndarray:
    """Linear head on an (injected) representation: w_head . e + b_head."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape[-1] != params.w_head.shape[0]:
        raise ShapeError(
            f"head expects representation dim {params.w_head.shape[0]}, got {e.shape[-1]}"
        )
    return e @ params.w_head + params.b_head


def forward(x: np.ndarray, params: ParamSet) -> ForwardTrace:
    """Full forward pass over (..., T, feat), caching all activations."""
    x = np.asarray(x, dtype=np.float64)
    m = map_forward(x, params)
    lstm = lstm_forward(m, params)
    att = attention_forward(lstm.h, params)
    e, yhat = head_forward(att.pooled, lstm.h[..., -1, :], params)
    if not np.all(np.isfinite(yhat)):
        raise NumericError("forward pass produced non-finite confidence")
    return ForwardTrace(x=x, m=m, lstm=lstm, att=att, e=e, yhat=yhat)


def predict(x: np.ndarray, params: ParamSet) -> np.ndarray:
    """Confidence values only; class is sign(yhat) with 0 -> +1."""
    return forward(x, params).yhat


def classify(yhat: np.ndarray) -> np.ndarray:
    return np.where(np.asarray(yhat) >= 0.0, 1.0, -1.0)


def _sum_batch(a: np.ndarray, keep: int) -> np.ndarray:
    """Sum over every axis except the trailing ``keep`` axes."""
    extra = a.ndim - keep
    if extra <= 0:
        return a
    return a.sum(axis=tuple(range(extra)))


def _contract_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sum over leading axes of outer(a[..., :], b[..., :]) -> (A, B)."""
    rows = a.shape[-1]
    cols = b.shape[-1]
    return a.reshape(-1, rows).T @ b.reshape(-1, cols)


def backward(
    params: ParamSet,
    trace: ForwardTrace,
    d_yhat: np.ndarray,
    d_yhat_adv: np.ndarray | None = None,
    e_adv: np.ndarray | None = None,
) -> tuple[ParamSet, np.ndarray]:
    """Exact gradients of a scalar loss given upstream dLoss/dyhat.

    ``d_yhat`` has the trace's batch shape.  When ``d_yhat_adv`` and
    ``e_adv`` are given, a second head evaluation at the injected
    representation ``e_adv`` contributes too: its head gradients use
    ``e_adv`` and its representation gradient flows back through the
    clean trace (the injected offset is treated as a constant).

    Returns (parameter gradients, dLoss/de).
    """
    d_yhat = np.asarray(d_yhat, dtype=np.float64)
    if d_yhat.shape != trace.yhat.shape:
        raise ShapeError(f"upstream shape {d_yhat.shape} != confidence shape {trace.yhat.shape}")
    grads = params.zeros_like()

    # Linear head, clean branch.
    grads.w_head += _sum_batch(d_yhat[..., None] * trace.e, 1)
    grads.b_head += np.sum(d_yhat)
    d_e = d_yhat[..., None] * params.w_head

    # Optional branch resumed from a perturbed representation.
    if d_yhat_adv is not None:
        if e_adv is None:
            raise ShapeError("d_yhat_adv requires e_adv")
        d_yhat_adv = np.asarray(d_yhat_adv, dtype=np.float64)
        grads.w_head += _sum_batch(d_yhat_adv[..., None] * e_adv, 1)
        grads.b_head += np.sum(d_yhat_adv)
        d_e = d_e + d_yhat_adv[..., None] * params.w_head

    _backward_from_e(params, trace, d_e, grads)
    return grads, d_e


def _backward_from_e(
    params: ParamSet, trace: ForwardTrace, d_e: np.ndarray, grads: ParamSet
) -> None:
    """Accumulate gradients below the head, given dLoss/de."""
    u = params.w_i.shape[0]
    e_map = params.w_map.shape[0]
    h_seq = trace.lstm.h
    alpha = trace.att.weights

    d_pooled = d_e[..., :u]
    d_h_last = d_e[..., u:]

    # Attention: pooled = sum_t alpha_t h_t, alpha = softmax(logits),
    # logits_t = u_att . tanh(W_att h_t + b_att).
    d_alpha = np.einsum("...u,...tu->...t", d_pooled, h_seq)
    d_logits = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=-1, keepdims=True))
    proj = trace.att.proj
    grads.u_att += _sum_batch(d_logits[..., None] * proj, 1)
    d_pre_att = (d_logits[..., None] * params.u_att) * (1.0 - proj * proj)
    grads.w_att += _contract_outer(d_pre_att, h_seq)
    grads.b_att += _sum_batch(d_pre_att, 1)
    d_h_seq = np.einsum("...ta,au->...tu", d_pre_att, params.w_att) \
        + alpha[..., None] * d_pooled[..., None, :]

    # LSTM backward through time.
    steps = h_seq.shape[-2]
    lt = trace.lstm
    d_h_next = d_h_last.copy()
    d_c_next = np.zeros_like(d_h_last)
    d_m = np.zeros_like(trace.m)
    for t in reversed(range(steps)):
        i = lt.gate_i[..., t, :]
        f = lt.gate_f[..., t, :]
        o = lt.gate_o[..., t, :]
        g = lt.gate_g[..., t, :]
        tc = lt.tanh_c[..., t, :]
        z = lt.z[..., t, :]
        c_prev = lt.c[..., t - 1, :] if t > 0 else np.zeros_like(tc)

        d_h = d_h_seq[..., t, :] + d_h_next
        d_o = d_h * tc
        d_c = d_c_next + d_h * o * (1.0 - tc * tc)
        d_pre_i = (d_c * g) * i * (1.0 - i)
        d_pre_f = (d_c * c_prev) * f * (1.0 - f)
        d_pre_o = d_o * o * (1.0 - o)
        d_pre_g = (d_c * i) * (1.0 - g * g)

        grads.w_i += _contract_outer(d_pre_i, z)
        grads.w_f += _contract_outer(d_pre_f, z)
        grads.w_o += _contract_outer(d_pre_o, z)
        grads.w_g += _contract_outer(d_pre_g, z)
        grads.b_i += _sum_batch(d_pre_i, 1)
        grads.b_f += _sum_batch(d_pre_f, 1)
        grads.b_o += _sum_batch(d_pre_o, 1)
        grads.b_g += _sum_batch(d_pre_g, 1)

        d_z = (
            d_pre_i @ params.w_i
            + d_pre_f @ params.w_f
            + d_pre_o @ params.w_o
            + d_pre_g @ params.w_g
        )
        d_m[..., t, :] = d_z[..., :e_map]
        d_h_next = d_z[..., e_map:]
        d_c_next = d_c * f

    # Feature mapping.
    d_pre_m = d_m * (1.0 - trace.m * trace.m)
    grads.w_map += _contract_outer(d_pre_m, trace.x)
    grads.b_map += _sum_batch(d_pre_m, 1)
