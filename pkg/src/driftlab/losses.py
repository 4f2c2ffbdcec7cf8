"""Training objectives with values and exact analytic gradients.

Covers the symmetric contrastive loss, the teacher-row screening rule, KL
alignment of softmaxed similarity matrices, the combined screened-distillation
objective, its unscreened variant, and the EWC quadratic penalty.

Gradients are with respect to the unit embeddings (or, for EWC, the raw
parameters); the encoder's normalization Jacobian is applied separately by
``encoder.encode_backward``.

Distillation normalization: the similarity matrices contain raw cosines in
[-1, 1], so a literal probability reading is undefined for negative entries.
Each row (and, for the symmetric term, each column) is converted to a
distribution with a softmax at ``distill_tau`` before the KL is taken. This
is the distribution a temperature-scaled retrieval model actually induces;
``distill_tau`` defaults to 1.0 and is exposed everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .encoder import DualEncoderSnapshot, encode
from .errors import (
    DimensionMismatchError,
    NonpositiveTemperatureError,
    ShapeMismatchError,
)
from .linalg import as_matrix, cosine_matrix, diagonal_is_argmax


@dataclass(frozen=True)
class EmbeddingGrads:
    """Loss value plus gradients w.r.t. the two embedding batches."""

    value: float
    grad_v: np.ndarray
    grad_l: np.ndarray


@dataclass(frozen=True)
class MatrixGrad:
    """Loss value plus gradient w.r.t. the student similarity matrix."""

    value: float
    grad: np.ndarray


def _check_pair(v: np.ndarray, l: np.ndarray) -> None:
    if v.shape != l.shape:
        raise DimensionMismatchError(f"embedding shapes differ: {v.shape} vs {l.shape}")


def _check_tau(tau: float, name: str = "tau") -> None:
    if not tau > 0:
        raise NonpositiveTemperatureError(f"{name} must be > 0, got {tau}")


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def infonce(v, l, tau: float) -> EmbeddingGrads:
    """Symmetric contrastive loss over the scaled similarity matrix.

    value = mean of the two directional cross-entropies: rows treat the
    diagonal as the target over columns, columns symmetrically over rows.
    """
    v = as_matrix(v)
    l = as_matrix(l)
    _check_pair(v, l)
    _check_tau(tau)
    n = v.shape[0]
    m = cosine_matrix(v, l)
    logits = m / tau
    p_row = _softmax(logits, axis=1)
    p_col = _softmax(logits, axis=0)
    idx = np.arange(n)
    # -log softmax at the diagonal, computed stably from the softmax itself.
    shifted_r = logits - logits.max(axis=1, keepdims=True)
    lse_r = np.log(np.exp(shifted_r).sum(axis=1)) + logits.max(axis=1)
    shifted_c = logits - logits.max(axis=0, keepdims=True)
    lse_c = np.log(np.exp(shifted_c).sum(axis=0)) + logits.max(axis=0)
    ce_rows = float(np.mean(lse_r - logits[idx, idx]))
    ce_cols = float(np.mean(lse_c - logits[idx, idx]))
    value = 0.5 * (ce_rows + ce_cols)
    dm = p_row.copy()
    dm[idx, idx] -= 1.0
    dmc = p_col.copy()
    dmc[idx, idx] -= 1.0
    dm = (dm + dmc) * (0.5 / (n * tau))
    return EmbeddingGrads(value, dm @ l, dm.T @ v)


def screen(m_old, m_new) -> np.ndarray:
    """Replace misretrieved teacher rows with the student's rows.

    A teacher row is misretrieved when its argmax is off the diagonal
    (exact ties favor the diagonal; the teacher is then not demonstrably
    wrong). The replacement copies the student row verbatim, regardless of
    whether the student row itself retrieves correctly.
    """
    m_old = as_matrix(m_old)
    m_new = as_matrix(m_new)
    if m_old.shape != m_new.shape or m_old.shape[0] != m_old.shape[1]:
        raise DimensionMismatchError(
            f"need equal square matrices, got {m_old.shape} and {m_new.shape}"
        )
    keep = diagonal_is_argmax(m_old)
    out = m_old.copy()
    out[~keep] = m_new[~keep]
    return out


def _kl_directed(m_new: np.ndarray, m_old: np.ndarray, tau: float, axis: int):
    """Mean KL(teacher row/col || student row/col) under softmax at tau."""
    n = m_new.shape[0]
    p = _softmax(m_old / tau, axis=axis)
    q = _softmax(m_new / tau, axis=axis)
    value = float(np.sum(p * (np.log(p) - np.log(q)))) / n
    grad = (q - p) / (n * tau)
    return value, grad


def kl_alignment(m_new, m_old_screened, distill_tau: float) -> MatrixGrad:
    """Symmetric KL between teacher and student similarity distributions.

    value = 0.5 * (mean row KL + mean column KL), with the teacher matrix
    held constant; the gradient flows into ``m_new`` only.
    """
    m_new = as_matrix(m_new)
    m_old = as_matrix(m_old_screened)
    if m_new.shape != m_old.shape or m_new.shape[0] != m_new.shape[1]:
        raise DimensionMismatchError(
            f"need equal square matrices, got {m_new.shape} and {m_old.shape}"
        )
    _check_tau(distill_tau, "distill_tau")
    row_v, row_g = _kl_directed(m_new, m_old, distill_tau, axis=1)
    col_v, col_g = _kl_directed(m_new, m_old, distill_tau, axis=0)
    return MatrixGrad(0.5 * (row_v + col_v), 0.5 * (row_g + col_g))


def _distill_loss(
    v_t,
    l_t,
    old: DualEncoderSnapshot,
    vision_inputs,
    language_inputs,
    tau: float,
    alpha: float,
    distill_tau: float,
    screened: bool,
) -> EmbeddingGrads:
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    base = infonce(v_t, l_t, tau)
    if alpha == 0:
        return base
    v_t = as_matrix(v_t)
    l_t = as_matrix(l_t)
    v_old = encode(old.vision, vision_inputs)
    l_old = encode(old.language, language_inputs)
    m_old = cosine_matrix(v_old, l_old)
    m_new = cosine_matrix(v_t, l_t)
    teacher = screen(m_old, m_new) if screened else m_old
    kl = kl_alignment(m_new, teacher, distill_tau)
    return EmbeddingGrads(
        base.value + alpha * kl.value,
        base.grad_v + alpha * (kl.grad @ l_t),
        base.grad_l + alpha * (kl.grad.T @ v_t),
    )


def modx_loss(
    v_t,
    l_t,
    old: DualEncoderSnapshot,
    vision_inputs,
    language_inputs,
    tau: float,
    alpha: float,
    distill_tau: float = 1.0,
) -> EmbeddingGrads:
    """Contrastive loss plus screened teacher-matrix distillation.

    The teacher matrix is recomputed from the frozen ``old`` snapshot on the
    current batch, misretrieved rows are screened out, and the student's
    similarity distributions are pulled toward the result with weight
    ``alpha``. At alpha = 0 this returns the plain contrastive result
    bit-identically.
    """
    return _distill_loss(
        v_t, l_t, old, vision_inputs, language_inputs, tau, alpha, distill_tau, True
    )


def unscreened_distill_loss(
    v_t,
    l_t,
    old: DualEncoderSnapshot,
    vision_inputs,
    language_inputs,
    tau: float,
    alpha: float,
    distill_tau: float = 1.0,
) -> EmbeddingGrads:
    """Distillation baseline identical to modx_loss minus the screening step."""
    return _distill_loss(
        v_t, l_t, old, vision_inputs, language_inputs, tau, alpha, distill_tau, False
    )


@dataclass
class FisherDiag:
    """Diagonal Fisher estimate plus the anchor parameters it was taken at.

    Both lists shape-mirror ``DualEncoderSnapshot.param_arrays()``.
    """

    fisher: List[np.ndarray]
    anchor: List[np.ndarray]

    def __post_init__(self):
        if len(self.fisher) != len(self.anchor):
            raise ShapeMismatchError("fisher and anchor lengths differ")
        for f, a in zip(self.fisher, self.anchor):
            if f.shape != a.shape:
                raise ShapeMismatchError(f"fisher {f.shape} vs anchor {a.shape}")
            if np.any(f < 0):
                raise ShapeMismatchError("fisher entries must be >= 0")


@dataclass(frozen=True)
class ParamPenalty:
    """Penalty value plus gradients mirroring the parameter list."""

    value: float
    grads: List[np.ndarray]


def ewc_penalty(params: Sequence[np.ndarray], fisher: FisherDiag, lam: float) -> ParamPenalty:
    """(lam/2) * sum_k F_k (theta_k - theta*_k)^2 with gradient lam*F_k*(theta_k - theta*_k)."""
    if lam < 0:
        raise ShapeMismatchError(f"lambda must be >= 0, got {lam}")
    if len(params) != len(fisher.fisher):
        raise ShapeMismatchError(
            f"parameter count {len(params)} != fisher count {len(fisher.fisher)}"
        )
    value = 0.0
    grads: List[np.ndarray] = []
    for theta, f, anchor in zip(params, fisher.fisher, fisher.anchor):
        if theta.shape != f.shape:
            raise ShapeMismatchError(f"param {theta.shape} vs fisher {f.shape}")
        delta = theta - anchor
        value += 0.5 * lam * float(np.sum(f * delta * delta))
        grads.append(lam * f * delta)
    return ParamPenalty(value, grads)


def contrastive_param_grads(
    snapshot: DualEncoderSnapshot, vision_inputs, language_inputs, tau: float
) -> List[np.ndarray]:
    """Contrastive-loss gradients w.r.t. every parameter of both branches."""
    from .encoder import encode_backward, encode_with_cache

    v, cache_v = encode_with_cache(snapshot.vision, vision_inputs)
    l, cache_l = encode_with_cache(snapshot.language, language_inputs)
    res = infonce(v, l, tau)
    gv = encode_backward(snapshot.vision, vision_inputs, res.grad_v, cache_v)
    gl = encode_backward(snapshot.language, language_inputs, res.grad_l, cache_l)
    return gv.arrays() + gl.arrays()


def estimate_fisher(
    snapshot: DualEncoderSnapshot,
    batches: Sequence[Tuple[np.ndarray, np.ndarray]],
    tau: float,
) -> FisherDiag:
    """Mean squared contrastive parameter gradient over a pass of batches."""
    if not batches:
        raise ShapeMismatchError("fisher estimation needs at least one batch")
    acc: List[np.ndarray] = [np.zeros_like(a) for a in snapshot.param_arrays()]
    for vis, lang in batches:
        grads = contrastive_param_grads(snapshot, vis, lang, tau)
        for slot, g in zip(acc, grads):
            slot += g * g
    n = float(len(batches))
    fisher = [a / n for a in acc]
    anchor = [a.copy() for a in snapshot.param_arrays()]
    return FisherDiag(fisher, anchor)
