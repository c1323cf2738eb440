"""Adam and global-norm gradient clipping over :class:`LstmParams`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from circumnav.neural.lstm import TENSOR_NAMES, Gradients, LstmParams

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    m: LstmParams
    v: LstmParams
    t: int = 0

    @classmethod
    def fresh(cls, p: LstmParams) -> AdamState:
        return cls(p.zeros_like(), p.zeros_like(), 0)


def adam_step(
    p: LstmParams,
    g: Gradients,
    state: AdamState,
    lr: float = 0.001,
    beta1: float = BETA1,
    beta2: float = BETA2,
    eps: float = EPS,
) -> tuple[LstmParams, AdamState]:
    """One bias-corrected Adam update. Returns new parameters and moments;
    the inputs are left untouched."""
    t = state.t + 1
    m = state.m.zip_map(g, lambda m_, g_: beta1 * m_ + (1 - beta1) * g_)
    v = state.v.zip_map(g, lambda v_, g_: beta2 * v_ + (1 - beta2) * g_ * g_)
    c1 = 1 - beta1**t
    c2 = 1 - beta2**t
    new = {}
    for n in TENSOR_NAMES:
        m_hat = getattr(m, n) / c1
        v_hat = getattr(v, n) / c2
        new[n] = getattr(p, n) - lr * m_hat / (np.sqrt(v_hat) + eps)
    return LstmParams(**new), AdamState(m, v, t)


def global_norm(g: Gradients) -> float:
    return float(np.sqrt(sum(float(np.sum(t * t)) for t in g.tensors().values())))


def clip_global_norm(g: Gradients, max_norm: float) -> tuple[Gradients, float]:
    norm = global_norm(g)
    if max_norm is None or norm <= max_norm or norm == 0:
        return g, norm
    scale = max_norm / norm
    return g.map(lambda t: t * scale), norm
