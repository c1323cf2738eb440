"""LSTM layer plus fully-connected head, forward and backward.

Gate pre-activations are stacked in the order input, forget, cell
candidate, output, so ``W`` is ``(4H, in)``, ``U`` is ``(4H, H)`` and ``b``
is ``(4H,)``. Row blocks of the stacked arrays are the per-gate matrices.

    i = sigmoid(W_i x + U_i h + b_i)
    f = sigmoid(W_f x + U_f h + b_f)
    g = tanh(W_g x + U_g h + b_g)
    o = sigmoid(W_o x + U_o h + b_o)
    c' = f * c + i * g
    h' = o * tanh(c')
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from circumnav.controller import TargetEstimate

INPUT_SIZE = 4
OUTPUT_SIZE = 4
TENSOR_NAMES = ("W", "U", "b", "fc_W", "fc_b")


class ShapeMismatch(ValueError):
    pass


class WrongWindowLength(ValueError):
    pass


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray
    fc_W: np.ndarray
    fc_b: np.ndarray

    def __post_init__(self):
        H = self.U.shape[1] if self.U.ndim == 2 else -1
        ok = (
            self.U.shape == (4 * H, H)
            and self.W.ndim == 2
            and self.W.shape[0] == 4 * H
            and self.b.shape == (4 * H,)
            and self.fc_W.ndim == 2
            and self.fc_W.shape[1] == H
            and self.fc_b.shape == (self.fc_W.shape[0],)
        )
        if not ok:
            shapes = {n: getattr(self, n).shape for n in TENSOR_NAMES}
            raise ShapeMismatch(f"inconsistent LSTM parameter shapes: {shapes}")

    @property
    def hidden_size(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    @property
    def output_size(self) -> int:
        return self.fc_W.shape[0]

    def gate(self, name: str, gate: str) -> np.ndarray:
        """Per-gate block, e.g. ``p.gate("W", "f")`` is ``W_f``."""
        k = "ifgo".index(gate)
        H = self.hidden_size
        return getattr(self, name)[k * H : (k + 1) * H]

    def tensors(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in TENSOR_NAMES}

    def map(self, fn) -> LstmParams:
        return LstmParams(*(fn(getattr(self, n)) for n in TENSOR_NAMES))

    def zip_map(self, other: LstmParams, fn) -> LstmParams:
        return LstmParams(*(fn(getattr(self, n), getattr(other, n)) for n in TENSOR_NAMES))

    def copy(self) -> LstmParams:
        return self.map(np.copy)

    def zeros_like(self) -> LstmParams:
        return self.map(np.zeros_like)

    def is_finite(self) -> bool:
        return all(np.isfinite(t).all() for t in self.tensors().values())

    def equals(self, other: LstmParams) -> bool:
        return all(np.array_equal(getattr(self, n), getattr(other, n)) for n in TENSOR_NAMES)


# gradients share the parameter layout
Gradients = LstmParams


def init_params(
    hidden: int, seed: int, input_size: int = INPUT_SIZE, output_size: int = OUTPUT_SIZE
) -> LstmParams:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases except the forget
    gate bias, which starts at 1."""
    if hidden < 1:
        raise ValueError(f"hidden size must be >= 1, got {hidden}")
    rng = np.random.default_rng(seed)
    k = 1.0 / np.sqrt(hidden)
    W = rng.uniform(-k, k, (4 * hidden, input_size))
    U = rng.uniform(-k, k, (4 * hidden, hidden))
    fc_W = rng.uniform(-k, k, (output_size, hidden))
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0
    return LstmParams(W, U, b, fc_W, np.zeros(output_size))


@dataclass(frozen=True)
class LstmState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> LstmState:
        return cls(np.zeros(hidden), np.zeros(hidden))


def lstm_cell_forward(x: np.ndarray, state: LstmState, p: LstmParams) -> LstmState:
    x = np.asarray(x, dtype=float)
    H = p.hidden_size
    if x.shape != (p.input_size,) or state.h.shape != (H,) or state.c.shape != (H,):
        raise ShapeMismatch(
            f"x {x.shape}, h {state.h.shape}, c {state.c.shape} vs input {p.input_size}, hidden {H}"
        )
    z = p.W @ x + p.U @ state.h + p.b
    i = sigmoid(z[:H])
    f = sigmoid(z[H : 2 * H])
    g = np.tanh(z[2 * H : 3 * H])
    o = sigmoid(z[3 * H :])
    c = f * state.c + i * g
    return LstmState(o * np.tanh(c), c)


@dataclass
class ForwardCache:
    x: np.ndarray  # (B, L, in)
    h: np.ndarray  # (L + 1, B, H), h[0] is the zero initial state
    c: np.ndarray  # (L + 1, B, H)
    gates: np.ndarray  # (L, B, 4H) post-activation i, f, g, o
    tanh_c: np.ndarray  # (L, B, H)


def forward_batch(X: np.ndarray, p: LstmParams, cache: bool = False):
    """Run a batch of windows ``X`` of shape ``(B, L, in)`` oldest first.

    Returns the ``(B, out)`` head output, plus the activation cache when
    ``cache`` is set.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[2] != p.input_size:
        raise ShapeMismatch(f"expected (B, L, {p.input_size}) windows, got {X.shape}")
    B, L, _ = X.shape
    H = p.hidden_size
    # input projections for every step at once
    Zx = X @ p.W.T + p.b  # (B, L, 4H)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    if cache:
        hs = np.empty((L + 1, B, H))
        cs = np.empty((L + 1, B, H))
        gates = np.empty((L, B, 4 * H))
        tcs = np.empty((L, B, H))
        hs[0] = h
        cs[0] = c
    UT = p.U.T
    for t in range(L):
        z = Zx[:, t] + h @ UT
        a = np.empty_like(z)
        a[:, : 2 * H] = sigmoid(z[:, : 2 * H])
        a[:, 2 * H : 3 * H] = np.tanh(z[:, 2 * H : 3 * H])
        a[:, 3 * H :] = sigmoid(z[:, 3 * H :])
        c = a[:, H : 2 * H] * c + a[:, :H] * a[:, 2 * H : 3 * H]
        tc = np.tanh(c)
        h = a[:, 3 * H :] * tc
        if cache:
            hs[t + 1] = h
            cs[t + 1] = c
            gates[t] = a
            tcs[t] = tc
    y = h @ p.fc_W.T + p.fc_b
    if cache:
        return y, ForwardCache(X, hs, cs, gates, tcs)
    return y


def backward_batch(fc: ForwardCache, dY: np.ndarray, p: LstmParams) -> Gradients:
    """Gradient of ``sum(Y * dY)`` with respect to every parameter (BPTT
    through the whole window)."""
    dY = np.asarray(dY, dtype=float)
    L, B, H = fc.tanh_c.shape
    if dY.shape != (B, p.output_size):
        raise ShapeMismatch(f"output cotangent {dY.shape} vs ({B}, {p.output_size})")
    g = p.zeros_like()
    g.fc_W[...] = dY.T @ fc.h[L]
    g.fc_b[...] = dY.sum(axis=0)
    dh = dY @ p.fc_W
    dc = np.zeros((B, H))
    dz = np.empty((L, B, 4 * H))
    for t in range(L - 1, -1, -1):
        a = fc.gates[t]
        i, f, gg, o = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
        tc = fc.tanh_c[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        d = dz[t]
        d[:, :H] = dc * gg * i * (1.0 - i)
        d[:, H : 2 * H] = dc * fc.c[t] * f * (1.0 - f)
        d[:, 2 * H : 3 * H] = dc * i * (1.0 - gg * gg)
        d[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc = dc * f
        dh = d @ p.U
    # weight gradients accumulated over all steps in single contractions
    dz2 = dz.reshape(L * B, 4 * H)
    g.W[...] = dz2.T @ fc.x.transpose(1, 0, 2).reshape(L * B, -1)
    g.U[...] = dz2.T @ fc.h[:L].reshape(L * B, H)
    g.b[...] = dz2.sum(axis=0)
    return g


def _as_window(window) -> np.ndarray:
    if hasattr(window, "__len__") and len(window) and hasattr(window[0], "as_array"):
        return np.stack([o.as_array() for o in window])
    return np.asarray(window, dtype=float)


def model_forward(window, p: LstmParams, window_length: int | None = None) -> TargetEstimate:
    """Fold the cell over ``window`` (oldest first) from a zero state and map
    the final hidden state to ``[d_x, d_y, v_x, v_y]``."""
    X = _as_window(window)
    if window_length is not None and len(X) != window_length:
        raise WrongWindowLength(f"window has {len(X)} observations, model expects {window_length}")
    y = forward_batch(X[None], p)[0]
    return TargetEstimate.from_array(y)


def model_backward(window, p: LstmParams, loss_grad) -> Gradients:
    X = _as_window(window)
    _, fc = forward_batch(X[None], p, cache=True)
    return backward_batch(fc, np.asarray(loss_grad, dtype=float)[None], p)


def mse_loss(pred, target) -> tuple[float, np.ndarray]:
    """Mean over the last axis (and over the batch, if any) of squared error,
    with its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=float)
    diff = pred - np.asarray(target, dtype=float)
    loss = float(np.mean(diff * diff))
    return loss, 2.0 * diff / diff.size


@dataclass
class LstmModel:
    """Parameters plus the input/output conventions they were trained with.

    Inputs are ``[phi_x, phi_y, vA_x, vA_y]``; the velocity entries are
    multiplied by ``input_velocity_scale`` before entering the network, and
    the network output is divided by ``target_scale``.
    """

    params: LstmParams
    window: int
    input_velocity_scale: float = 1.0
    target_scale: float = 1.0

    def scale_inputs(self, X: np.ndarray) -> np.ndarray:
        if self.input_velocity_scale == 1.0:
            return X
        s = np.array([1.0, 1.0, self.input_velocity_scale, self.input_velocity_scale])
        return X * s

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Estimates for a batch of raw windows ``(B, L, 4)``."""
        return forward_batch(self.scale_inputs(X), self.params) / self.target_scale

    def estimate(self, window) -> TargetEstimate:
        X = _as_window(window)
        if len(X) != self.window:
            raise WrongWindowLength(f"window has {len(X)} observations, model expects {self.window}")
        return TargetEstimate.from_array(self.predict(X[None])[0])

    def replace(self, **kw) -> LstmModel:
        return dataclasses.replace(self, **kw)
