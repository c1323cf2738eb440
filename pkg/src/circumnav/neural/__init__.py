"""Many-to-one LSTM target estimator written directly on numpy."""

from circumnav.neural.lstm import (
    ForwardCache,
    LstmModel,
    LstmParams,
    LstmState,
    ShapeMismatch,
    WrongWindowLength,
    forward_batch,
    backward_batch,
    init_params,
    lstm_cell_forward,
    model_backward,
    model_forward,
    mse_loss,
)
from circumnav.neural.optim import AdamState, adam_step, clip_global_norm
from circumnav.neural.weights import (
    ChecksumMismatch,
    VersionMismatch,
    WeightFileError,
    load_weights,
    read_header,
    save_weights,
)

__all__ = [
    "AdamState",
    "ChecksumMismatch",
    "ForwardCache",
    "LstmModel",
    "LstmParams",
    "LstmState",
    "ShapeMismatch",
    "VersionMismatch",
    "WeightFileError",
    "WrongWindowLength",
    "adam_step",
    "backward_batch",
    "clip_global_norm",
    "forward_batch",
    "init_params",
    "load_weights",
    "lstm_cell_forward",
    "model_backward",
    "model_forward",
    "mse_loss",
    "read_header",
    "save_weights",
]
