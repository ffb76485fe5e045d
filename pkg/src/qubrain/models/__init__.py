"""The seven benchmark architectures and their training procedures."""

from .base import Model
from .classical import ANN, LSTMModel, SNN, ann_forward, lstm_model_forward, snn_forward
from .hybrid import HybridModel, hybrid_forward
from .quantum import (
    QLIFCell,
    QLSTMGateBank,
    QLSTMModel,
    QNN,
    QSNN,
    embed_hidden,
    qlif_step,
    qlstm_cell_step,
    qlstm_model_forward,
    qnn_forward,
    qsnn_forward,
)
from .training import (
    MODEL_IDS,
    REFERENCE_CONFIGS,
    EXPECTED_PARAM_COUNTS,
    TrainConfig,
    build_model,
    count_parameters,
    evaluate,
    phase_one,
    phase_three,
    phase_two,
    seed_streams,
    train_hybrid_three_phase,
    train_model,
)
