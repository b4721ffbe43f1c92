"""Linear Memory Networks: a nonlinear functional component paired with a
linear sequence-autoencoder memory, with closed-form pretraining."""
__version__ = "0.1.0"

from .errors import ConvergenceError, InvalidInputError, LMNError, NumericError
from .linalg import SvdResult, gram_svd, rank_estimate, svd
from .seqae import AutoencoderParams, build_data_matrix, decode_step, encode, fit, reconstruct, reconstruction_error
from .model import (
    LMNParams,
    RNNParams,
    UnfoldedParams,
    init_lmn,
    init_rnn,
    init_unfolded,
    lmn_forward,
    parameter_count,
    rnn_forward,
    unfolded_forward,
)
from .train import TrainConfig, adam_step, bce_loss, grad_check, train_loop
from .pretrain import PretrainConfig, build_decoder_stack, fidelity_report, pretrain_pipeline, transfer_weights
from .data import frame_accuracy, load_dataset, make_synthetic, to_frames
