"""Continual dual-encoder contrastive training lab with drift diagnostics."""

from .analysis import (
    AngleHistogram,
    IMAV_BINS,
    RAM_BINS,
    RetrievalReport,
    SAM_BINS,
    bin_angles,
    imav,
    ram,
    recall_at_k,
    rotation_flip_demo,
    sam,
    sam_delta_hist,
)
from .datastream import (
    DomainSpec,
    PhaseDataset,
    ReplayBuffer,
    buffer_update,
    generate_domain,
    read_dataset_csv,
    split_phases,
    write_dataset_csv,
)
from .encoder import (
    DualEncoderSnapshot,
    MlpParams,
    MlpSpec,
    encode,
    encode_backward,
    init_params,
    init_snapshot,
    read_snapshot,
    write_snapshot,
)
from .experiment import (
    Benchmark,
    ExperimentConfig,
    PhaseRecord,
    alpha_sweep,
    build_benchmark,
    pretrain,
    run_continual,
    run_experiment,
)
from .linalg import (
    angle_deg,
    cosine_matrix,
    l2_normalize_rows,
    negate_identity,
    plane_rotation,
    random_rotation,
)
from .losses import (
    FisherDiag,
    ewc_penalty,
    infonce,
    kl_alignment,
    modx_loss,
    screen,
    unscreened_distill_loss,
)
from .optim import OptimizerConfig, OptimizerState, adamw_step, init_state, lr_at

__version__ = "0.1.0"
