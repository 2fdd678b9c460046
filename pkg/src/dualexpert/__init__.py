"""Few-shot adaptation of precomputed vision-language embeddings with two
identity-initialized adapter heads, L1 logit-consistency priors, and a
Jeffreys-divergence consensus term."""

from .config import TrainConfig
from .store import (
    EmbeddingMatrix,
    ShotTask,
    TaskData,
    TaskManifest,
    l2_normalize,
    load_feature_file,
    load_manifest,
    load_task_data,
    sample_k_shot,
    save_feature_file,
    save_manifest,
)
from .experts import (
    ExpertOutputs,
    ExpertParams,
    fi_forward,
    fr_forward,
    fuse_logits,
    init_params,
    load_params,
    predict,
    save_params,
)
from .objectives import (
    Grads,
    LossBreakdown,
    batch_losses,
    ce_loss,
    consensus_loss,
    cosine_logits,
    expected_l1_deviation,
    finite_diff_check,
    l1_consistency,
    total_loss_and_grad,
)
from .geometry import (
    fisher_rao_distance,
    geodesic_residual_order,
    jeffreys,
    kl_divergence,
    laplace_neg_log_prior,
    softmax_temp,
)
from .trainer import LrSchedule, TrainHistory, evaluate, lr_at, train
from .bench import (
    ABLATION_GRID,
    AblationConfig,
    RunReport,
    SyntheticSpec,
    make_synthetic_task,
    run_ablation,
    run_shots_sweep,
    verify_theorems,
)

__version__ = "0.1.0"
