"""Physics-infused neural surrogates.

A small reverse-mode AD tape drives three model families: a pure data-driven
MLP, a sequential hybrid (physics output as an extra input feature), and a
transfer network whose outputs feed a differentiable partial-physics head.
Kernels run on a compiled backend when available, pure numpy otherwise
(OPTMANET_BACKEND overrides).
"""

from ._backend import BACKEND_NAME
from .data import (
    Dataset,
    FieldOracle,
    canonical_hash,
    default_full_physics_oracle,
    gen_acoustic,
    gen_gramacy,
    load_csv,
    save_csv,
)
from .errors import (
    ConfigError,
    ContractError,
    DomainError,
    GradientError,
    OptmanetError,
    ParseError,
)
from .evaluation import (
    ACOUSTIC_HYPER,
    GRAMACY_HYPER,
    ExperimentConfig,
    NormStats,
    TrainResult,
    aggregate_runs,
    derive_seed,
    emit_scatter,
    format_report,
    load_experiment_config,
    load_report,
    mse_normalized,
    parse_experiment_config,
    relative_error,
    rmse_normalized,
    run_experiment,
    save_report,
    save_scatter_csv,
    train_model,
)
from .models import (
    FAMILIES,
    PROBLEMS,
    Model,
    ModelSpec,
    build_model,
    extract_transfer_features,
    forward,
    physics_feature,
    predict,
)
from .network import (
    AdamState,
    MlpSpec,
    PlateauScheduler,
    adam_step,
    init_params,
    load_params,
    mlp_forward,
    mse_loss,
    save_params,
)
from .physics import (
    PhysicsConfig,
    default_partial_config,
    fp1_oracle,
    fp2_inner,
    fp2_oracle,
    gramacy_pp,
    gramacy_pp_np,
    monopole_spl,
    monopole_spl_np,
)
from .split import split_percentage, split_quadrant, split_radial
from .tape import GradCheckReport, Gradients, Tape, Tensor, constant, grad_check

__version__ = "0.1.0"

__all__ = [
    "ACOUSTIC_HYPER",
    "AdamState",
    "BACKEND_NAME",
    "ConfigError",
    "ContractError",
    "Dataset",
    "DomainError",
    "ExperimentConfig",
    "FAMILIES",
    "FieldOracle",
    "GradCheckReport",
    "GradientError",
    "Gradients",
    "GRAMACY_HYPER",
    "MlpSpec",
    "Model",
    "ModelSpec",
    "NormStats",
    "OptmanetError",
    "ParseError",
    "PhysicsConfig",
    "PlateauScheduler",
    "PROBLEMS",
    "Tape",
    "Tensor",
    "TrainResult",
    "adam_step",
    "aggregate_runs",
    "build_model",
    "canonical_hash",
    "constant",
    "default_full_physics_oracle",
    "default_partial_config",
    "derive_seed",
    "emit_scatter",
    "extract_transfer_features",
    "format_report",
    "forward",
    "fp1_oracle",
    "fp2_inner",
    "fp2_oracle",
    "gen_acoustic",
    "gen_gramacy",
    "grad_check",
    "gramacy_pp",
    "gramacy_pp_np",
    "init_params",
    "load_csv",
    "load_experiment_config",
    "load_params",
    "load_report",
    "mlp_forward",
    "monopole_spl",
    "monopole_spl_np",
    "mse_loss",
    "mse_normalized",
    "parse_experiment_config",
    "physics_feature",
    "predict",
    "relative_error",
    "rmse_normalized",
    "run_experiment",
    "save_csv",
    "save_params",
    "save_report",
    "save_scatter_csv",
    "split_percentage",
    "split_quadrant",
    "split_radial",
    "train_model",
    "__version__",
]
