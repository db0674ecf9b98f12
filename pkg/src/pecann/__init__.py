"""Physics- and equality-constrained neural networks, trained by an
augmented Lagrangian method with adaptive penalty updates."""

from .alm import (
    AlmConfig,
    Block,
    ConstraintGroup,
    MetricsRecord,
    Term,
    TrainResult,
    export_multiplier_distribution,
    initial_metrics,
    train,
    write_metrics_csv,
)
from .estimator import PecannRegressor
from .exceptions import (
    ConfigurationError,
    EvaluationError,
    NonDescentDirectionError,
    TrainingAborted,
)
from .lbfgs import LbfgsConfig, LbfgsState, minimize
from .metrics import l_inf, mae, rel_l2, rms_printed, rms_standard
from .network import (
    DenseNetwork,
    IdentityModel,
    InputJet,
    fd_gradient_oracle,
    flatten,
    forward_jet,
    forward_jet_batch,
    forward_value,
    init_network,
    loss_gradient,
    unflatten,
)
from .problems import (
    ExperimentDefaults,
    NoisyDataset,
    ProblemSpec,
    available_problems,
    build_problem,
    load_ghia_table,
    make_noisy,
    read_reference_csv,
)
from .sampling import (
    PointSet,
    boundary_trace,
    fixed_points,
    periodic_faces,
    resample_seed,
    sobol_box,
    uniform_box,
)

__version__ = "0.1.0"

__all__ = [
    "AlmConfig",
    "Block",
    "ConfigurationError",
    "ConstraintGroup",
    "DenseNetwork",
    "EvaluationError",
    "ExperimentDefaults",
    "IdentityModel",
    "InputJet",
    "LbfgsConfig",
    "LbfgsState",
    "MetricsRecord",
    "NoisyDataset",
    "NonDescentDirectionError",
    "PecannRegressor",
    "PointSet",
    "ProblemSpec",
    "Term",
    "TrainResult",
    "TrainingAborted",
    "available_problems",
    "boundary_trace",
    "build_problem",
    "export_multiplier_distribution",
    "fd_gradient_oracle",
    "fixed_points",
    "flatten",
    "forward_jet",
    "forward_jet_batch",
    "forward_value",
    "init_network",
    "initial_metrics",
    "l_inf",
    "load_ghia_table",
    "loss_gradient",
    "mae",
    "make_noisy",
    "minimize",
    "periodic_faces",
    "read_reference_csv",
    "rel_l2",
    "resample_seed",
    "rms_printed",
    "rms_standard",
    "sobol_box",
    "train",
    "uniform_box",
    "unflatten",
    "write_metrics_csv",
    "__version__",
]
