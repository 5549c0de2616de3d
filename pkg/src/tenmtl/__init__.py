"""Personalized multi-task GLMs with partially shared Tucker structure."""

from .baselines import fit_global, fit_local, fit_lr_tucker
from .estimator import (
    FitTrace,
    HyperParams,
    PersonalizedModel,
    TaskDataset,
    TuckerState,
    VectorState,
    fit,
    fit_vector,
    implied_covariance,
    initialize,
    objective,
    predict,
    reconstruct_models,
)
from .families import BERNOULLI, GAUSSIAN, Family, get_family
from .glm import (
    GlmProblem,
    GlmSolution,
    cd_kernel_name,
    fit_glm,
    kkt_check,
    lambda_max,
    neg_log_likelihood,
    penalized_objective,
)
from .simulate import GeneratedDataset, ScenarioConfig, generate
from .tensor_ops import (
    TuckerFactors,
    fold,
    hosvd,
    inner_product,
    kronecker,
    matricize,
    mode_product,
    read_tensor,
    tucker_reconstruct,
    write_tensor,
)
from .tuning import (
    CvReport,
    ExperimentConfig,
    FitSettings,
    Grid,
    aggregate,
    classification_accuracy,
    kfold_cv,
    rmse,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "BERNOULLI",
    "GAUSSIAN",
    "CvReport",
    "ExperimentConfig",
    "Family",
    "FitSettings",
    "FitTrace",
    "GeneratedDataset",
    "GlmProblem",
    "GlmSolution",
    "Grid",
    "HyperParams",
    "PersonalizedModel",
    "ScenarioConfig",
    "TaskDataset",
    "TuckerFactors",
    "TuckerState",
    "VectorState",
    "aggregate",
    "cd_kernel_name",
    "classification_accuracy",
    "fit",
    "fit_glm",
    "fit_global",
    "fit_local",
    "fit_lr_tucker",
    "fit_vector",
    "fold",
    "generate",
    "get_family",
    "hosvd",
    "implied_covariance",
    "initialize",
    "inner_product",
    "kfold_cv",
    "kkt_check",
    "kronecker",
    "lambda_max",
    "matricize",
    "mode_product",
    "neg_log_likelihood",
    "objective",
    "penalized_objective",
    "predict",
    "read_tensor",
    "reconstruct_models",
    "rmse",
    "run_experiment",
    "tucker_reconstruct",
    "write_tensor",
    "__version__",
]
