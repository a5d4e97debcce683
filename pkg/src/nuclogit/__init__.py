"""Multinomial logistic regression with nuclear-norm and ridge penalties.

The nuclear penalty is a convex surrogate for a rank constraint on the
coefficient matrix: fits tend to have low rank, and the resulting singular
vectors expose latent outcome structure.  The package bundles the proximal
solvers, cross-validated penalty selection, a synthetic benchmark study,
categorical-data ingestion with replacement-level pooling, and a latent
factor report, all behind both a Python API and the ``nuclogit`` CLI.
"""

from .errors import NumericError, SchemaError
from .model import (
    Dataset,
    ModelFit,
    gradient,
    indicator_matrix,
    lipschitz_bound,
    negative_log_likelihood,
    per_observation_nll,
    predict_probabilities,
)
from .prox import (
    PenaltyGroups,
    SvdTriple,
    center_rows,
    effective_rank,
    grouped_svt,
    nuclear_norm,
    svt,
    thin_svd,
)
from .selection import (
    CvResult,
    LambdaPath,
    cross_validate,
    evaluate,
    path_lambda_max,
    stratified_folds,
)
from .simulation import (
    SimulationRecord,
    SimulationScenario,
    generate_coefficients,
    generate_dataset,
    records_to_csv,
    run_study,
)
from .solver import (
    FitTrace,
    SolverConfig,
    fit_npmr,
    fit_null,
    fit_ridge,
    objective,
    pgd_step,
)

__version__ = "0.1.0"

__all__ = [
    "CvResult",
    "Dataset",
    "FitTrace",
    "LambdaPath",
    "ModelFit",
    "NumericError",
    "PenaltyGroups",
    "SchemaError",
    "SimulationRecord",
    "SimulationScenario",
    "SolverConfig",
    "SvdTriple",
    "center_rows",
    "cross_validate",
    "effective_rank",
    "evaluate",
    "fit_npmr",
    "fit_null",
    "fit_ridge",
    "generate_coefficients",
    "generate_dataset",
    "gradient",
    "grouped_svt",
    "indicator_matrix",
    "lipschitz_bound",
    "negative_log_likelihood",
    "nuclear_norm",
    "objective",
    "path_lambda_max",
    "per_observation_nll",
    "pgd_step",
    "predict_probabilities",
    "records_to_csv",
    "run_study",
    "stratified_folds",
    "svt",
    "thin_svd",
]
