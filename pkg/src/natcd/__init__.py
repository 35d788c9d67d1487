"""Natural coordinate descent for l1/l2-penalised generalised linear models."""
from .diagnostics import (
    DualCertificate,
    audit_fixed_point,
    certify,
    duality_gap,
    threshold_audit_check,
)
from .errors import DataError, DivergenceError, GenerationError, NumericalError, PathError
from .family import BINOMIAL, GAUSSIAN, POISSON, FamilyKernel, get_family
from .model import (
    Dataset,
    FitConfig,
    FitResult,
    PenaltySpec,
    relative_score_difference,
    score,
)
from .path import PathResult, PathSpec, make_path, model_size, run_path
from .solver import fit
from .tabular import load, write_csv

__version__ = "0.1.0"

__all__ = [
    "BINOMIAL", "GAUSSIAN", "POISSON", "FamilyKernel", "get_family",
    "Dataset", "PenaltySpec", "FitConfig", "FitResult", "score", "relative_score_difference",
    "fit", "make_path", "run_path", "PathSpec", "PathResult", "model_size",
    "certify", "DualCertificate", "duality_gap", "audit_fixed_point", "threshold_audit_check",
    "load", "write_csv",
    "DataError", "DivergenceError", "GenerationError", "NumericalError", "PathError",
]
