"""Conditioning continuous Gaussian random fields on whole sub-regions.

A field on a discretized compact parameter set ``T`` is observed on a closed
subset ``S``. The package computes the continuity ratio ``M``, the conditional
mean operator and the (observation independent) conditional covariance, and
checks the resulting conditional laws against brute-force oracles and Monte
Carlo estimates.
"""

from .errors import ConditioningError
from .grid import Grid, SubsetMask, Restriction, build_grid, mask_from_intervals, restrict
from .kernels import (
    KernelSpec,
    CovarianceMatrix,
    ValidationReport,
    assemble,
    validate,
    bumps_kernel,
    load_matrix_csv,
)
from .core import (
    MRatioReport,
    HilbertFactor,
    ConditionalLaw,
    compute_m_delta,
    compute_m_opnorm,
    factorize,
    conditional_mean_map,
    conditional_cov,
    condition,
    verify_identities,
)
from .oracle import OracleResult, schur_condition, exhaustive_m_opnorm

__version__ = "0.1.0"

__all__ = [
    "ConditioningError",
    "Grid",
    "SubsetMask",
    "Restriction",
    "build_grid",
    "mask_from_intervals",
    "restrict",
    "KernelSpec",
    "CovarianceMatrix",
    "ValidationReport",
    "assemble",
    "validate",
    "bumps_kernel",
    "load_matrix_csv",
    "MRatioReport",
    "HilbertFactor",
    "ConditionalLaw",
    "compute_m_delta",
    "compute_m_opnorm",
    "factorize",
    "conditional_mean_map",
    "conditional_cov",
    "condition",
    "verify_identities",
    "OracleResult",
    "schur_condition",
    "exhaustive_m_opnorm",
]
