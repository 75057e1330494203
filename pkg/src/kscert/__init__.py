"""Simulation and a priori certification of a regularized chemotaxis-Stokes system."""

from .chemotaxis import (FieldState, InitialData, SchemeConfig, Trajectory, c_step, cfl_limit,
                         n_step, simulate)
from .errors import (BlowUpError, CflError, ConfigError, DomainError, KSCertError,
                     PositivityError, SolverError, StrideError)
from .grid import Grid
from .monitor import (CertificateReport, CertificateTolerances, Monitor, MonitorRecord, certify,
                      record_step, supersolution_residual, weak_identity_residual,
                      weak_solution_residual_c, weak_solution_residual_u)
from .params import (AdmissibilityReport, ModelParams, check_pq, coefficient_lower_bound,
                     coth_bound, exponent_infimum, n_integrability_exponent, q_pm,
                     supersolution_coefficient)
from .stokes import PotentialSpec, StokesWork, poisson_neumann_solve, stokes_step
from .testfn import TimeProfile, make_cosine_phi, make_stream_psi

__version__ = "0.1.0"

__all__ = [
    "FieldState",
    "InitialData",
    "SchemeConfig",
    "Trajectory",
    "c_step",
    "cfl_limit",
    "n_step",
    "simulate",
    "BlowUpError",
    "CflError",
    "ConfigError",
    "DomainError",
    "KSCertError",
    "PositivityError",
    "SolverError",
    "StrideError",
    "Grid",
    "CertificateReport",
    "CertificateTolerances",
    "Monitor",
    "MonitorRecord",
    "certify",
    "record_step",
    "supersolution_residual",
    "weak_identity_residual",
    "weak_solution_residual_c",
    "weak_solution_residual_u",
    "AdmissibilityReport",
    "ModelParams",
    "check_pq",
    "coefficient_lower_bound",
    "coth_bound",
    "exponent_infimum",
    "n_integrability_exponent",
    "q_pm",
    "supersolution_coefficient",
    "PotentialSpec",
    "StokesWork",
    "poisson_neumann_solve",
    "stokes_step",
    "TimeProfile",
    "make_cosine_phi",
    "make_stream_psi",
]

