"""Spreading speeds and linear-determinacy certificates for time-space
periodic two-species reaction-advection-diffusion systems."""

from .coeffs import (CoefficientField, SymmetryReport, build_field, constant_field,
                     mean_and_symmetry, parse_expression, reflect_x, refine_field)
from .eigen import (DiagnosticsReport, EigenResult, lambda_diagnostics, lambda_of_mu,
                    principal_eigen)
from .frontsim import (FrontTrace, fit_speed, front_position, run_front,
                       spreading_verdict)
from .orbits import PeriodicOrbit, logistic_orbit, orbit_residual
from .pde import (CellPeriodMap, CellState, LineState, LineSystemEvolver,
                  evolve_system, period_map, step_scalar_linear)
from .speeds import (Certificate, CoupledEigenfunction, HypothesisReport, SpeedReport,
                     SystemSpec, check_hypotheses, check_linear_determinacy,
                     compute_speed_report, coupled_eigenfunction, linear_speed_c0,
                     minimize_speed, scalar_kpp_speeds)
from .weinberger import (Profile, SpeedBracket, apply_R, bracket_speeds, init_profile,
                         recursion_limit)

__version__ = "0.1.0"

__all__ = [
    "CoefficientField", "SymmetryReport", "build_field", "constant_field",
    "mean_and_symmetry", "parse_expression", "reflect_x", "refine_field",
    "EigenResult", "DiagnosticsReport", "principal_eigen", "lambda_of_mu",
    "lambda_diagnostics",
    "PeriodicOrbit", "logistic_orbit", "orbit_residual",
    "CellState", "LineState", "CellPeriodMap", "LineSystemEvolver",
    "step_scalar_linear", "period_map", "evolve_system",
    "SystemSpec", "SpeedReport", "Certificate", "HypothesisReport",
    "CoupledEigenfunction", "minimize_speed", "scalar_kpp_speeds",
    "linear_speed_c0", "coupled_eigenfunction", "check_hypotheses",
    "check_linear_determinacy", "compute_speed_report",
    "Profile", "SpeedBracket", "init_profile", "apply_R", "recursion_limit",
    "bracket_speeds",
    "FrontTrace", "run_front", "front_position", "fit_speed", "spreading_verdict",
    "__version__",
]
