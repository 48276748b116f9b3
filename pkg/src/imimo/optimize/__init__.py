"""Power-schedule optimizers."""
from .epa import solve_epa
from .exact import BarrierOptions, default_starts, solve_exact
from .gpp import gpp_coefficients, gpp_energy_terms, gpp_schedule, kkt_residual, solve_gpp
from .rate import rate_scale_factor, scale_for_rate
from .report import GppCoefficients, Method, SolverReport

__all__ = [
    "BarrierOptions",
    "GppCoefficients",
    "Method",
    "SolverReport",
    "default_starts",
    "gpp_coefficients",
    "gpp_energy_terms",
    "gpp_schedule",
    "kkt_residual",
    "rate_scale_factor",
    "scale_for_rate",
    "solve",
    "solve_epa",
    "solve_exact",
    "solve_gpp",
]


def solve(config, method, **kwargs):
    """Run the optimizer named by ``method`` (exact, gpp or epa)."""
    method = Method.parse(method)
    if method is Method.GPP:
        return solve_gpp(config)
    if method is Method.EPA:
        return solve_epa(config)
    return solve_exact(config, **kwargs)
