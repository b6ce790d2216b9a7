"""Copula-based data generators and the Monte Carlo harness."""

from .copulas import ar1_correlation, clayton_theta, frank_kendall, frank_theta, kendall_tau, sample_copula
from .montecarlo import SummaryTable, run_monte_carlo, run_replicate
from .scenarios import ScenarioSpec, SimulatedData, generate_scenario, scenario, true_coefficients

__all__ = [
    "ScenarioSpec",
    "SimulatedData",
    "SummaryTable",
    "ar1_correlation",
    "clayton_theta",
    "frank_kendall",
    "frank_theta",
    "generate_scenario",
    "kendall_tau",
    "run_monte_carlo",
    "run_replicate",
    "sample_copula",
    "scenario",
    "true_coefficients",
]
