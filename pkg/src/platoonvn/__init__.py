"""Load and rate-coverage analysis for vehicular networks with platooned traffic.

Vehicles move on the lines of a Poisson line process, grouped into Matern
clusters (platoons) or scattered as a 1-D Poisson process per road, and attach
to the nearest base station of an independent planar Poisson process.
"""

from .chords import joint_pdf_mass, length_bias, length_debias, tagged_chord_pdf, typical_chord_pdf
from .counts import count_mean_var, count_pgf, count_pmf, palm_count_mean, palm_count_pgf, palm_count_pmf
from .coverage import (
    interference_integral,
    lambda_b_for_active_density,
    rate_coverage,
    rate_coverage_curve,
    rate_coverage_from_pmf,
    sir_coverage,
)
from .distributions import DiscretePmf, EmpiricalDistribution, TabulatedPdf
from .errors import DegenerateWindow, DomainError, NormalizationFailure
from .kernels import NetworkParams, g_kernel
from .loads import (
    LoadSummary,
    operational_metrics,
    p_on,
    scenario_metrics,
    tagged_load_pmf,
    typical_load_approx,
    typical_load_exact_pmf,
)
from .montecarlo import SimConfig, simulate_counts, simulate_sir
from .samplers import RngSeed, sample_plp, sample_traffic

__all__ = [
    "DegenerateWindow", "DiscretePmf", "DomainError", "EmpiricalDistribution", "LoadSummary",
    "NetworkParams", "NormalizationFailure", "RngSeed", "SimConfig", "TabulatedPdf",
    "count_mean_var", "count_pgf", "count_pmf", "g_kernel", "interference_integral", "joint_pdf_mass",
    "lambda_b_for_active_density", "length_bias", "length_debias", "operational_metrics", "p_on",
    "palm_count_mean", "palm_count_pgf", "palm_count_pmf", "rate_coverage", "rate_coverage_curve",
    "rate_coverage_from_pmf", "sample_plp", "sample_traffic", "scenario_metrics", "simulate_counts",
    "simulate_sir", "sir_coverage", "tagged_chord_pdf", "tagged_load_pmf", "typical_chord_pdf",
    "typical_load_approx", "typical_load_exact_pmf",
]
