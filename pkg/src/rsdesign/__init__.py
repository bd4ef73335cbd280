"""Relevant-subset adaptive experimental designs.

Submodules
----------
error_models
    Error laws (generalized normal, Cauchy, normal with gamma precisions).
information
    Fisher and relevant-subset information, the u/v statistics.
estimation
    Maximum-likelihood estimates of group locations and coefficients.
designs
    A priori designs, optimality criteria and the CRLB.
adaptive
    RRSD and DRSD run-by-run allocation.
montecarlo
    Simulation harness and efficiency metrics.
"""

from .error_models import ErrorModel, Family, elemental_info, moment_table
from .designs import (Criterion, Design, RandomDesign, builtin_design, builtin_random_design,
                      criterion_value, crlb, sample_design)
from .information import relevant_info_eta, SupportGroup
from .estimation import mle_location, mle_theta
from .adaptive import Mode, initialize, plan_next_run, drsd_next_point, record_run
from .montecarlo import ScenarioConfig, SimulationReport, Strategy, run_scenario

__version__ = "0.1.0"

__all__ = [
    "ErrorModel", "Family", "elemental_info", "moment_table",
    "Criterion", "Design", "RandomDesign", "builtin_design", "builtin_random_design",
    "criterion_value", "crlb", "sample_design",
    "relevant_info_eta", "SupportGroup", "mle_location", "mle_theta",
    "Mode", "initialize", "plan_next_run", "drsd_next_point", "record_run",
    "ScenarioConfig", "SimulationReport", "Strategy", "run_scenario",
]
