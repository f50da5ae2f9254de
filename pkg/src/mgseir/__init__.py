"""Multi-group SEIR model with economic losses and optimal age-targeted shielding."""

__version__ = "0.1.0"

from .model import (
    ContactMatrix,
    GroupId,
    GroupParams,
    ModelParams,
    ModelState,
    germany_baseline,
    initial_state,
    load_params,
    scale_contacts,
    validate,
)
from .policy import Family, PolicySchedule
from .dynamics import Trajectory, apply_vaccine_terminal, derivative, force_of_infection, icu_load, integrate
from .economics import instantaneous_loss, objective, total_economic_loss, total_mortality
from .calibration import calibrate_beta, effective_rt, implied_ifr, next_generation_matrix, r0, spectral_radius
from .optimize import (
    FrontierPoint,
    SearchConfig,
    evaluate_policy,
    frontier,
    optimize_policy,
    pareto_filter,
    safety_policy,
)
from .scenarios import ScenarioSpec, Transform, apply_scenario, scenario_catalog
