"""Economic loss, mortality and the planner objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dynamics import Trajectory, _levels, _state_vector
from .model import GROUPS, ModelParams, ModelState

TERMS = ("susceptible_shielding", "exposed", "infectious", "recovered_shielding", "death_productivity")


@dataclass(frozen=True)
class LossBreakdown:
    """Loss rates of one group in income units per day."""

    susceptible_shielding: float
    exposed: float
    infectious: float
    recovered_shielding: float
    death_productivity: float

    @property
    def total(self) -> float:
        return (
            self.susceptible_shielding
            + self.exposed
            + self.infectious
            + self.recovered_shielding
            + self.death_productivity
        )

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in TERMS} | {"total": self.total}


def instantaneous_loss(state: ModelState, L, params: ModelParams) -> list[LossBreakdown]:
    y = _state_vector(state)
    dd = np.empty(3)
    K.death_rates(y, params.packed, params.mortality_lambda, dd)
    terms = np.empty((3, 5))
    K.loss_terms(y, _levels(L), params.packed, dd, terms)
    return [LossBreakdown(*map(float, row)) for row in terms]


def _require_complete(traj: Trajectory) -> None:
    if not traj.complete:
        raise ValueError("trajectory does not reach the horizon")


def total_economic_loss(traj: Trajectory) -> float:
    _require_complete(traj)
    return float(traj.y[-1, K.LOSS])


def gdp_years(loss: float, params: ModelParams) -> float:
    """Loss expressed in years of pre-pandemic output."""
    return loss / params.annual_gdp


def pct_gdp(loss: float, params: ModelParams) -> float:
    return 100.0 * gdp_years(loss, params)


def total_mortality(traj: Trajectory) -> float:
    return float(traj.series("D")[-1].sum())


def objective(traj: Trajectory, chi: float) -> float:
    if not chi >= 0:
        raise ValueError("chi must be nonnegative")
    return total_economic_loss(traj) + chi * total_mortality(traj)


def summary(traj: Trajectory, chi: float = 0.0) -> dict:
    """Per-run summary in the JSON layout used by the reports."""
    loss = total_economic_loss(traj)
    breakdown = traj.loss_breakdown
    return {
        "mortality": total_mortality(traj),
        "econ_loss": loss,
        "econ_loss_pct_gdp": pct_gdp(loss, traj.params),
        "objective": objective(traj, chi),
        "chi": chi,
        "loss_breakdown_integrals": {
            g.label: {name: float(breakdown[g, i]) for i, name in enumerate(TERMS)} for g in GROUPS
        },
    }
