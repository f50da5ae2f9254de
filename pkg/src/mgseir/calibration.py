"""Next-generation matrices, reproduction numbers and transmission-rate calibration."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .model import ContactMatrix, ModelParams, ModelState


class SpectralError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class NextGenMatrix:
    """``matrix[j, k]``: infections in group j caused by one infectious member of group k."""

    matrix: np.ndarray
    shielding: bool
    detection: bool
    depletion: bool

    @property
    def radius(self) -> float:
        return spectral_radius(self.matrix)


def spectral_radius(m, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    """Largest eigenvalue modulus of a nonnegative square matrix by power iteration."""
    m = np.ascontiguousarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("spectral_radius needs a square matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    r, converged = K.spectral_radius(m, tol, max_iter)
    if not converged:
        raise SpectralError(f"power iteration did not converge in {max_iter} iterations")
    return float(r)


def _require_quadratic(params: ModelParams) -> None:
    if params.matching_alpha != 2.0:
        raise ValueError("next-generation matrix is only defined for matching_alpha == 2")


def next_generation_matrix(params: ModelParams, state: ModelState, L=(0.0, 0.0, 0.0)) -> NextGenMatrix:
    _require_quadratic(params)
    L = np.asarray(L, dtype=float) * np.ones(3)
    y = np.zeros(K.NSTATE)
    y[: K.NCOMP] = state.compartments.ravel()
    out = np.empty((3, 3))
    K.ngm(y, L, params.packed, params.rho, params.beta, out)
    n = params.group_array("population_share")
    return NextGenMatrix(
        out,
        shielding=bool(np.any(L > 0)),
        detection=bool(
            np.any(params.group_array("undetected_infectious") < 1)
            or np.any(params.group_array("undetected_exposed") < 1)
        ),
        depletion=not np.array_equal(state.S, n),
    )


def _calibration_params(params: ModelParams, contacts: ContactMatrix | None) -> ModelParams:
    p = replace(params, contacts=contacts if contacts is not None else params.reference_contacts)
    p = p.with_group_values("undetected_infectious", 1.0)
    return p.with_group_values("undetected_exposed", 1.0)


def calibration_ngm(params: ModelParams, contacts: ContactMatrix | None = None) -> NextGenMatrix:
    """No shielding, no detection, fully susceptible population, pre-distancing contacts."""
    p = _calibration_params(params, contacts)
    n = p.group_array("population_share")
    comp = np.zeros((3, 5))
    comp[:, 0] = n
    return next_generation_matrix(p, ModelState(comp))


def r0(params: ModelParams, contacts: ContactMatrix | None = None) -> float:
    return calibration_ngm(params, contacts).radius


def calibrate_beta(params: ModelParams, target_r0: float, contacts: ContactMatrix | None = None) -> float:
    """Transmission rate giving ``target_r0`` in the calibration context.

    R0 is linear in beta, so one spectral radius at beta = 1 suffices.
    """
    if not target_r0 > 0:
        raise ValueError("target R0 must be positive")
    unit = calibration_ngm(replace(params, beta=1.0), contacts).radius
    if unit == 0.0:
        raise ValueError("degenerate contact matrix: zero spectral radius")
    return float(target_r0) / unit


def effective_rt(state: ModelState, L, params: ModelParams) -> float:
    """Reproduction number with depletion, shielding and detection folded in."""
    return next_generation_matrix(params, state, L).radius


def implied_ifr(params: ModelParams) -> np.ndarray:
    """Share of an infected cohort that dies when ICUs are uncongested."""
    return (
        params.group_array("icu_share")
        * params.group_array("baseline_death_rate")
        / params.group_array("infectious_exit")
    )
