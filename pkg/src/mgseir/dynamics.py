"""Laws of motion and fixed-step RK4 integration of the three-group SEIR model."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .model import COMPARTMENTS, GROUP_SUFFIX, ModelParams, ModelState, initial_state
from .policy import PolicySchedule

log = logging.getLogger(__name__)

DEFAULT_DT = 0.25
CLAMP_ABORT = 1e-6
SPECTRAL_TOL = 1e-12
SPECTRAL_MAX_ITER = 10_000


class IntegrationError(RuntimeError):
    pass


def _hcap(params: ModelParams) -> float:
    return -1.0 if params.icu_cap is None else float(params.icu_cap)


def _state_vector(state: ModelState) -> np.ndarray:
    y = np.zeros(K.NSTATE)
    y[: K.NCOMP] = state.compartments.ravel()
    y[K.LOSS] = state.accumulated_loss
    return y


def _levels(L) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim == 0:
        L = np.full(3, float(L))
    if L.shape != (3,) or L.min() < 0 or L.max() > 1:
        raise ValueError("shielding levels must be three values in [0, 1]")
    return L


def force_of_infection(state: ModelState, L, params: ModelParams) -> np.ndarray:
    """Rate of new exposures per group."""
    out = np.empty(3)
    K.force_of_infection(
        _state_vector(state), _levels(L), params.packed, params.rho, params.beta, params.matching_alpha, out
    )
    return out


def death_rates(state: ModelState, params: ModelParams) -> np.ndarray:
    """ICU death rates at the current ICU load, capped at the infectious exit rate."""
    out = np.empty(3)
    K.death_rates(_state_vector(state), params.packed, params.mortality_lambda, out)
    return out


def icu_load(state: ModelState, params: ModelParams) -> float:
    return float(np.dot(params.group_array("icu_share"), state.I))


@dataclass(frozen=True, eq=False)
class StateDerivative:
    compartments: np.ndarray  # (3, 5) per day
    loss: float
    loss_terms: np.ndarray  # (3, 5)
    icu_excess: float

    dS = property(lambda self: self.compartments[:, 0])
    dE = property(lambda self: self.compartments[:, 1])
    dI = property(lambda self: self.compartments[:, 2])
    dR = property(lambda self: self.compartments[:, 3])
    dD = property(lambda self: self.compartments[:, 4])


def derivative(state: ModelState, t: float, policy: PolicySchedule, params: ModelParams) -> StateDerivative:
    if t >= params.horizon:
        raise ValueError(f"no dynamics at t={t} >= horizon {params.horizon}")
    dy = np.empty(K.NSTATE)
    K.rhs(
        _state_vector(state),
        policy.level_at(t),
        params.packed,
        params.rho,
        params.beta,
        params.matching_alpha,
        params.mortality_lambda,
        _hcap(params),
        dy,
        np.empty(3),
        np.empty(3),
        np.empty((3, 5)),
    )
    return StateDerivative(
        compartments=dy[: K.NCOMP].reshape(3, 5).copy(),
        loss=float(dy[K.LOSS]),
        loss_terms=dy[K.BREAKDOWN :].reshape(3, 5).copy(),
        icu_excess=float(dy[K.PENALTY]),
    )


def apply_vaccine_terminal(state: ModelState) -> ModelState:
    """Move every living non-recovered individual into the recovered compartment."""
    c = np.array(state.compartments)
    c[:, 3] += c[:, 0] + c[:, 1] + c[:, 2]
    c[:, :3] = 0.0
    return ModelState(c, state.accumulated_loss)


def _apply_terminal_vector(y: np.ndarray) -> None:
    for j in range(3):
        b = 5 * j
        y[b + 3] += y[b] + y[b + 1] + y[b + 2]
        y[b : b + 3] = 0.0


def step_count(horizon: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = round(horizon / dt)
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not an integral multiple of dt={dt}")
    return int(n)


def _check_policy(params: ModelParams, policy: PolicySchedule) -> None:
    if policy.horizon != params.horizon:
        raise ValueError(f"policy horizon {policy.horizon} != model horizon {params.horizon}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded integration on the grid ``0, dt, ..., T``.

    ``y`` holds the full augmented state per grid point (see ``_kernels``).
    When the vaccine event is applied, the last row is the post-event state
    and ``pre_terminal`` keeps the state just before it.
    """

    params: ModelParams
    policy: PolicySchedule
    dt: float
    t: np.ndarray
    y: np.ndarray
    levels: np.ndarray
    icu: np.ndarray
    rt: np.ndarray
    pre_terminal: ModelState
    terminal_applied: bool
    clamp_mass: float
    clamped_death_rates: int

    @property
    def compartments(self) -> np.ndarray:
        """Shape (n, 3, 5)."""
        return self.y[:, : K.NCOMP].reshape(-1, 3, 5)

    def series(self, name: str) -> np.ndarray:
        """Per-group series for compartment ``name``, shape (n, 3)."""
        return self.compartments[:, :, COMPARTMENTS.index(name)]

    @property
    def loss(self) -> np.ndarray:
        return self.y[:, K.LOSS]

    @property
    def icu_excess_integral(self) -> float:
        return float(self.y[-1, K.PENALTY])

    @property
    def loss_breakdown(self) -> np.ndarray:
        """Integrated loss by group and term at the end, shape (3, 5)."""
        return self.y[-1, K.BREAKDOWN :].reshape(3, 5).copy()

    def state(self, i: int) -> ModelState:
        return ModelState(self.y[i, : K.NCOMP].reshape(3, 5), float(self.y[i, K.LOSS]))

    @property
    def final_state(self) -> ModelState:
        return self.state(-1)

    @property
    def complete(self) -> bool:
        return bool(abs(self.t[-1] - self.params.horizon) <= 1e-9 * max(1.0, self.params.horizon))

    def csv_header(self) -> list[str]:
        cols = ["t"]
        for sfx in GROUP_SUFFIX:
            cols += [f"{c}_{sfx}" for c in COMPARTMENTS]
        cols += ["H", "Rt"] + [f"L_{sfx}" for sfx in GROUP_SUFFIX] + ["loss_cum"]
        return cols

    def to_csv(self, path: str | Path | None = None) -> str:
        """Render (and optionally write) the trajectory with 17 significant digits."""
        buf = io.StringIO()
        buf.write(",".join(self.csv_header()) + "\n")
        table = np.column_stack(
            [self.t, self.y[:, : K.NCOMP], self.icu, self.rt, self.levels, self.y[:, K.LOSS]]
        )
        for row in table:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            from .reporting import atomic_write

            atomic_write(path, text)
        return text


def integrate(
    params: ModelParams,
    policy: PolicySchedule,
    dt: float = DEFAULT_DT,
    *,
    terminal: bool = True,
    state0: ModelState | None = None,
) -> Trajectory:
    """Integrate from the seeded initial state to the horizon with fixed-step RK4.

    The accumulated loss, the per-term loss breakdown and the ICU excess are
    extra coordinates sharing the RK4 stages. Negative compartments are
    clamped to zero after each step; more than ``CLAMP_ABORT`` of clamped mass
    aborts. With ``terminal`` the vaccine event is applied at the horizon.
    """
    _check_policy(params, policy)
    nsteps = step_count(params.horizon, dt)
    y0 = _state_vector(state0 if state0 is not None else initial_state(params))
    out = np.empty((nsteps + 1, K.NSTATE))
    lev = np.empty((nsteps + 1, 3))
    mass, nclamp = K.integrate(
        y0,
        policy.group_levels(),
        policy.block,
        policy.horizon,
        float(dt),
        nsteps,
        params.packed,
        params.rho,
        params.beta,
        params.matching_alpha,
        params.mortality_lambda,
        _hcap(params),
        True,
        out,
        lev,
    )
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite state encountered")
    if mass > CLAMP_ABORT:
        raise IntegrationError(f"clamped negative mass {mass:.3g} exceeds {CLAMP_ABORT}")
    if mass > 0:
        log.info("clamped %.3g of negative compartment mass", mass)
    if nclamp:
        log.info("ICU death rate hit the infectious exit rate in %d evaluations", nclamp)
    pre = ModelState(out[-1, : K.NCOMP].reshape(3, 5), float(out[-1, K.LOSS]))
    if terminal:
        _apply_terminal_vector(out[-1])
    icu = out[:, : K.NCOMP].reshape(-1, 3, 5)[:, :, 2] @ params.group_array("icu_share")
    rt = np.full(nsteps + 1, np.nan)
    if params.matching_alpha == 2.0:
        ok = K.rt_series(
            out, lev, params.packed, params.rho, params.beta, SPECTRAL_TOL, SPECTRAL_MAX_ITER, rt
        )
        if not ok:
            log.warning("power iteration did not converge for some R(t) values")
    return Trajectory(
        params=params,
        policy=policy,
        dt=float(dt),
        t=np.arange(nsteps + 1) * float(dt),
        y=out,
        levels=lev,
        icu=icu,
        rt=rt,
        pre_terminal=pre,
        terminal_applied=terminal,
        clamp_mass=float(mass),
        clamped_death_rates=int(nclamp),
    )


def terminal_states(params: ModelParams, group_levels: np.ndarray, block: float, dt: float = DEFAULT_DT):
    """Final augmented states for a batch of per-group schedules, shape (B, 3, K).

    Fast path for the optimizer: nothing but the final state is kept.
    Returns ``(finals, clamp_mass)``; the vaccine event does not change
    deaths or losses so it is not applied.
    """
    nsteps = step_count(params.horizon, dt)
    batch = np.ascontiguousarray(group_levels, dtype=float)
    finals = np.empty((batch.shape[0], K.NSTATE))
    clamps = np.empty(batch.shape[0])
    K.evaluate_batch(
        _state_vector(initial_state(params)),
        batch,
        float(block),
        float(params.horizon),
        float(dt),
        nsteps,
        params.packed,
        params.rho,
        params.beta,
        params.matching_alpha,
        params.mortality_lambda,
        _hcap(params),
        finals,
        clamps,
    )
    return finals, clamps
