"""Policy search: differential evolution plus coordinate polish, frontiers, safety caps."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import differential_evolution
from scipy.stats import qmc

from . import _kernels as K
from .dynamics import DEFAULT_DT, IntegrationError, CLAMP_ABORT, integrate, terminal_states
from .economics import pct_gdp
from .model import ModelParams
from .policy import DEFAULT_KNOTS, FAMILY_ORDER, Family, PolicySchedule

log = logging.getLogger(__name__)

MAX_DIMENSION = 256
CHI_BRACKET = (0.0, 1e8)


class OptimizationError(RuntimeError):
    pass


class InfeasibleCapError(OptimizationError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    knots: int = DEFAULT_KNOTS
    population: int | None = None  # None: 16 per dimension, at most 96
    generations: int = 400
    seed: int = 0
    dt: float = DEFAULT_DT
    mutation: tuple[float, float] = (0.5, 1.0)
    recombination: float = 0.7
    polish_start: float = 0.1
    polish_stop: float = 1e-4
    polish_rounds: int = 3
    penalty_weight: float = 1e6

    def population_for(self, dim: int) -> int:
        if self.population is not None:
            return max(5, int(self.population))
        return min(16 * dim, 96)


REDUCED_SEARCH = SearchConfig(population=24, generations=120, polish_rounds=2)


@dataclass(frozen=True, eq=False)
class FrontierPoint:
    chi: float
    mortality: float
    econ_loss: float
    econ_loss_pct_gdp: float
    policy: PolicySchedule
    objective: float
    penalty: float = 0.0
    evaluations: int = 0
    converged: bool = True
    seed: int = 0

    @property
    def penalized_objective(self) -> float:
        return self.objective + self.penalty


@dataclass(frozen=True)
class Outcome:
    mortality: float
    econ_loss: float
    objective: float
    penalty: float = 0.0


class _Evaluator:
    """Vectorized objective over flattened schedules of one family."""

    def __init__(self, params: ModelParams, family: Family, chi: float, config: SearchConfig):
        self.params = params
        self.family = family
        self.chi = float(chi)
        self.config = config
        self.block = params.horizon / config.knots
        self.index = list(family.group_channel)
        self.count = 0

    def raw(self, X: np.ndarray) -> np.ndarray:
        """Rows of (mortality, econ_loss, penalty) for vectors ``X`` of shape (B, d)."""
        X = np.clip(np.atleast_2d(np.asarray(X, dtype=float)), 0.0, 1.0)
        B = X.shape[0]
        levels = X.reshape(B, self.family.channels, self.config.knots)[:, self.index, :]
        finals, clamps = terminal_states(self.params, levels, self.block, self.config.dt)
        self.count += B
        bad = (clamps > CLAMP_ABORT) | ~np.all(np.isfinite(finals), axis=1)
        if np.any(bad):
            raise IntegrationError("integration failed for a candidate policy")
        mort = finals[:, 4:15:5].sum(axis=1)
        loss = finals[:, K.LOSS]
        pen = self.config.penalty_weight * finals[:, K.PENALTY]
        return np.column_stack([mort, loss, pen])

    def objective(self, X: np.ndarray) -> np.ndarray:
        r = self.raw(X)
        return r[:, 1] + self.chi * r[:, 0] + r[:, 2]

    def de_callable(self, X: np.ndarray) -> np.ndarray:
        # scipy passes (d, S) for vectorized evaluation
        return self.objective(np.asarray(X).T)


def _policy_vector(policy: PolicySchedule, family: Family, knots: int, horizon: float) -> np.ndarray | None:
    """Seed vector in ``family`` coordinates, or None when the seed does not fit."""
    if policy.knots != knots:
        return None
    try:
        embedded = policy.embed(family)
    except ValueError:
        return None
    return embedded.vector


def evaluate_policy(
    policy: PolicySchedule, params: ModelParams, chi: float, dt: float = DEFAULT_DT
) -> Outcome:
    """Mortality, loss and objective of one schedule (objective includes the ICU penalty)."""
    if policy.horizon != params.horizon:
        raise ValueError("policy horizon does not match the model horizon")
    config = SearchConfig(knots=policy.knots, dt=dt)
    ev = _Evaluator(params, policy.family, chi, config)
    mort, loss, pen = ev.raw(policy.vector[None, :])[0]
    return Outcome(float(mort), float(loss), float(loss + chi * mort + pen), float(pen))


def _point(
    params: ModelParams, family: Family, chi: float, x: np.ndarray, row: np.ndarray, config, evals, converged
) -> FrontierPoint:
    mort, loss, pen = map(float, row)
    return FrontierPoint(
        chi=float(chi),
        mortality=mort,
        econ_loss=loss,
        econ_loss_pct_gdp=pct_gdp(loss, params),
        policy=PolicySchedule.from_vector(family, params.horizon, x),
        objective=loss + chi * mort,
        penalty=pen,
        evaluations=evals,
        converged=converged,
        seed=config.seed,
    )


def _polish(ev: _Evaluator, x: np.ndarray, f: float, config: SearchConfig) -> tuple[np.ndarray, float]:
    """Coordinate descent with step halving; only strict improvements are accepted."""
    x = x.copy()
    d = x.size
    step = config.polish_start
    while step >= config.polish_stop:
        for _ in range(config.polish_rounds):
            cand = []
            moves = []
            for i in range(d):
                for sign in (1.0, -1.0):
                    v = min(1.0, max(0.0, x[i] + sign * step))
                    if v != x[i]:
                        c = x.copy()
                        c[i] = v
                        cand.append(c)
                        moves.append((i, v))
            if not cand:
                break
            F = ev.objective(np.array(cand))
            best_per_coord: dict[int, tuple[float, float]] = {}
            for (i, v), fv in zip(moves, F):
                if fv < f and (i not in best_per_coord or fv < best_per_coord[i][0]):
                    best_per_coord[i] = (fv, v)
            if not best_per_coord:
                break
            k = int(np.argmin(F))
            x_single, f_single = cand[k], float(F[k])
            if len(best_per_coord) > 1:
                combo = x.copy()
                for i, (_, v) in best_per_coord.items():
                    combo[i] = v
                f_combo = float(ev.objective(combo[None, :])[0])
                if f_combo < f_single:
                    x_single, f_single = combo, f_combo
            x, f = x_single, f_single
        step /= 2.0
    return x, f


def optimize_policy(
    family,
    params: ModelParams,
    chi: float,
    config: SearchConfig = SearchConfig(),
    seeds: Iterable[PolicySchedule] = (),
) -> FrontierPoint:
    """Minimize loss + chi * mortality (+ ICU penalty) over one policy family.

    The initial population is a seeded Latin hypercube whose first members
    are replaced by the seeds (embedded in ``family``) and the two corner
    policies L = 0 and L = 1. The best member never gets worse, so the
    result is at least as good as every seed.
    """
    family = Family.parse(family)
    if not chi >= 0:
        raise ValueError("chi must be nonnegative")
    dim = family.channels * config.knots
    if dim > MAX_DIMENSION:
        raise OptimizationError(f"search dimension {dim} exceeds {MAX_DIMENSION}")
    ev = _Evaluator(params, family, chi, config)
    pop_size = config.population_for(dim)
    rng = np.random.default_rng(config.seed)
    init = qmc.LatinHypercube(d=dim, seed=rng).random(pop_size)
    fixed = [np.zeros(dim), np.ones(dim)]
    for s in seeds:
        v = _policy_vector(s, family, config.knots, params.horizon)
        if v is not None and s.horizon == params.horizon:
            fixed.append(v)
    # later seeds are the most specific; keep them if the population is small
    fixed = fixed[-pop_size:]
    for i, v in enumerate(fixed):
        init[i] = v
    try:
        res = differential_evolution(
            ev.de_callable,
            bounds=[(0.0, 1.0)] * dim,
            init=init,
            maxiter=config.generations,
            tol=0.0,
            atol=0.0,
            mutation=config.mutation,
            recombination=config.recombination,
            rng=np.random.default_rng(config.seed + 1),
            polish=False,
            updating="deferred",
            vectorized=True,
        )
    except IntegrationError:
        raise
    except Exception as exc:  # scipy internals
        raise OptimizationError(f"differential evolution failed: {exc}") from exc
    # DE does not report the initial population, so check the fixed members directly
    x_best, f_best = np.clip(res.x, 0.0, 1.0), float(ev.objective(res.x[None, :])[0])
    fixed_f = ev.objective(np.array(fixed))
    k = int(np.argmin(fixed_f))
    if fixed_f[k] < f_best:
        x_best, f_best = fixed[k].copy(), float(fixed_f[k])
    x_best, f_best = _polish(ev, x_best, f_best, config)
    row = ev.raw(x_best[None, :])[0]
    return _point(params, family, chi, x_best, row, config, ev.count, bool(res.success))


def pareto_filter(points: Sequence, key: Callable | None = None) -> list:
    """Drop points weakly dominated in (mortality, econ_loss); sorted by mortality descending.

    Points may be ``FrontierPoint`` objects or ``(mortality, econ_loss)`` pairs.
    Among exact duplicates the first is kept.
    """
    if key is None:
        key = lambda p: (p.mortality, p.econ_loss) if hasattr(p, "mortality") else (p[0], p[1])
    order = sorted(range(len(points)), key=lambda i: (key(points[i])[0], key(points[i])[1], i))
    kept = []
    best_loss = math.inf
    for i in order:
        m, e = key(points[i])
        if e < best_loss:
            kept.append(points[i])
            best_loss = e
    return kept[::-1]


def default_chi_grid(params: ModelParams, n: int = 24, config: SearchConfig = SearchConfig()) -> np.ndarray:
    """Log-spaced chi values around the exchange rate between the two corner policies.

    The pivot is the loss difference between full and no shielding per unit of
    mortality they differ by; the grid spans four decades on either side.
    """
    zero = evaluate_policy(PolicySchedule.constant(Family.UNIFORM, params.horizon, 0.0, config.knots), params, 0, config.dt)
    full = evaluate_policy(PolicySchedule.constant(Family.UNIFORM, params.horizon, 1.0, config.knots), params, 0, config.dt)
    dm = zero.mortality - full.mortality
    if dm <= 0:
        pivot = 1e4
    else:
        pivot = max(full.econ_loss - zero.econ_loss, 1e-9) / dm
    return np.logspace(np.log10(pivot) - 3.0, np.log10(pivot) + 1.0, n)


def sweep(
    family,
    params: ModelParams,
    chi_grid: Sequence[float],
    config: SearchConfig = SearchConfig(),
    seeds: Sequence[Sequence[PolicySchedule]] | None = None,
) -> list[FrontierPoint]:
    """One optimized point per chi, each warm-started from the previous chi's optimum.

    ``seeds[i]`` are extra candidates for ``chi_grid[i]``, for example the
    optimum of a nested family or of another scenario at the same chi.
    """
    family = Family.parse(family)
    chis = [float(c) for c in chi_grid]
    if not chis:
        raise ValueError("chi grid must not be empty")
    if any(b < a for a, b in zip(chis, chis[1:])):
        raise ValueError("chi grid must be sorted ascending")
    points: list[FrontierPoint] = []
    for i, chi in enumerate(chis):
        extra = list(seeds[i]) if seeds is not None else []
        warm = [points[-1].policy] if points else []
        point = optimize_policy(family, params, chi, config, warm + extra)
        log.info("%s chi=%.4g mortality=%.5f loss=%.4f", family.value, chi, point.mortality, point.econ_loss)
        points.append(point)
    return points


def frontier(
    family,
    params: ModelParams,
    chi_grid: Sequence[float],
    config: SearchConfig = SearchConfig(),
    seeds: Sequence[Sequence[PolicySchedule]] | None = None,
) -> list[FrontierPoint]:
    """Pareto-filtered efficient frontier of ``family``.

    Every evaluated warm-start seed that belongs to the family competes with
    the optimized points before filtering.
    """
    family = Family.parse(family)
    points = sweep(family, params, chi_grid, config, seeds)
    pool = list(points)
    if seeds is not None:
        for chi, group in zip(chi_grid, seeds):
            for s in group:
                if _policy_vector(s, family, config.knots, params.horizon) is None:
                    continue
                embedded = s.embed(family)
                out = evaluate_policy(embedded, params, chi, config.dt)
                pool.append(
                    FrontierPoint(
                        chi=float(chi),
                        mortality=out.mortality,
                        econ_loss=out.econ_loss,
                        econ_loss_pct_gdp=pct_gdp(out.econ_loss, params),
                        policy=embedded,
                        objective=out.econ_loss + chi * out.mortality,
                        penalty=out.penalty,
                        evaluations=1,
                        seed=config.seed,
                    )
                )
    return pareto_filter([p for p in pool if p.penalty == 0.0] or pool)


def nested_sweeps(
    params: ModelParams,
    chi_grid: Sequence[float],
    families=FAMILY_ORDER,
    config: SearchConfig = SearchConfig(),
) -> dict[Family, list[FrontierPoint]]:
    """Sweep families from coarse to fine, seeding each with the previous family's optimum per chi."""
    families = sorted({Family.parse(f) for f in families}, key=FAMILY_ORDER.index)
    out: dict[Family, list[FrontierPoint]] = {}
    previous: list[FrontierPoint] | None = None
    for fam in families:
        seeds = [[p.policy] for p in previous] if previous is not None else None
        out[fam] = sweep(fam, params, chi_grid, config, seeds)
        previous = out[fam]
    return out


def nested_frontiers(
    params: ModelParams,
    chi_grid: Sequence[float],
    families=FAMILY_ORDER,
    config: SearchConfig = SearchConfig(),
) -> tuple[dict[Family, list[FrontierPoint]], dict[Family, list[FrontierPoint]]]:
    """Per-chi sweeps and Pareto frontiers for nested families.

    A finer family's candidate pool includes the coarser family's frontier
    points re-expressed in its own coordinates, since those policies belong
    to it as well.
    """
    sweeps = nested_sweeps(params, chi_grid, families, config)
    fronts: dict[Family, list[FrontierPoint]] = {}
    previous: list[FrontierPoint] = []
    for fam in sweeps:
        pool = list(sweeps[fam]) + [replace(p, policy=p.policy.embed(fam)) for p in previous]
        fronts[fam] = pareto_filter([p for p in pool if p.penalty == 0.0] or pool)
        previous = fronts[fam]
    return sweeps, fronts


def safety_policy(
    family,
    params: ModelParams,
    mortality_cap: float,
    config: SearchConfig = SearchConfig(),
    seeds: Iterable[PolicySchedule] = (),
    max_iter: int = 25,
) -> FrontierPoint:
    """Cheapest policy found whose mortality stays at or below ``mortality_cap``.

    Bisects chi on a log scale inside ``CHI_BRACKET`` until the optimized
    mortality lands in ``[0.95 cap, cap]``; returns the feasible candidate
    with the lowest economic loss among everything evaluated.
    """
    family = Family.parse(family)
    full = PolicySchedule.constant(family, params.horizon, 1.0, config.knots)
    full_out = evaluate_policy(full, params, 0.0, config.dt)
    if full_out.mortality > mortality_cap:
        raise InfeasibleCapError(
            f"even full shielding gives mortality {full_out.mortality:.5g} > cap {mortality_cap:.5g}"
        )
    seeds = list(seeds)
    feasible: list[FrontierPoint] = []
    evals = 0

    def run(chi: float) -> FrontierPoint:
        nonlocal evals
        warm = seeds + [p.policy for p in feasible[-2:]]
        p = optimize_policy(family, params, chi, config, warm)
        evals += p.evaluations
        if p.mortality <= mortality_cap and p.penalty == 0.0:
            feasible.append(p)
        return p

    first = run(CHI_BRACKET[0])
    if first.mortality <= mortality_cap:
        return replace(first, evaluations=evals)
    lo, hi = 0.0, math.log10(CHI_BRACKET[1])  # log10 chi; chi = 1 stands in for the zero end
    hit = False
    for _ in range(max_iter - 1):
        mid = 0.5 * (lo + hi)
        p = run(10.0**mid)
        if p.mortality > mortality_cap:
            lo = mid
        else:
            hi = mid
            if p.mortality >= 0.95 * mortality_cap:
                hit = True
                break
    if not feasible:
        out = evaluate_policy(full, params, 0.0, config.dt)
        return FrontierPoint(
            chi=CHI_BRACKET[1],
            mortality=out.mortality,
            econ_loss=out.econ_loss,
            econ_loss_pct_gdp=pct_gdp(out.econ_loss, params),
            policy=full,
            objective=out.econ_loss + CHI_BRACKET[1] * out.mortality,
            evaluations=evals,
            converged=False,
            seed=config.seed,
        )
    best = min(feasible, key=lambda p: (p.econ_loss, p.mortality))
    return replace(best, evaluations=evals, converged=hit)


def recheck(point: FrontierPoint, params: ModelParams, dt: float = DEFAULT_DT):
    """Full trajectory for a stored point (for plots and audits)."""
    return integrate(params, point.policy, dt)
