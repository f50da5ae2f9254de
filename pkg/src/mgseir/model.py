"""Parameter and state types for the three-group SEIR model.

All containers are frozen dataclasses. Arrays handed out by properties are
fresh copies or read-only views, so a ``ModelParams`` can be shared freely
between concurrent evaluations.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

YEAR_DAYS = 365
HORIZON_DAYS = 546


class GroupId(enum.IntEnum):
    YOUNG = 0
    MIDDLE = 1
    SENIOR = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: "str | int | GroupId") -> "GroupId":
        if isinstance(value, str):
            key = value.strip().upper()
            aliases = {"Y": "YOUNG", "M": "MIDDLE", "S": "SENIOR", "O": "SENIOR"}
            return cls[aliases.get(key, key)]
        return cls(int(value))


GROUPS = tuple(GroupId)
GROUP_SUFFIX = ("y", "m", "s")
COMPARTMENTS = ("S", "E", "I", "R", "D")

PRE_DISTANCING_RHO = (
    (1.0, 0.5, 0.4),
    (0.5, 0.6, 0.4),
    (0.4, 0.4, 0.5),
)
VOLUNTARY_DISTANCING = 0.75


class ConfigError(ValueError):
    """Raised for malformed or invalid parameter files."""


@dataclass(frozen=True)
class ContactMatrix:
    """Symmetric 3x3 matrix of contact-rate multipliers on the transmission rate."""

    rho: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        arr = np.asarray(self.rho, dtype=float)
        if arr.shape != (3, 3):
            raise ValueError(f"contact matrix must be 3x3, got shape {arr.shape}")
        object.__setattr__(self, "rho", tuple(tuple(float(v) for v in row) for row in arr))

    @classmethod
    def from_array(cls, arr) -> "ContactMatrix":
        return cls(tuple(map(tuple, np.asarray(arr, dtype=float))))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.rho, dtype=float)

    def __getitem__(self, jk):
        j, k = jk
        return self.rho[int(j)][int(k)]

    def is_symmetric(self) -> bool:
        a = self.array
        return bool(np.array_equal(a, a.T))


PRE_DISTANCING = ContactMatrix(PRE_DISTANCING_RHO)


def _normalize_mask(mask) -> set[tuple[int, int]]:
    if mask == "all":
        return {(j, k) for j in range(3) for k in range(3)}
    pairs = set()
    for j, k in mask:
        j, k = int(GroupId.parse(j)), int(GroupId.parse(k))
        pairs.add((j, k))
        pairs.add((k, j))
    return pairs


def scale_contacts(m: ContactMatrix, mask, factor: float) -> ContactMatrix:
    """Multiply the entries selected by ``mask`` by ``factor``.

    ``mask`` is an iterable of ``(j, k)`` pairs (group ids, ints or names) or
    the string ``"all"``. The mask is symmetrized, so passing ``(y, s)`` also
    scales ``(s, y)``.
    """
    factor = float(factor)
    if not factor >= 0:
        raise ValueError(f"scale factor must be nonnegative, got {factor}")
    arr = m.array
    for j, k in _normalize_mask(mask):
        arr[j, k] = arr[j, k] * factor
    return ContactMatrix.from_array(arr)


def set_contacts(m: ContactMatrix, mask, value: float) -> ContactMatrix:
    """Overwrite the masked entries (symmetrized) with an absolute value."""
    value = float(value)
    if not value >= 0:
        raise ValueError(f"contact rate must be nonnegative, got {value}")
    arr = m.array
    for j, k in _normalize_mask(mask):
        arr[j, k] = value
    return ContactMatrix.from_array(arr)


@dataclass(frozen=True)
class GroupParams:
    """Epidemiological and economic constants of one age group.

    Rates are per day, ``remaining_employment`` is in days, ``income`` is
    relative to the young group's daily income.
    """

    population_share: float
    income: float
    remaining_employment: float
    icu_share: float
    baseline_death_rate: float
    latent_exit: float
    infectious_exit: float
    shielding_leakage: float
    shielded_productivity: float
    undetected_infectious: float
    undetected_exposed: float
    immunity_passport: float


GROUP_FIELDS = tuple(f.name for f in dataclasses.fields(GroupParams))


@dataclass(frozen=True)
class ModelParams:
    groups: tuple[GroupParams, GroupParams, GroupParams]
    contacts: ContactMatrix
    beta: float
    matching_alpha: float = 2.0
    mortality_lambda: float = 0.6
    icu_cap: float | None = None
    horizon: float = HORIZON_DAYS
    initial_exposed_share: float = 0.003
    # pre-distancing matrix used to calibrate beta; never used for transmission
    reference_contacts: ContactMatrix = field(default=PRE_DISTANCING)

    def __post_init__(self):
        if len(self.groups) != 3:
            raise ValueError("exactly three groups are required")
        object.__setattr__(self, "groups", tuple(self.groups))

    def group_array(self, name: str) -> np.ndarray:
        return np.array([getattr(g, name) for g in self.groups], dtype=float)

    @cached_property
    def packed(self) -> np.ndarray:
        """Group constants as a (12, 3) array in ``GROUP_FIELDS`` order (read-only)."""
        arr = np.array([[getattr(g, name) for g in self.groups] for name in GROUP_FIELDS], dtype=float)
        arr.flags.writeable = False
        return arr

    @cached_property
    def rho(self) -> np.ndarray:
        arr = self.contacts.array
        arr.flags.writeable = False
        return arr

    def with_group_values(self, name: str, values) -> "ModelParams":
        """Return a copy with group field ``name`` set per group.

        ``values`` is a scalar (applied to all groups), a length-3 sequence, or
        a mapping from group id to value (other groups unchanged).
        """
        if name not in GROUP_FIELDS:
            raise KeyError(name)
        if isinstance(values, Mapping):
            updates = {int(GroupId.parse(k)): float(v) for k, v in values.items()}
        elif np.ndim(values) == 0:
            updates = {j: float(values) for j in range(3)}
        else:
            updates = {j: float(v) for j, v in enumerate(values)}
        groups = tuple(
            replace(g, **{name: updates[j]}) if j in updates else g for j, g in enumerate(self.groups)
        )
        return replace(self, groups=groups)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def annual_gdp(self) -> float:
        """Income units produced per year without shielding or disease."""
        return float(np.dot(self.group_array("income"), self.group_array("population_share")) * YEAR_DAYS)


@dataclass(frozen=True, eq=False)
class ModelState:
    """Compartments as fractions of the total population.

    ``compartments`` has shape (3, 5): rows are groups, columns S, E, I, R, D.
    """

    compartments: np.ndarray
    accumulated_loss: float = 0.0

    def __post_init__(self):
        arr = np.array(self.compartments, dtype=float).reshape(3, 5)
        arr.flags.writeable = False
        object.__setattr__(self, "compartments", arr)

    S = property(lambda self: self.compartments[:, 0])
    E = property(lambda self: self.compartments[:, 1])
    I = property(lambda self: self.compartments[:, 2])
    R = property(lambda self: self.compartments[:, 3])
    D = property(lambda self: self.compartments[:, 4])

    @property
    def group_totals(self) -> np.ndarray:
        return self.compartments.sum(axis=1)

    def __eq__(self, other):
        if not isinstance(other, ModelState):
            return NotImplemented
        return bool(np.array_equal(self.compartments, other.compartments)) and (
            self.accumulated_loss == other.accumulated_loss
        )

    @classmethod
    def from_groups(cls, rows: Iterable[Iterable[float]], accumulated_loss: float = 0.0) -> "ModelState":
        return cls(np.asarray(list(map(list, rows)), dtype=float), accumulated_loss)


def initial_state(params: ModelParams) -> ModelState:
    """Almost entirely susceptible population with a share of every group exposed."""
    n = params.group_array("population_share")
    e0 = params.initial_exposed_share
    comp = np.zeros((3, 5))
    comp[:, 0] = n * (1.0 - e0)
    comp[:, 1] = n * e0
    return ModelState(comp)


def germany_baseline() -> ModelParams:
    """German calibration with documented placeholders for ICU shares, leakage and seeding."""
    from .calibration import calibrate_beta

    shares = (0.46, 0.28, 0.26)
    income = (1.0, 1.0, 0.085)
    years_employed = (32.43, 10.44, 2.50)
    death_rate = (0.001, 0.01, 0.06)
    # not given in the source calibration; placeholders
    icu_share = (0.002, 0.02, 0.08)
    leakage = 0.75
    groups = tuple(
        GroupParams(
            population_share=shares[j],
            income=income[j],
            remaining_employment=years_employed[j] * YEAR_DAYS,
            icu_share=icu_share[j],
            baseline_death_rate=death_rate[j],
            latent_exit=1.0 / 6.0,
            infectious_exit=1.0 / 9.0,
            shielding_leakage=leakage,
            shielded_productivity=0.3,
            undetected_infectious=0.9,
            undetected_exposed=1.0,
            immunity_passport=1.0,
        )
        for j in range(3)
    )
    params = ModelParams(
        groups=groups,
        contacts=scale_contacts(PRE_DISTANCING, "all", VOLUNTARY_DISTANCING),
        beta=1.0,
        matching_alpha=2.0,
        mortality_lambda=0.6,
        icu_cap=None,
        horizon=HORIZON_DAYS,
        initial_exposed_share=0.003,
        reference_contacts=PRE_DISTANCING,
    )
    return replace(params, beta=calibrate_beta(params, 2.4))


_UNIT_FIELDS = (
    "icu_share",
    "shielded_productivity",
    "undetected_infectious",
    "undetected_exposed",
    "immunity_passport",
    "population_share",
)
_RATE_FIELDS = ("income", "remaining_employment", "baseline_death_rate", "latent_exit", "infectious_exit")


def validate(params: ModelParams) -> list[str]:
    """Return every invariant violation as a readable message; empty means valid."""
    problems = []
    names = [g.label for g in GROUPS]
    shares = params.group_array("population_share")
    if abs(shares.sum() - 1.0) > 1e-12:
        problems.append(f"population shares sum to {shares.sum():.12g}")
    for j, g in enumerate(params.groups):
        for name in GROUP_FIELDS:
            value = getattr(g, name)
            if not np.isfinite(value):
                problems.append(f"{name}[{names[j]}] is not finite")
        for name in _RATE_FIELDS:
            if getattr(g, name) < 0:
                problems.append(f"{name}[{names[j]}] must be >= 0")
        for name in _UNIT_FIELDS:
            v = getattr(g, name)
            if not 0.0 <= v <= 1.0:
                problems.append(f"{name}[{names[j]}] must lie in [0, 1]")
        if not 0.0 <= g.shielding_leakage < 1.0:
            if g.shielding_leakage >= 1.0:
                problems.append(f"shielding_leakage[{names[j]}] must be < 1")
            else:
                problems.append(f"shielding_leakage[{names[j]}] must be >= 0")
        if g.baseline_death_rate > g.infectious_exit:
            problems.append(f"baseline_death_rate[{names[j]}] must not exceed infectious_exit[{names[j]}]")
    for label, m in (("contacts", params.contacts), ("reference_contacts", params.reference_contacts)):
        a = m.array
        if not np.all(np.isfinite(a)):
            problems.append(f"{label} has non-finite entries")
        if np.any(a < 0):
            problems.append(f"{label} has negative entries")
        if not np.array_equal(a, a.T):
            problems.append(f"{label} is not symmetric")
    if not params.beta > 0:
        problems.append("beta must be > 0")
    if not params.matching_alpha >= 2:
        problems.append("matching_alpha must be >= 2")
    if not params.mortality_lambda >= 0:
        problems.append("mortality_lambda must be >= 0")
    if not params.horizon > 0:
        problems.append("horizon must be > 0")
    if not 0.0 <= params.initial_exposed_share <= 0.05:
        problems.append("initial_exposed_share must lie in [0, 0.05]")
    if params.icu_cap is not None and not params.icu_cap > 0:
        problems.append("icu_cap must be > 0 when set")
    return problems


# -- parameter files ---------------------------------------------------------

_TOP_FIELDS = (
    "groups",
    "contacts",
    "beta",
    "matching_alpha",
    "mortality_lambda",
    "icu_cap",
    "horizon",
    "initial_exposed_share",
    "reference_contacts",
)


def params_to_dict(params: ModelParams) -> dict[str, Any]:
    return {
        "groups": {g.label: dataclasses.asdict(params.groups[g]) for g in GROUPS},
        "contacts": {"rho": [list(r) for r in params.contacts.rho]},
        "beta": params.beta,
        "matching_alpha": params.matching_alpha,
        "mortality_lambda": params.mortality_lambda,
        "icu_cap": params.icu_cap,
        "horizon": params.horizon,
        "initial_exposed_share": params.initial_exposed_share,
        "reference_contacts": {"rho": [list(r) for r in params.reference_contacts.rho]},
    }


def _contacts_from(value, where: str) -> ContactMatrix:
    if isinstance(value, Mapping):
        extra = set(value) - {"rho"}
        if extra:
            raise ConfigError(f"unknown field(s) in {where}: {sorted(extra)}")
        value = value.get("rho")
    try:
        return ContactMatrix.from_array(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def params_from_dict(tree: Mapping[str, Any], base: ModelParams | None = None) -> ModelParams:
    """Overlay a JSON-compatible tree on ``base`` (default: the German baseline).

    Unknown fields raise ``ConfigError``. The result is not validated here.
    """
    if base is None:
        base = germany_baseline()
    if not isinstance(tree, Mapping):
        raise ConfigError("parameter tree must be a mapping")
    unknown = set(tree) - set(_TOP_FIELDS)
    if unknown:
        raise ConfigError(f"unknown parameter field(s): {sorted(unknown)}")
    params = base
    groups_tree = tree.get("groups", {})
    if not isinstance(groups_tree, Mapping):
        raise ConfigError("groups must be a mapping of group name to fields")
    for gname, gtree in groups_tree.items():
        try:
            gid = GroupId.parse(gname)
        except (KeyError, ValueError):
            raise ConfigError(f"unknown group {gname!r}") from None
        extra = set(gtree) - set(GROUP_FIELDS)
        if extra:
            raise ConfigError(f"unknown field(s) in groups.{gname}: {sorted(extra)}")
        for name, value in gtree.items():
            try:
                params = params.with_group_values(name, {gid: float(value)})
            except (TypeError, ValueError):
                raise ConfigError(f"groups.{gname}.{name} must be a number") from None
    changes: dict[str, Any] = {}
    for name in ("contacts", "reference_contacts"):
        if name in tree:
            changes[name] = _contacts_from(tree[name], name)
    for name in ("beta", "matching_alpha", "mortality_lambda", "horizon", "initial_exposed_share"):
        if name in tree:
            try:
                changes[name] = float(tree[name])
            except (TypeError, ValueError):
                raise ConfigError(f"{name} must be a number") from None
    if "icu_cap" in tree:
        changes["icu_cap"] = None if tree["icu_cap"] is None else float(tree["icu_cap"])
    return replace(params, **changes)


def load_params(path: str | Path, base: ModelParams | None = None) -> ModelParams:
    try:
        tree = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return params_from_dict(tree, base)
