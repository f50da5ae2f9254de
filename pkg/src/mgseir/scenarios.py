"""Composable parameter transforms for intervention scenarios.

A scenario is an ordered list of ``Transform`` records applied left to right
to a baseline ``ModelParams``. Transmission is never recalibrated: a
scenario changes conditions, not the virus.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Mapping

from .model import (
    ConfigError,
    GroupId,
    ModelParams,
    scale_contacts,
    set_contacts,
    validate,
)

Y, M, S = GroupId.YOUNG, GroupId.MIDDLE, GroupId.SENIOR
WORKER_PAIRS = ((Y, Y), (M, M), (Y, M))
SENIOR_LINKS = ((Y, S), (M, S))

log = logging.getLogger(__name__)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Transform:
    name: str
    args: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in TRANSFORMS:
            raise ScenarioError(f"unknown transform {self.name!r}")
        object.__setattr__(self, "args", MappingProxyType(dict(self.args)))

    def to_dict(self) -> dict[str, Any]:
        return {"transform": self.name, "args": dict(self.args)}


@dataclass(frozen=True)
class ScenarioSpec:
    transforms: tuple[Transform, ...] = ()
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "transforms", tuple(self.transforms))

    def __add__(self, other: "ScenarioSpec") -> "ScenarioSpec":
        return ScenarioSpec(self.transforms + other.transforms, f"{self.name}+{other.name}")

    def to_list(self) -> list[dict[str, Any]]:
        return [t.to_dict() for t in self.transforms]


def _factor(value, what: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ScenarioError(f"{what} must lie in [0, 1], got {value}")
    return value


def _testing(p: ModelParams, eta_I) -> ModelParams:
    return p.with_group_values("undetected_infectious", _factor(eta_I, "eta_I"))


def _tracing(p: ModelParams, eta_E) -> ModelParams:
    return p.with_group_values("undetected_exposed", _factor(eta_E, "eta_E"))


def _uniform_distancing(p: ModelParams, factor) -> ModelParams:
    return replace(p, contacts=scale_contacts(p.contacts, "all", _factor(factor, "factor")))


def _targeted_distancing(p: ModelParams, factor=None, value=None) -> ModelParams:
    # exactly one of a scale factor or an absolute contact rate
    if (factor is None) == (value is None):
        raise ScenarioError("targeted_distancing needs exactly one of factor or value")
    if factor is not None:
        return replace(p, contacts=scale_contacts(p.contacts, SENIOR_LINKS, _factor(factor, "factor")))
    return replace(p, contacts=set_contacts(p.contacts, SENIOR_LINKS, value))


def _within_senior(p: ModelParams, factor) -> ModelParams:
    return replace(p, contacts=scale_contacts(p.contacts, [(S, S)], _factor(factor, "factor")))


def _wfh(p: ModelParams, pi1, pi2, xi_new, pi_is_factor: bool = False) -> ModelParams:
    f1, f2 = (float(pi1), float(pi2)) if pi_is_factor else (1.0 - float(pi1), 1.0 - float(pi2))
    contacts = scale_contacts(p.contacts, WORKER_PAIRS, _factor(f1, "pi1 factor"))
    contacts = scale_contacts(contacts, SENIOR_LINKS, _factor(f2, "pi2 factor"))
    return replace(p, contacts=contacts).with_group_values("shielded_productivity", _factor(xi_new, "xi"))


def _treatment(p: ModelParams, reduction) -> ModelParams:
    r = _factor(reduction, "reduction")
    dbar = p.groups[S].baseline_death_rate
    return p.with_group_values("baseline_death_rate", {S: dbar * (1.0 - r)})


def _vaccine_at(p: ModelParams, T) -> ModelParams:
    T = float(T)
    if not T > 0:
        raise ScenarioError("vaccine date must be positive")
    return replace(p, horizon=T)


def _set_lambda(p: ModelParams, value) -> ModelParams:
    if not float(value) >= 0:
        raise ScenarioError("lambda must be nonnegative")
    return replace(p, mortality_lambda=float(value))


def _icu_cap(p: ModelParams, value) -> ModelParams:
    if value is not None and not float(value) > 0:
        raise ScenarioError("ICU cap must be positive")
    return replace(p, icu_cap=None if value is None else float(value))


def _immunity(p: ModelParams, kappa) -> ModelParams:
    return p.with_group_values("immunity_passport", _factor(kappa, "kappa"))


def _senior_mortality(p: ModelParams, value) -> ModelParams:
    value = float(value)
    ceiling = p.groups[S].infectious_exit
    if value > ceiling:
        # the death-rate clamp would pin it at the exit rate anyway
        log.warning("senior death rate %.4g exceeds the infectious exit rate; using %.4g", value, ceiling)
        value = ceiling
    return p.with_group_values("baseline_death_rate", {S: value})


def _rebuild_contacts(p: ModelParams, factor) -> ModelParams:
    """Replace contacts by a rescaled copy of the pre-distancing matrix."""
    return replace(p, contacts=scale_contacts(p.reference_contacts, "all", _factor(factor, "factor")))


TRANSFORMS: Mapping[str, Callable[..., ModelParams]] = MappingProxyType(
    {
        "testing": _testing,
        "tracing": _tracing,
        "uniform_distancing": _uniform_distancing,
        "targeted_distancing": _targeted_distancing,
        "within_senior_distancing": _within_senior,
        "wfh": _wfh,
        "treatment": _treatment,
        "vaccine_at": _vaccine_at,
        "set_lambda": _set_lambda,
        "icu_cap": _icu_cap,
        "immunity": _immunity,
        "senior_mortality": _senior_mortality,
        "rebuild_contacts": _rebuild_contacts,
    }
)


def apply_scenario(base: ModelParams, spec: ScenarioSpec) -> ModelParams:
    params = base
    for t in spec.transforms:
        try:
            params = TRANSFORMS[t.name](params, **t.args)
        except TypeError as exc:
            raise ScenarioError(f"bad arguments for {t.name}: {exc}") from None
    problems = validate(params)
    if problems:
        raise ScenarioError(f"scenario {spec.name!r} yields invalid parameters: " + "; ".join(problems))
    return params


def _spec(name: str, *steps: tuple[str, dict]) -> ScenarioSpec:
    return ScenarioSpec(tuple(Transform(n, a) for n, a in steps), name)


def _build_catalog() -> dict[str, ScenarioSpec]:
    cat = {"baseline": _spec("baseline")}
    for pct in (10, 20, 30, 40):
        cat[f"uniform_distancing_{pct}"] = _spec(
            f"uniform_distancing_{pct}", ("uniform_distancing", {"factor": 1 - pct / 100})
        )
    for pct in (10, 30, 50):
        cat[f"targeted_distancing_{pct}"] = _spec(
            f"targeted_distancing_{pct}", ("targeted_distancing", {"factor": 1 - pct / 100})
        )
    for eta in (0.9, 0.8, 0.7):
        cat[f"testing_{eta}"] = _spec(f"testing_{eta}", ("testing", {"eta_I": eta}))
        cat[f"tracing_{eta}"] = _spec(f"tracing_{eta}", ("tracing", {"eta_E": eta}))
    for eta_i, eta_e in ((0.8, 0.8), (0.7, 0.8), (0.7, 0.7)):
        name = f"test_and_trace_{eta_i}_{eta_e}"
        cat[name] = _spec(name, ("testing", {"eta_I": eta_i}), ("tracing", {"eta_E": eta_e}))
    cat["wfh_v1"] = _spec("wfh_v1", ("wfh", {"pi1": 0.20, "pi2": 0.05, "xi_new": 0.4}))
    cat["wfh_v2"] = _spec("wfh_v2", ("wfh", {"pi1": 0.30, "pi2": 0.10, "xi_new": 0.4}))
    # "rho_ys = rho_ms = 0.2" read as an absolute contact rate (baseline 0.3)
    comprehensive = (
        ("testing", {"eta_I": 0.7}),
        ("tracing", {"eta_E": 0.8}),
        ("targeted_distancing", {"value": 0.2}),
    )
    cat["comprehensive"] = _spec("comprehensive", *comprehensive)
    cat["comprehensive_wfh"] = _spec(
        "comprehensive_wfh", *comprehensive, ("wfh", {"pi1": 0.20, "pi2": 0.05, "xi_new": 0.4})
    )
    for pct in (30, 50):
        cat[f"treatment_{pct}"] = _spec(f"treatment_{pct}", ("treatment", {"reduction": pct / 100}))
    for T in (546, 364, 182):
        cat[f"vaccine_{T}"] = _spec(f"vaccine_{T}", ("vaccine_at", {"T": T}))
    for lam in (0.2, 0.4, 0.6, 0.8, 1.0):
        cat[f"lambda_{lam}"] = _spec(f"lambda_{lam}", ("set_lambda", {"value": lam}))
    for cap in (0.02, 0.03, 0.04):
        cat[f"icu_cap_{cap}"] = _spec(f"icu_cap_{cap}", ("icu_cap", {"value": cap}))
    for f in (0.9, 1.0):
        cat[f"rho_{f}"] = _spec(f"rho_{f}", ("rebuild_contacts", {"factor": f}))
    cat["kappa_0"] = _spec("kappa_0", ("immunity", {"kappa": 0.0}))
    cat["senior_mortality_0.12"] = _spec("senior_mortality_0.12", ("senior_mortality", {"value": 0.12}))
    cat["gd_uniform_40_treatment_50"] = _spec(
        "gd_uniform_40_treatment_50", ("uniform_distancing", {"factor": 0.6}), ("treatment", {"reduction": 0.5})
    )
    cat["gd_targeted_50_treatment_50"] = _spec(
        "gd_targeted_50_treatment_50",
        ("targeted_distancing", {"factor": 0.5}),
        ("treatment", {"reduction": 0.5}),
    )
    return cat


_CATALOG = MappingProxyType(_build_catalog())


def scenario_catalog() -> Mapping[str, ScenarioSpec]:
    return _CATALOG


def spec_from_list(items, name: str = "custom") -> ScenarioSpec:
    """Build a spec from ``[{"transform": ..., "args": {...}}, ...]``; strings name catalog entries."""
    if isinstance(items, Mapping):
        items = [items]
    spec = ScenarioSpec((), name)
    for item in items:
        if isinstance(item, str):
            spec = ScenarioSpec(spec.transforms + resolve_scenario(item).transforms, name)
            continue
        unknown = set(item) - {"transform", "args"}
        if unknown:
            raise ScenarioError(f"unknown scenario field(s): {sorted(unknown)}")
        spec = ScenarioSpec(spec.transforms + (Transform(item["transform"], item.get("args", {})),), name)
    return spec


def resolve_scenario(ref: str) -> ScenarioSpec:
    """A catalog name or a path to a JSON scenario file."""
    if ref in _CATALOG:
        return _CATALOG[ref]
    path = Path(ref)
    if path.exists():
        try:
            items = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return spec_from_list(items, path.stem)
    raise ScenarioError(f"unknown scenario {ref!r}")
