import numpy as np
import pytest

from mgseir import germany_baseline
from mgseir.model import ContactMatrix
from mgseir.policy import Family, PolicySchedule


@pytest.fixture(scope="session")
def base():
    return germany_baseline()


def single_group(r0_target: float, e0: float = 1e-6, horizon: float = 546.0, lam: float = 0.0):
    """Young group only, no detection, beta set so that R0 = beta * rho_yy / gamma_I."""
    p = germany_baseline()
    p = p.with_group_values("population_share", (1.0, 0.0, 0.0))
    p = p.with_group_values("undetected_infectious", 1.0).with_group_values("undetected_exposed", 1.0)
    rho = ContactMatrix.from_array(np.diag([0.75, 0.0, 0.0]))
    gi = p.groups[0].infectious_exit
    return p.replace(
        contacts=rho,
        reference_contacts=rho,
        beta=r0_target * gi / 0.75,
        mortality_lambda=lam,
        initial_exposed_share=e0,
        horizon=horizon,
    )


def zero_policy(params, family=Family.UNIFORM):
    return PolicySchedule.zero(params.horizon, family)


def random_params(rng, base):
    """Random valid parameter set around the baseline."""
    shares = rng.dirichlet(np.ones(3))
    p = base.with_group_values("population_share", shares)
    p = p.with_group_values("shielding_leakage", rng.uniform(0.05, 0.95, 3))
    p = p.with_group_values("undetected_infectious", rng.uniform(0.3, 1.0, 3))
    p = p.with_group_values("undetected_exposed", rng.uniform(0.3, 1.0, 3))
    p = p.with_group_values("icu_share", rng.uniform(0.0, 0.2, 3))
    p = p.with_group_values("immunity_passport", rng.uniform(0.0, 1.0, 3))
    p = p.with_group_values("shielded_productivity", rng.uniform(0.0, 1.0, 3))
    a = rng.uniform(0.1, 1.0, (3, 3))
    return p.replace(
        contacts=ContactMatrix.from_array((a + a.T) / 2),
        beta=base.beta * rng.uniform(0.5, 2.0),
        mortality_lambda=rng.uniform(0.0, 2.0),
        initial_exposed_share=rng.uniform(1e-5, 0.01),
    )


def random_policy(rng, params):
    fam = list(Family)[rng.integers(3)]
    return PolicySchedule.from_vector(fam, params.horizon, rng.uniform(0, 1, fam.channels * 13))


# one summary line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
