"""
Testing, distancing and working from home
=========================================

Optimizes a semi-targeted policy at one life weight under several
intervention scenarios, each search seeded with the baseline optimum.
"""

from mgseir import germany_baseline
from mgseir.optimize import REDUCED_SEARCH, optimize_policy
from mgseir.scenarios import apply_scenario, scenario_catalog

CHI = 20_000.0
NAMES = ["baseline", "testing_0.7", "tracing_0.7", "uniform_distancing_30",
         "targeted_distancing_50", "wfh_v1", "comprehensive"]

base = germany_baseline()
catalog = scenario_catalog()
anchor = optimize_policy("semi", base, CHI, REDUCED_SEARCH)

print(f"{'scenario':24s} {'mortality %':>11s} {'loss % GDP':>10s} {'senior shield':>13s}")
for name in NAMES:
    params = apply_scenario(base, catalog[name])
    point = optimize_policy("semi", params, CHI, REDUCED_SEARCH, [anchor.policy])
    senior = point.policy.group_levels()[2]
    print(f"{name:24s} {100 * point.mortality:11.3f} {point.econ_loss_pct_gdp:10.2f} {senior.mean():13.2f}")
