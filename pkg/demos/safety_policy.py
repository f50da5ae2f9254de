"""
Keeping mortality below 0.2 percent
===================================

Finds the cheapest uniform and semi-targeted policies that hold population
mortality at or below 0.2% for three vaccine arrival dates.
"""

from mgseir import germany_baseline
from mgseir.optimize import REDUCED_SEARCH, safety_policy
from mgseir.scenarios import apply_scenario, scenario_catalog

CAP = 0.002
base = germany_baseline()
catalog = scenario_catalog()

for T in (546, 364, 182):
    params = apply_scenario(base, catalog[f"vaccine_{T}"])
    row = []
    for fam in ("uniform", "semi"):
        p = safety_policy(fam, params, CAP, REDUCED_SEARCH)
        row.append(f"{fam}: loss {p.econ_loss_pct_gdp:6.2f}% GDP, mortality {100 * p.mortality:.3f}%")
    print(f"vaccine on day {T}: " + " | ".join(row))
