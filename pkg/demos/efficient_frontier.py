"""
Efficient frontiers for uniform and targeted shielding
======================================================

Sweeps the life weight chi for the three nested policy families and plots
economic loss against mortality. Reduced search settings keep the run to a
few minutes; raise ``generations`` for smoother curves.
"""

from pathlib import Path

from mgseir import germany_baseline
from mgseir.optimize import REDUCED_SEARCH, default_chi_grid, nested_frontiers
from mgseir.reporting import frontier_chart, frontier_csv, read_frontier_csv

out = Path(__file__).with_name("output") / "frontier"
out.mkdir(parents=True, exist_ok=True)

params = germany_baseline()
grid = default_chi_grid(params, 8, REDUCED_SEARCH)
print("chi grid:", ", ".join(f"{c:.3g}" for c in grid))

sweeps, fronts = nested_frontiers(params, grid, config=REDUCED_SEARCH)

for fam, front in fronts.items():
    (out / f"frontier_{fam.value}.csv").write_text(frontier_csv(front))
    print(f"\n{fam.value}: {len(front)} efficient points")
    for p in front:
        print(f"  mortality {100 * p.mortality:.3f}%  loss {p.econ_loss_pct_gdp:7.2f}% GDP")

# at each chi the finer family never does worse
for fam in list(sweeps)[1:]:
    gains = [a.objective - b.objective for a, b in zip(sweeps[list(sweeps)[0]], sweeps[fam])]
    print(f"{fam.value}: largest objective gain over uniform {max(gains):.3g}")

curves = {fam.value: read_frontier_csv(out / f"frontier_{fam.value}.csv") for fam in fronts}
(out / "frontier.svg").write_text(frontier_chart(curves))
print("wrote", out / "frontier.svg")
