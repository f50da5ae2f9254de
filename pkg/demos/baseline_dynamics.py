"""
Unmitigated epidemic in the three-group model
=============================================

Integrates the calibrated baseline with no shielding and writes the
trajectory plus three charts (share uninfected, R(t), shielding levels).
"""

from pathlib import Path

import numpy as np

from mgseir import germany_baseline, integrate
from mgseir.calibration import implied_ifr, r0
from mgseir.economics import summary
from mgseir.policy import PolicySchedule
from mgseir.reporting import trajectory_charts, write_json

out = Path(__file__).with_name("output") / "baseline"
out.mkdir(parents=True, exist_ok=True)

params = germany_baseline()
print(f"beta = {params.beta:.6f}, calibration R0 = {r0(params):.3f}")
print("implied IFR per group:", np.round(implied_ifr(params), 6))

# no shielding at all
traj = integrate(params, PolicySchedule.zero(params.horizon))
info = summary(traj)
print(f"R(0) with voluntary distancing and detection: {traj.rt[0]:.3f}")
print(f"mortality {100 * info['mortality']:.3f}% of population, "
      f"loss {info['econ_loss_pct_gdp']:.2f}% of annual GDP")
print(f"peak ICU load {traj.icu.max():.5f} on day {traj.t[np.argmax(traj.icu)]:.0f}")

# senior infections dominate deaths even though seniors are a quarter of the population
deaths = traj.final_state.D
print("share of deaths by group:", np.round(deaths / deaths.sum(), 3))

traj.to_csv(out / "trajectory.csv")
write_json(out / "summary.json", info)
for name, svg in trajectory_charts(out / "trajectory.csv").items():
    (out / name).write_text(svg)
print("wrote", sorted(p.name for p in out.iterdir()))
