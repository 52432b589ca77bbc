"""How much does cutting a long waveguide into segments help sensing?

Prints the segment-selection gain against a single long waveguide (closed
form next to a Monte Carlo estimate), then the aggregation and multiplexing
gains for a target in the middle of the area.
"""

import numpy as np

from swan_isac import (Position3D, gain_ss_closed, gain_ss_oracle, optimal_segment_count_sa,
                       sa_gain_centered, sm_gain_centered)
from swan_isac.experiments import default_scenario

cfg = default_scenario()

print("segment selection, N = M segments")
print(f"{'D_x':>5} {'N':>4} {'closed':>9} {'oracle':>9} {'limit':>8}")
for D in (50.0, 200.0):
    for i, n in enumerate((1, 4, 16, 64)):
        c = gain_ss_closed(cfg, D, n, n)
        o = gain_ss_oracle(cfg, D, n, n, n_samples=200_000, seed=i)
        print(f"{D:5.0f} {n:4d} {c.eta:9.4f} {o.eta:9.4f} {c.eta_asymptotic:8.3f}")

# Target at the area centre: perpendicular distances to both waveguides.
st = Position3D(10.0, -6.0)
dt, dr = cfg.delta_tx(st), cfg.delta_rx(st)
print(f"\ntarget distances: Tx {dt:.3f} m, Rx {dr:.3f} m")

D = 200.0
print(f"\naggregation vs multiplexing on a {D:.0f} m area")
print(f"{'N':>4} {'SA eta':>10} {'SM eta':>10}")
for n in (1, 3, 5, 9, 15, 31, 61):
    sa = sa_gain_centered(cfg, D, n, n, dt, dr).eta
    sm = sm_gain_centered(cfg, D, n, n, dt, dr).eta
    print(f"{n:4d} {sa:10.3f} {sm:10.3f}")

# Aggregation splits power and adds noise per segment, so a few segments
# can do worse than one; the dip sits near the optimal-count formula.
for side, delta in (("Tx", dt), ("Rx", dr)):
    n_star = optimal_segment_count_sa(D, delta)
    print(f"{side}: aggregation gain bottoms out near N = {n_star:.2f}")

grid = np.arange(1, 62, 2)
eta = [sa_gain_centered(cfg, D, n, 1, dt, dr).eta for n in grid]
print(f"Tx factor alone, odd grid: minimum at N = {grid[int(np.argmin(eta))]}")
