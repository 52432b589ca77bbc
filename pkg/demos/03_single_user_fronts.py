"""Rate versus sensing threshold for one user, all three protocols.

Uses a 5 cm search grid so it finishes in seconds; the experiment runner
uses 1 cm.
"""

from swan_isac import Position3D, SearchConfig, SwanLayout, pareto_fronts
from swan_isac.experiments import default_scenario

cfg = default_scenario().with_(D_x=50.0)
cu = Position3D(30.0, 0.0)
dbm = list(range(-36, 0, 6))
thresholds = [10 ** ((g - 30) / 10) for g in dbm]
sc = SearchConfig(grid_step=5e-2)

for xs in (5.0, 25.0):
    st = Position3D(xs, -6.0)
    for n in (15, 30):
        lay = (SwanLayout.uniform(n, cfg.D_x), SwanLayout.uniform(n, cfg.D_x))
        fronts = pareto_fronts(cfg, cu, st, thresholds, lay, sc)
        print(f"\ntarget x = {xs:g} m, {n} segments")
        print("floor(dBm) " + " ".join(f"{p.value:>8}" for p in fronts))
        for i, g in enumerate(dbm):
            row = [fr[i].achieved_rate if fr[i].feasible else float("nan") for fr in fronts.values()]
            print(f"{g:10d} " + " ".join(f"{r:8.3f}" for r in row))
