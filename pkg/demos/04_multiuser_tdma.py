"""Several users served in turn with one PA placement for all slots.

Water-filling first on a toy problem, then sum rate against the number of
users for one seeded draw.
"""

import numpy as np

from swan_isac import Position3D, SearchConfig, SwanLayout, TdmaProblem, water_fill
from swan_isac.experiments import default_scenario, draw_users
from swan_isac.multiuser import solve_sa_multi, solve_sm_multi, solve_ss_multi

# Strong slots get more power; the weak slot sits at its floor.
g = np.array([8.0, 2.0, 0.3])
floors = np.array([0.0, 0.0, 0.2])
P, level = water_fill(g, floors, 1.0, return_level=True)
print("powers", np.round(P, 4), "level", round(level, 4))

cfg = default_scenario()
st = Position3D(10.0, -6.0)
lay = (SwanLayout.uniform(15, cfg.D_x), SwanLayout.uniform(15, cfg.D_x))
sc = SearchConfig(grid_step=5e-2)
G = 10 ** ((-50 - 30) / 10)
users = draw_users(cfg, 5, seed=0, draw=0)

print("\n K      SS      SA      SM")
for K in range(1, 6):
    prob = TdmaProblem(users[:K], st, G, 1.5, cfg.P_max)
    ss = solve_ss_multi(cfg, prob, lay, sc)
    sa = solve_sa_multi(cfg, prob, lay, sc)
    sm = solve_sm_multi(cfg, prob, lay, sc, init_tx=[sa])
    cells = [f"{s.sum_rate:7.3f}" if s.feasible else "  infea" for s in (ss, sa, sm)]
    print(f"{K:2d} " + " ".join(cells))
