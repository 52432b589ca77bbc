"""Placing receive PAs for coherent echoes, and splitting transmit power
between a user and a target.
"""

import numpy as np

from swan_isac import (InfeasibleSensingError, Position3D, SwanLayout, aggregate_gain, cascaded_channels,
                       coarse_placement, epsilon_beamformer, mrc_combiner, refine_rx_chain,
                       subspace_beamformer)
from swan_isac.experiments import default_scenario

cfg = default_scenario()
st = Position3D(10.0, -6.0)
cu = Position3D(16.0, 2.0)

# Receive chain: PAs near the target, then shifted by a fraction of a
# wavelength so all echoes arrive in phase.
tmpl = SwanLayout.uniform(10, cfg.D_x)
aligned, steps = refine_rx_chain(cfg, tmpl, st)
coarse = coarse_placement(cfg, tmpl, st)
print("segment  coarse_x   shift(mm)  2*pi turns")
for s in steps:
    print(f"{s.segment_index:7d} {s.coarse_x:9.4f} {1e3 * s.phi:10.3f} {s.l:6d}")
print(f"aggregate gain: coarse {aggregate_gain(cfg, coarse, st):.4f}, "
      f"aligned {aggregate_gain(cfg, aligned, st):.4f}")

# Transmit side, all segments active with their own weight.
tx = SwanLayout.uniform(4, cfg.D_x)
h_c = cascaded_channels(cfg, tx, cu, "tx")
h_s = cascaded_channels(cfg, tx, st, "tx")
f_s = cascaded_channels(cfg, coarse, st, "rx")
w_r = mrc_combiner(f_s)
P = cfg.P_max

def snrs(w):
    g_c = abs(h_c @ w) ** 2 / cfg.sigma_c_sq
    g_s = cfg.alpha * abs(w_r @ f_s) ** 2 * abs(h_s @ w) ** 2 / cfg.sigma_s_sq
    return g_c, g_s

print("\nrate-optimal beamformer under an echo-SNR floor")
for G_dbm in (-20, -10, -6, -4, -2):
    G = 10 ** ((G_dbm - 30) / 10)
    try:
        bf = subspace_beamformer(h_c, h_s, f_s, P, G, cfg.alpha, cfg.sigma_s_sq)
    except InfeasibleSensingError:
        print(f"floor {G_dbm:4d} dBm: out of reach with this placement")
        continue
    g_c, g_s = snrs(bf.w)
    print(f"floor {G_dbm:4d} dBm: {bf.branch:11s} rate {np.log2(1 + g_c):6.3f}  "
          f"echo SNR {10 * np.log10(g_s) + 30:7.2f} dBm")

print("\npower-split family used for multiple users")
for eps in np.arange(0, 1.01, 0.25):
    g_c, g_s = snrs(epsilon_beamformer(h_c, h_s, P, eps))
    print(f"eps {eps:.2f}: rate {np.log2(1 + g_c):6.3f}  echo SNR {10 * np.log10(g_s) + 30:7.2f} dBm")
