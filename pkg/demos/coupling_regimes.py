"""Weak versus strong coupling seen through the exact spin-pair oracle.

A pair whose partners sit 50 MHz apart nutates at half the single-spin
Rabi frequency, because the pulse turns only one of the two spins. Lock the
partners together with a 500 MHz exchange and both spins turn as one, so the
charge oscillates twice as fast. The closed-form ensemble curve shows the same
factor of two.

    python demos/coupling_regimes.py
"""

import math

import numpy as np

from spinpair import (CouplingRegime, PulseSpec, SpinPairParams, fft_magnitude,
                      nutation_curve, default_tau_grid, rabi_transient_oracle)
from spinpair.constants import CONSTANTS, GAMMA_PER_G
from spinpair.spectral import default_band

# %% drive strength: g gamma B1 / 2pi = 10 MHz
g = 2.008
b1 = 2 * math.pi * 10.0 / (g * GAMMA_PER_G)
grid = default_tau_grid()
print(f"B1 = {b1:.4f} mT, tau grid {grid[0]:g}..{grid[-1]:g} ns ({grid.size} points)")

# %% two pairs: Larmor split 50 MHz without coupling, identical g with J/2pi = 500 MHz
g_b = g - 50.0 / (CONSTANTS.mhz_per_mt_per_g * 350.0)
weak = SpinPairParams(g, g_b, 0.0, 0.0, 350.0)
strong = SpinPairParams(g, g, 2 * math.pi * 500.0, 0.0, 350.0)


def dominant(record):
    sp = fft_magnitude(record)
    lo, hi = default_band(sp)
    sel = (sp.freq_MHz >= lo) & (sp.freq_MHz <= hi)
    return sp.freq_MHz[sel][np.argmax(sp.mag[sel])]


for name, pair in (("weak", weak), ("strong", strong)):
    rec = rabi_transient_oracle(pair, PulseSpec(b1, pair.omega_a), grid)
    print(f"{name:>6} coupling: dominant frequency {dominant(rec):6.3f} MHz, "
          f"max density change {rec.q.max():.3f}")

# %% the inhomogeneous-line curves for the three coupling factors
taus = np.linspace(0, 400, 9)
print("\n tau/ns " + "".join(f"{r.name.lower():>22}" for r in CouplingRegime))
curves = [nutation_curve(r, b1, g, taus).q for r in CouplingRegime]
for i, t in enumerate(taus):
    print(f"{t:7.0f} " + "".join(f"{c[i]:22.3e}" for c in curves))
