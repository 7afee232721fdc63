"""
From the cylinder to the mapping torus
======================================

On the mapping torus the dilated symbol gives an R-dependent integral.  The
integrand built from the true inverse is R-independent; the one built from
the dilated cylinder inverse converges to the same limit.  The measured
rate is printed next to the fitted limit.
"""

import numpy as np

from shiftindex import gallery
from shiftindex.quadrature import mapping_torus
from shiftindex.uniformization import OrbitSymbol, fit_limit

ex = gallery.get("shift_winding")
orb = OrbitSymbol(ex.symbol())
Rs = [2, 4, 8, 16, 32]
chain, exact = [], []
for R in Rs:
    cyc = mapping_torus(R, 16, 24, 16)
    chain.append(orb.chain_value(R, cyc, 6).real)
    exact.append(orb.exact_value(R, cyc, 8).real)
    print(f"R={R:3d}  chain {chain[-1]:+.10f}  exact {exact[-1]:+.10f}")

d = np.abs(np.diff(chain))
print("successive-difference rates", np.round(-np.log2(d[:-1] / d[1:]), 3))
L, c, p, res = fit_limit(Rs, chain, terms=2)
print(f"two-term fit: L = {L:.8f}, rate = {-p:.3f}")
L, *_ = fit_limit(Rs, chain, fixed_rate=round(p), terms=3)
print(f"expansion in R^-{round(p)}, R^-{round(p) + 1}, R^-{round(p) + 2}: L = {L:.8f}")
