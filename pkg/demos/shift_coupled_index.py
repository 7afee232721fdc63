"""
An operator with shifts
=======================

D = e^{ix} P_+ (1 + c T) + d P_+ T^{-1} + P_- on the circle, with T the
rotation by 2 pi theta.  Its symbol is a banded matrix along each orbit, so
the index formula needs the l^2(Z) window and honest matrix inverses.
"""

import numpy as np

from shiftindex import gallery
from shiftindex.analytic import index_regularizer, index_svd, parametrix, remainder_orders
from shiftindex.geometry import check_ellipticity
from shiftindex.quadrature import cosphere_circle
from shiftindex.topo import ind_t

ex = gallery.get("shift_winding")
D = ex.operator
sigma = ex.symbol()

# ellipticity along the orbit: smallest singular values of the symbol matrices
x = np.linspace(0, 2 * np.pi, 64, endpoint=False)
for sgn in (1.0, -1.0):
    rep = check_ellipticity(sigma, {"x": x, "xi": np.full(64, sgn)}, 1e3, W=24)
    print(f"xi = {sgn:+.0f}: elliptic {rep.passed}, worst inverse norm {rep.worst_norm:.3f}")

R = parametrix(D, W=16)
print("remainder orders", {k: round(v, 2) for k, v in remainder_orders(D, R).items()})

sv = index_svd(D, 0.0, (32, 64, 128, 256))
rg = index_regularizer(D, R=R)
print("finite sections", sv.index, sv.status)
print("regularizer    ", rg.index, f"value {rg.value:.12f}")

for W in (4, 8, 16):
    r = ind_t(sigma, cosphere_circle(256), W=W, error=True)
    print(f"ind_t W={W:2d}: {r.value.real:.14f}  quad {r.quad_err:.1e}  tail {r.tail_err:.1e}")
