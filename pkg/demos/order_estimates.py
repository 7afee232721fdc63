"""
Dilation estimates and the trace identity
=========================================

Restricting a form to the mapping torus after the dilation h_R loses powers
of R in a controlled way: a coefficient of bidegree (i, j) behaves like an
order -i-j family, and products fail to be multiplicative by one more order.
"""

from shiftindex.geometry import FlatModel, GOLDEN
from shiftindex.uniformization import order_gallery, solid_angle_form, trace_identity, trace_scaling

m = FlatModel(1, (GOLDEN,))
for f in order_gallery(m):
    print(f"{f.kind} {f.bidegree}  declared {f.declared:+d}  fitted {f.fitted:+.3f}  {'ok' if f.passed else 'FAIL'}")

rep = trace_identity(solid_angle_form(m), R_grid=(1, 2, 4), mt_sizes=(16, 48, 24))
print("tau(omega) =", rep["tau"][0], " max deviation over R:", rep["max_deviation"])

for order in (-2, -3):
    slope, _ = trace_scaling(order)
    print(f"trace of an order {order} family grows like R^{slope:.3f}")
