"""
Bott normalization and the product with (t + i tau)
===================================================

The orientation of every sphere is fixed by asking the Bott symbol to have
index +1.  With that fixed, the external product with t + i tau leaves the
index unchanged.
"""

from shiftindex import gallery
from shiftindex.geometry import FlatModel, GOLDEN
from shiftindex.quadrature import bott_circle, cosphere_circle, cylinder_sphere
from shiftindex.topo import bott_symbol, external_product, ind_t

r = ind_t(bott_symbol(FlatModel(1, (GOLDEN,))), bott_circle(64))
print(f"Bott: {r.value.real:.15f}")

cyl = cylinder_sphere(32, 12, 4)
for name in ("winding_2", "shift_winding", "twisted_shift", "order1_winding"):
    ex = gallery.get(name)
    s = ex.symbol()
    a = ind_t(s, cosphere_circle(256), W=ex.window).value.real
    b = ind_t(external_product(s), cyl, W=ex.window).value.real
    print(f"{name:16s} {a:+.12f} {b:+.12f}  defect {abs(a - b):.1e}")
