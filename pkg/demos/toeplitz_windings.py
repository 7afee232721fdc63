"""
Windings on the circle
======================

Pure pseudodifferential windings e^{iwx} P_+ + P_- have index -w.  Here the
analytic index (finite sections and the regularizer trace) is compared with
the cycle-trace formula on the cosphere bundle.
"""

import numpy as np

from shiftindex import gallery
from shiftindex.analytic import index_regularizer, index_svd
from shiftindex.quadrature import cosphere_circle
from shiftindex.topo import ind_t

cyc = cosphere_circle(256)

print(f"{'w':>3} {'svd':>5} {'reg':>5} {'ind_t':>22}")
for w in range(-3, 4):
    ex = gallery.winding(w)
    sv = index_svd(ex.operator, 0.0, (16, 32, 64, 128))
    rg = index_regularizer(ex.operator)
    top = ind_t(ex.symbol(), cyc)
    print(f"{w:>3} {sv.index:>5} {rg.index:>5} {top.value.real:>22.15f}")

# The finite-section table shows where the plateau starts
sv = index_svd(gallery.winding(2).operator, 0.0, (4, 8, 16, 32))
for row in sv.table:
    print(row["N"], row["ker"], row["coker"], row["index"], f"gap {row['gap']:.2e}")
