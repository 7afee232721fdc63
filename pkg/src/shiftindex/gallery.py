"""Named example operators with independently known indices."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import GOLDEN, RATIONAL, FlatModel, TrigPolynomial
from .analytic import ShiftOperator, Term


@dataclass
class Example:
    name: str
    operator: object  # ShiftOperator, or None for the Bott symbol
    expected: int
    description: str = ""
    s: float = 0.0
    window: int = 0  # l^2(Z) window for symbol computations
    coupled: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def model(self):
        return self.operator.model if self.operator is not None else FlatModel(1, (GOLDEN,))

    def symbol(self):
        return self.operator.symbol()


def _c(c, dim=1):
    return TrigPolynomial.const(c, dim)


def _e(freq, c=1.0):
    return TrigPolynomial.mono(freq, c)


def winding(w, theta=GOLDEN, name=None):
    """e^{iwx} P_+ + P_-, a Toeplitz-type operator of index -w."""
    name = name or f"winding_{w}"
    m = FlatModel(1, (theta,))
    D = ShiftOperator(m, [Term(0, _e(w), "P+"), Term(0, _c(1), "P-")], 0, name)
    return Example(name, D, -w, "pure psiDO winding", 0.0, 0)


def shift_winding(theta=GOLDEN, w=1, c=0.25, d=0.1, name="shift_winding"):
    """e^{iwx} P_+ (1 + c T) + d P_+ T^-1 + P_-; small shift terms keep the winding class."""
    m = FlatModel(1, (theta,))
    terms = [Term(0, _e(w), "P+"), Term(1, _e(w, c), "P+"), Term(0, _c(1), "P-")]
    if d:
        terms.append(Term(-1, _c(d), "P+"))
    return Example(name, ShiftOperator(m, terms, 0, name), -w, "winding with shift coupling", 0.0, 10, True)


def twisted_shift(theta=RATIONAL):
    """e^{ix} P_+ T + P_-: the shift itself carries the ellipticity on xi > 0."""
    m = FlatModel(1, (theta,))
    D = ShiftOperator(m, [Term(1, _e(1), "P+"), Term(0, _c(1), "P-")], 0, "twisted_shift")
    return Example("twisted_shift", D, -1, "pure shift on the positive sheet", 0.0, 10, True)


def coupled_invertible(theta=GOLDEN, c=0.4):
    m = FlatModel(1, (theta,))
    D = ShiftOperator(m, [Term(0, _c(1), "1"), Term(1, _e(1, c), "1")], 0, "coupled_invertible")
    return Example("coupled_invertible", D, 0, "1 + c e^{ix} T, |c| < 1", 0.0, 10, True)


def identity(theta=GOLDEN):
    m = FlatModel(1, (theta,))
    return Example("identity", ShiftOperator(m, [Term(0, _c(1), "1")], 0, "identity"), 0, "identity", 0.0, 0)


def derivative(theta=GOLDEN):
    m = FlatModel(1, (theta,))
    D = ShiftOperator(m, [Term(0, _c(1), "xi"), Term(0, _c(0.5), "1")], 1, "derivative")
    return Example("derivative", D, 0, "-i d/dx + 1/2", 1.0, 0)


def order1_winding(theta=GOLDEN):
    m = FlatModel(1, (theta,))
    D = ShiftOperator(m, [Term(0, _e(1), "abs+"), Term(0, _c(1), "abs-")], 1, "order1_winding")
    return Example("order1_winding", D, -1, "e^{ix} |D| P_+ + |D| P_-", 1.0, 0)


def torus2d(c=0.2, theta=(GOLDEN, np.sqrt(2) - 1)):
    """Riesz transform plus a shift coupling on T^2 (index 0; exercises the j = 2 term)."""
    m = FlatModel(2, tuple(theta))
    terms = [Term(0, _c(1, 2), "riesz"), Term(1, _e((1, 0), c) + _e((0, 1), c), "1")]
    return Example("torus2d", ShiftOperator(m, terms, 0, "torus2d"), 0, "2-torus example", 0.0, 8, True)


def bott():
    return Example("bott", None, 1, "Bott symbol t + i tau on the circle", 0.0, 0)


def _registry():
    reg = {
        "identity": identity,
        "bott": bott,
        "shift_winding": shift_winding,
        "shift_winding_rational": lambda: shift_winding(RATIONAL, -2, 0.3, 0.0, "shift_winding_rational"),
        "twisted_shift": twisted_shift,
        "coupled_invertible": coupled_invertible,
        "derivative": derivative,
        "order1_winding": order1_winding,
        "torus2d": torus2d,
        "winding_-2_rational": lambda: winding(-2, RATIONAL, "winding_-2_rational"),
    }
    for w in range(-3, 4):
        reg[f"winding_{w}"] = (lambda w=w: winding(w))
    return reg


REGISTRY = _registry()


def get(name) -> Example:
    try:
        return REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown gallery example {name!r}; known: {sorted(REGISTRY)}") from None


def names(dim=None, include_bott=True):
    out = []
    for n in REGISTRY:
        if n == "bott":
            if include_bott:
                out.append(n)
            continue
        if dim is not None and get(n).model.dim != dim:
            continue
        out.append(n)
    return out


# index table on T^1 and the paired homotopies and chain checks
INDEX_GALLERY = ["identity", "winding_2", "shift_winding", "shift_winding_rational", "twisted_shift",
                   "coupled_invertible", "derivative", "order1_winding"]
HOMOTOPY_PAIRS = [("winding_1", "shift_winding"), ("identity", "coupled_invertible"),
                  ("winding_-2_rational", "shift_winding_rational")]
CHAIN_GALLERY = ["shift_winding", "twisted_shift", "shift_winding_rational"]
