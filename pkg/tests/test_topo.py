import warnings

import numpy as np
import pytest
import sympy as sp

from _forms import rand_form
from shiftindex import gallery
from shiftindex.geometry import GOLDEN, FlatModel, GradedForm, SymbolError, SymbolField
from shiftindex.quadrature import bott_circle, cosphere_circle, cosphere_torus2, cylinder_sphere
from shiftindex.topo import bott_symbol, external_product, index_constant, ind_t, tau, thread_count
from shiftindex.suites import homotopy_path

M1 = FlatModel(1, (GOLDEN,))
CYL = cylinder_sphere(16, 16, 16)


def test_index_constants():
    assert index_constant(1) == pytest.approx(1 / (2j * np.pi))
    assert index_constant(2) == pytest.approx(1 / (6 * (2j * np.pi) ** 2))


def test_tau_degree_zero_is_zero():
    one = GradedForm(M1, {(): {0: 1}})
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert tau(one, cosphere_circle(32)) == 0
    assert w


def test_tau_dx_sheets():
    # boundary orientation: the two sheets of S*T^1 carry opposite signs
    dx = GradedForm(M1, {("x",): {0: 1}})
    assert abs(tau(dx, cosphere_circle(64))) < 1e-14
    plus = GradedForm(M1, {("x",): {0: sp.Heaviside(M1.covar_syms[0])}})
    assert tau(plus, cosphere_circle(64)) == pytest.approx(-2 * np.pi)


@pytest.mark.parametrize("seed", range(50))
def test_closed_graded_trace_cylinder(seed):
    rng = np.random.default_rng(seed)
    w = rand_form(rng, M1, 2)
    assert abs(tau(w.d(), CYL, W=3)) < 1e-10
    p = int(rng.integers(0, 4))
    a, b = rand_form(rng, M1, p), rand_form(rng, M1, 3 - p)
    lhs = tau(a.wedge(b), CYL, W=3)
    rhs = (-1) ** (p * (3 - p)) * tau(b.wedge(a), CYL, W=3)
    assert abs(lhs - rhs) < 1e-10


@pytest.mark.parametrize("seed", range(50))
def test_closed_graded_trace_cosphere(seed):
    rng = np.random.default_rng(1000 + seed)
    cyc = cosphere_circle(32)
    w = rand_form(rng, M1, 0, cylinder=False)
    assert abs(tau(w.d(), cyc, W=3)) < 1e-10
    a, b = rand_form(rng, M1, 0, cylinder=False), rand_form(rng, M1, 1, cylinder=False)
    assert abs(tau(a.wedge(b), cyc, W=3) - tau(b.wedge(a), cyc, W=3)) < 1e-10


def test_ind_t_constant_and_bott():
    assert ind_t(SymbolField(M1, {0: 1}), cosphere_circle(64)).value == 0
    r = ind_t(bott_symbol(M1), bott_circle(64))
    assert abs(r.value - 1) < 1e-10 and r.nearest == 1


@pytest.mark.parametrize("w", range(-3, 4))
def test_winding_ind_t(w):
    r = ind_t(gallery.winding(w).symbol(), cosphere_circle(256))
    assert abs(r.value - (-w)) < 1e-8


@pytest.mark.parametrize("name", gallery.names(dim=1, include_bott=False))
def test_integrality_and_multiplicativity(name):
    ex = gallery.get(name)
    s = ex.symbol()
    r = ind_t(s, cosphere_circle(256), W=ex.window, error=True)
    assert r.residual < 1e-6 and r.nearest == ex.expected
    p = ind_t(external_product(s), cylinder_sphere(32, 12, 4), W=ex.window)
    assert abs(p.value - r.value) < 1e-6


def test_torus2d_ind_t():
    ex = gallery.torus2d()
    r = ind_t(ex.symbol(), cosphere_torus2(24, 24), W=ex.window)
    assert r.residual < 1e-6 and r.nearest == 0


def test_external_product_of_one():
    P = external_product(SymbolField(M1, {0: 1}))
    pts = {"x": np.array([0.3]), "xi": np.array([0.6]), "t": np.array([0.0]), "tau": np.array([0.8])}
    m = P.sample(pts, 0)[0]
    assert abs(np.linalg.det(m) - (0.6 ** 2 + 0.8 ** 2)) < 1e-14
    assert abs(ind_t(P, CYL, W=0).value) < 1e-10


def test_external_product_adjoint_pattern():
    P = external_product(gallery.get("shift_winding").symbol())
    Ps = P.adjoint()
    pts = {"x": np.array([0.3, 1.1]), "xi": np.array([0.6, -0.2]), "t": np.array([0.1, 0.4]),
           "tau": np.array([0.79, 0.9])}
    a, b = P.sample(pts, 4), Ps.sample(pts, 4)
    assert np.max(np.abs(b - np.conj(np.swapaxes(a, 1, 2)))) < 1e-13


def test_stability_under_refinement():
    ex = gallery.get("shift_winding")
    s = ex.symbol()
    v1 = ind_t(s, cosphere_circle(256), W=10).value
    v2 = ind_t(s, cosphere_circle(512), W=20).value
    assert abs(v1 - v2) < 1e-8


@pytest.mark.parametrize("pair", gallery.HOMOTOPY_PAIRS)
def test_homotopy_invariance(pair):
    s0, s1 = (gallery.get(n).symbol() for n in pair)
    rep = homotopy_path(s0, s1, cosphere_circle(256), steps=16, W=10)
    assert rep["elliptic"] and rep["spread"] < 1e-6


def test_non_elliptic_rejected():
    s = SymbolField(M1, {1: 1, 0: -1})
    with pytest.raises(SymbolError):
        ind_t(s, cosphere_circle(64), W=12)


def test_parallel_matches_serial(monkeypatch):
    monkeypatch.setenv("SHIFTINDEX_THREADS", "3")
    assert thread_count() == 3
    s = gallery.get("shift_winding").symbol()
    cyc = cylinder_sphere(32, 12, 4)
    a = ind_t(external_product(s), cyc, W=10, chunk=128).value
    b = ind_t(external_product(s), cyc, W=10, chunk=128, parallel=True).value
    assert abs(a - b) < 1e-12
