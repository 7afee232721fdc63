import numpy as np
import pytest
import sympy as sp

from _forms import rand_form
from shiftindex import gallery
from shiftindex.geometry import GOLDEN, T_SYM, TAU_SYM, FlatModel, GradedForm, SymbolField, z_invariance_defect
from shiftindex.quadrature import mapping_torus
from shiftindex.topo import tau
from shiftindex.uniformization import (ORDER_MONOMIALS, MappingTorusModel, OrbitSymbol, dilate, fit_limit,
                                       ind_t_mapping_torus, order_form, order_gallery, solid_angle_form,
                                       sweep_csv, trace_identity, trace_scaling, verify_order_estimates)

M1 = FlatModel(1, (GOLDEN,))
XI = M1.covar_syms[0]


def unit_points(n=5, seed=0):
    rng = np.random.default_rng(seed)
    psi = rng.uniform(0, 2 * np.pi, n)
    return {"x": rng.uniform(0, 2 * np.pi, n), "xi": np.cos(psi), "t": rng.uniform(-1, 1, n), "tau": np.sin(psi)}


def test_dilate_identity():
    one = SymbolField(M1, {0: 1}, cylinder=True)
    for R in (1, 4, 64):
        m = dilate(one, R).sample(unit_points(), 3)
        assert np.array_equal(m, np.broadcast_to(np.eye(7), m.shape))
    with pytest.raises(ValueError):
        dilate(one, 0.5)


@pytest.mark.parametrize("R", [1, 2.5, 8, 64])
def test_dilate_scalar_direct_formula(R):
    rho = sp.sqrt(XI ** 2 + T_SYM ** 2 + TAU_SYM ** 2)
    f = SymbolField(M1, {0: T_SYM / rho}, cylinder=True)
    pts = unit_points()
    m = dilate(f, R).sample(pts, 4)
    i = np.arange(-4, 5)
    t = pts["t"][:, None] + i[None, :]
    want = t / np.sqrt(R ** 2 * pts["xi"][:, None] ** 2 + t ** 2 + R ** 2 * pts["tau"][:, None] ** 2)
    got = np.diagonal(m, axis1=1, axis2=2)
    assert np.max(np.abs(got - want)) < 1e-13


@pytest.mark.parametrize("seed", range(8))
def test_dilate_commutes_with_d(seed):
    rng = np.random.default_rng(seed)
    w = rand_form(rng, M1, int(rng.integers(0, 3)))
    pts = unit_points(4, seed)
    for R in (1, 3, 16):
        lhs = dilate(w, R).d().sample(pts, 2)
        rhs = dilate(w.d(), R).sample(pts, 2)
        assert (lhs - rhs).max_abs() < 1e-12


@pytest.mark.parametrize("name", ["shift_winding", "twisted_shift", "shift_winding_rational"])
def test_dilate_z_equivariant_and_relation(name):
    orb = OrbitSymbol(gallery.get(name).symbol())
    pts = unit_points()
    for R in (1, 4, 16):
        assert z_invariance_defect(orb.realized(R), pts, W=5) < 1e-12
    assert orb.relation_defect(pts, W=4) < 1e-13


def test_mapping_torus_glue():
    mt = MappingTorusModel(M1)
    p = {"x": np.array([0.3]), "t": np.array([2.25])}
    q = mt.glue(p, 1)
    assert q["t"][0] == pytest.approx(3.25) and q["x"][0] == pytest.approx(0.3 + 2 * np.pi * GOLDEN)
    t0, n = mt.fundamental_domain(np.array([2.25, -0.5]))
    assert np.allclose(t0, [0.25, 0.5]) and list(n) == [2, -1]


def test_order_estimates_examples():
    const = GradedForm(M1, {(): {0: 2}}, True)
    fits = verify_order_estimates(const, a_prime=const)
    order_fit = [f for f in fits if f.kind == "order"][0]
    assert abs(order_fit.fitted) < 1e-12 and order_fit.passed
    assert all(f.fitted == -np.inf for f in fits if f.kind == "product")
    dt = order_form(M1, (1, 0))
    f = verify_order_estimates(dt)[0]
    assert abs(f.fitted + 1) <= 0.25 and f.passed
    # a, a' in Omega_{0,0} with t-dependent entries: defect of order -1
    rho = sp.sqrt(XI ** 2 + T_SYM ** 2 + TAU_SYM ** 2)
    a = GradedForm(M1, {(): {0: T_SYM / rho, 1: sp.exp(sp.I * M1.base_syms[0]) * XI / rho}}, True)
    ap = GradedForm(M1, {(): {1: T_SYM / rho, -1: TAU_SYM / rho}}, True)
    d = [f for f in verify_order_estimates(a, a_prime=ap) if f.kind == "product"][0]
    assert abs(d.fitted + 1) <= 0.25 and d.passed


def test_order_gallery_all_bidegrees():
    fits = order_gallery(M1)
    seen = {(f.kind, f.bidegree) for f in fits}
    for bd in ORDER_MONOMIALS:
        assert ("order", bd) in seen and ("product", bd) in seen
    bad = [(f.kind, f.bidegree, f.declared, f.fitted) for f in fits if not f.passed]
    assert not bad


def test_trace_identity_solid_angle():
    rep = trace_identity(solid_angle_form(M1), R_grid=(1, 2), mt_sizes=(16, 48, 24))
    assert rep["passed"], rep
    zero = GradedForm(M1, {}, True)
    assert trace_identity(zero, R_grid=(1,), mt_sizes=(8, 8, 8))["max_deviation"] == 0


def test_forms_without_dt_vanish_on_mapping_torus():
    w = GradedForm(M1, {("x", "xi", "tau"): {0: 1 / (1 + XI ** 2 + TAU_SYM ** 2), 1: XI}}, True)
    for R in (1, 4):
        assert tau(dilate(w, R), mapping_torus(R, 8, 16, 8), W=2) == 0


@pytest.mark.parametrize("m", [-2, -3])
def test_trace_scaling(m):
    slope, vals = trace_scaling(m)
    assert abs(slope - (m + 1)) <= 0.25


def test_chain_trivial_symbols():
    orb = OrbitSymbol(SymbolField(M1, {0: 1}))
    rep = ind_t_mapping_torus(orb, (1, 2, 4), W=1, sizes=(8, 16, 16), target=0.0)
    assert all(abs(complex(*v)) < 1e-10 for v in rep["chain"]) and rep["passed"]
    orb = OrbitSymbol(gallery.winding(1).symbol())
    rep = ind_t_mapping_torus(orb, (1, 2, 4), W=1, sizes=(16, 24, 16), target=-1.0)
    assert rep["rate"] is None and rep["limit_error"] < 1e-6
    ex = np.array(rep["exact"])
    assert np.max(np.abs(ex[:, 0] + 1)) < 1e-6


def test_exact_integrand_is_r_independent():
    orb = OrbitSymbol(gallery.get("shift_winding").symbol())
    vals = [orb.exact_value(R, mapping_torus(R, 16, 24, 16), 8) for R in (2, 8)]
    assert abs(vals[0] - vals[1]) < 1e-6 and abs(vals[0] + 1) < 1e-6


def test_fit_limit_recovers_power_law():
    R = np.array([8, 16, 32, 64.0])
    L, c, p, res = fit_limit(R, -1 + 0.3 / R)
    assert abs(L + 1) < 1e-10 and abs(p - 1) < 1e-6
    L, c, p, res = fit_limit(R, 2 + 0.3 / R ** 2, fixed_rate=2.0)
    assert abs(L - 2) < 1e-12 and res < 1e-12
    R = np.array([4, 8, 16, 32, 64.0])
    v = 1 + 0.1 / R ** 2 - 0.4 / R ** 3 + 0.2 / R ** 4
    assert abs(fit_limit(R, v, fixed_rate=2.0, terms=3)[0] - 1) < 1e-12
    L, c, p, res = fit_limit(R, 1 + 0.1 / R ** 2 - 0.4 / R ** 3, terms=2)
    assert abs(L - 1) < 1e-9 and abs(p - 2) < 1e-6


def test_sweep_csv():
    text = sweep_csv([(1, -1 + 0.5j, 0.1), (2, -1.0, 0.05)])
    lines = text.splitlines()
    assert lines[0] == "param,value_re,value_im,err"
    assert lines[1] == "1.0,-1.0,0.5,0.1"
