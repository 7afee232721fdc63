"""Mapping-torus side of the index computation.

The bundle E over M_Z = (M x R)/Z is handled through Z-invariant symbols
realized along the orbit with t shifted by the orbit index (``t_step = 1``):
entry (i, j) of sigma(calD) is the (i, j) entry of the cylinder symbol with
t replaced by t + i.  The dilation h_R(x, xi, t, tau) = (x, R xi, t, R tau)
acts on generators by substitution, and on forms additionally by R per
d xi / d tau factor.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.optimize import curve_fit

from .geometry import (GradedForm, SymbolError, SymbolField, T_SYM, TAU_SYM, check_ellipticity,
                       z_invariance_defect)
from .quadrature import Cycle, cylinder_sphere, mapping_torus
from .seqalg import weighted_norm, weighted_trace, RapidMatrix
from .topo import _top_coefficient, _integrate, external_product, ind_t


@dataclass(frozen=True)
class MappingTorusModel:
    """M_Z for a flat model; the gluing is (x, t + 1) ~ (g(x), t)."""
    base: object

    def glue(self, points, n=1):
        """Image of points under (x, t) -> (g^n x, t + n)."""
        return self.base.shift_points(points, n, t_step=1)

    def fundamental_domain(self, t):
        """Reduce t to [0, 1) and return (t mod 1, number of steps taken)."""
        n = np.floor(np.asarray(t))
        return np.asarray(t) - n, n.astype(int)


def _dilation_subs(model, R):
    return {**{c: R * c for c in model.covar_syms}, TAU_SYM: R * TAU_SYM}


def dilate(obj, R):
    """h_R pull-back realized on E (t shifted by the orbit index).

    Accepts a cylinder :class:`SymbolField` or :class:`GradedForm` and returns
    the same kind of object with ``t_step = 1``.
    """
    if R < 1:
        raise ValueError("dilation parameter must be >= 1")
    if not obj.cylinder:
        raise SymbolError("dilate expects a cylinder symbol or form")
    subs = _dilation_subs(obj.model, sp.Float(R, 30) if not float(R).is_integer() else sp.Integer(int(R)))
    if isinstance(obj, SymbolField):
        gens = {k: g.subs(subs) for k, g in obj.gens.items()}
        return SymbolField(obj.model, gens, True, obj.degree, obj.block, f"{obj.name}_R{R:g}", t_step=1)
    covar = set(obj.model.covar_names) | {"tau"}
    comps = {}
    for mu, g in obj.comps.items():
        fac = R ** sum(1 for v in mu if v in covar)
        comps[mu] = {k: v.subs(subs) * fac for k, v in g.items()}
    return GradedForm(obj.model, comps, True, obj.block, t_step=1)


def cylinder_realization(obj):
    """The cylinder object regarded on E with undilated covariables (R = 1)."""
    return dilate(obj, 1)


class OrbitSymbol:
    """sigma(calD) for sigma(D) # (t + i tau) realized along the orbit."""

    def __init__(self, sigma: SymbolField, name=None):
        if sigma.cylinder:
            raise SymbolError("pass the cosphere symbol of D; the product is formed here")
        self.base = sigma
        self.cylinder = external_product(sigma)
        self.name = name or sigma.name
        self._a = sigma
        self._astar = sigma.adjoint()

    @property
    def model(self):
        return self.base.model

    def realized(self, R=1):
        return dilate(self.cylinder, R)

    def relation_defect(self, points, W=4):
        """max |sigma(calD)_{ij}(p) - sigma_cyl_{ij}(p with t -> t + i)|."""
        real = self.realized(1).sample(points, W)
        r = self.cylinder.block
        worst = 0.0
        for i in range(-W, W + 1):
            pts = dict(points)
            pts["t"] = np.asarray(points["t"]) + i
            row = self.cylinder.sample(pts, rows=[i], cols=np.arange(-W, W + 1))
            a = (i + W) * r
            worst = max(worst, float(np.max(np.abs(real[:, a:a + r, :] - row))))
        return worst

    # -- chain approximant ((sigma^-1)_R, built by dilating the cylinder inverse)

    def _spectral_data(self, y, sgn, Wc):
        """Eigen-data of a a^* and a^* a at base points (g^p x, sign xi)."""
        pts = {"x": y, "xi": sgn}
        b = self._a.bandwidth
        r = self._a.block
        inner = np.arange(-Wc, Wc + 1)
        outer = np.arange(-Wc - b, Wc + b + 1)
        wide = self._a.sample(pts, rows=inner, cols=outer)
        tall = self._a.sample(pts, rows=outer, cols=inner)
        h1 = wide @ np.conj(np.swapaxes(wide, 1, 2))
        h2 = np.conj(np.swapaxes(tall, 1, 2)) @ tall
        l1, u1 = np.linalg.eigh(h1)
        l2, u2 = np.linalg.eigh(h2)
        sq = self._a.sample(pts, Wc)
        c0 = Wc * r
        a_row = sq[:, c0:c0 + r, :]
        astar_row = np.conj(np.swapaxes(sq[:, :, c0:c0 + r], 1, 2))
        return {"l1": l1, "u1": u1, "l2": l2, "u2": u2,
                "v1": astar_row @ u1, "e1": u1[:, c0:c0 + r, :],
                "v2": a_row @ u2, "e2": u2[:, c0:c0 + r, :]}

    def _inverse_rows(self, points, R, p, Wc):
        """Row 0 of the cylinder inverse at (g^p x, R xi, t + p, R tau); shape (P, 2r, (2Wc+1)*2r)."""
        r = self._a.block
        n = 2 * Wc + 1
        x = np.asarray(points["x"], float)
        xi = np.asarray(points["xi"], float)
        t = np.asarray(points["t"], float)
        tau = np.asarray(points["tau"], float)
        P = x.size
        sgn = np.where(xi >= 0, 1.0, -1.0)
        keys, inv = np.unique(np.stack([x, sgn], 1), axis=0, return_inverse=True)
        inv = inv.ravel()
        c = R * np.abs(xi)
        th = self.model.theta[0]
        sd = self._spectral_data(keys[:, 0] + 2 * np.pi * th * p, keys[:, 1], Wc)
        sd = {k: v[inv] for k, v in sd.items()}
        beta = (t + p) + 1j * R * tau
        b2 = np.abs(beta) ** 2
        d1 = 1.0 / (c[:, None] ** 2 * sd["l1"] + b2[:, None])
        d2 = 1.0 / (c[:, None] ** 2 * sd["l2"] + b2[:, None])
        u1h = np.conj(np.swapaxes(sd["u1"], 1, 2))
        u2h = np.conj(np.swapaxes(sd["u2"], 1, 2))
        row = np.zeros((P, 2 * r, n, 2 * r), dtype=complex)
        row[:, :r, :, :r] = (c[:, None, None] * ((sd["v1"] * d1[:, None, :]) @ u1h)).reshape(P, r, n, r)
        row[:, :r, :, r:] = (-beta[:, None, None] * ((sd["e2"] * d2[:, None, :]) @ u2h)).reshape(P, r, n, r)
        row[:, r:, :, :r] = (np.conj(beta)[:, None, None] * ((sd["e1"] * d1[:, None, :]) @ u1h)).reshape(P, r, n, r)
        row[:, r:, :, r:] = (c[:, None, None] * ((sd["v2"] * d2[:, None, :]) @ u2h)).reshape(P, r, n, r)
        return row.reshape(P, 2 * r, n * 2 * r)

    def _assemble(self, rows_by_p, W, Wc):
        """Window matrix whose block row p is the row-0 data of p placed at offsets q - p."""
        r2 = 2 * self._a.block
        P = next(iter(rows_by_p.values())).shape[0]
        N = (2 * W + 1) * r2
        out = np.zeros((P, N, N), dtype=complex)
        for p, row in rows_by_p.items():
            lo = (Wc - W - p) * r2
            a = (p + W) * r2
            out[:, a:a + r2, :] = row[:, :, lo:lo + N]
        return out

    def chain_inverse(self, points, R, W, Wc=None):
        """Window of (sigma_cyl^-1)_R on E: row p holds the cylinder inverse at (g^p x, R xi, t + p, R tau)."""
        Wc = Wc or 2 * W + 6
        return self._assemble({p: self._inverse_rows(points, R, p, Wc) for p in range(-W, W + 1)}, W, Wc)

    def chain_log_derivative(self, points, jac, ambient, R, W, Wc=None):
        """Components of (sigma^-1 d sigma)_R on E along a chart, built from cylinder data at each orbit point."""
        Wc = Wc or 2 * W + 6
        covar = set(self.model.covar_names) | {"tau"}
        rows = {c: {} for c in range(jac.shape[2])}
        cyl = self.cylinder
        for p in range(-W, W + 1):
            inv = self._inverse_rows(points, R, p, Wc)
            pts = self.model.shift_points(points, p)
            pts["t"] = np.asarray(points["t"]) + p
            for n in covar:
                pts[n] = np.asarray(points[n]) * R
            for c in range(jac.shape[2]):
                acc = 0
                for a, name in enumerate(ambient):
                    if np.any(jac[:, a, c]):
                        fac = R if name in covar else 1.0
                        acc = acc + (fac * jac[:, a, c])[:, None, None] * cyl.sample(pts, Wc, t_step=0, deriv=name)
                rows[c][p] = inv @ acc
        return [self._assemble(rows[c], W, Wc) for c in range(jac.shape[2])]

    def _chain_chunk(self, R, cycle, sl, W):
        pts, jac, w = cycle.chunk(sl)
        sig_R = self.realized(R)
        L = self.chain_inverse(pts, R, W)
        A = []
        for cc in range(cycle.dim):
            acc = 0
            for a, name in enumerate(cycle.ambient_names):
                if np.any(jac[:, a, cc]):
                    acc = acc + jac[:, a, cc][:, None, None] * sig_R.sample(pts, W, deriv=name)
            A.append(L @ acc)
        return np.sum(w * _top_coefficient(A, sig_R.block, {}, cycle.dim))

    def chain_value(self, R, cycle=None, W=6, chunk=256):
        cycle = cycle or mapping_torus(R, 16, 24, 8)
        total = 0j
        for i in range(0, cycle.size, chunk):
            total += self._chain_chunk(R, cycle, slice(i, min(i + chunk, cycle.size)), W)
        return total

    def exact_value(self, R, cycle=None, W=8, chunk=256):
        cycle = cycle or mapping_torus(R, 16, 24, 8)
        return ind_t(self.realized(R), cycle, W=W, chunk=chunk, check=False).value


def measure_R0(orbit: OrbitSymbol, R_grid, bound=1e6, W=12, n=8):
    """Smallest R in the grid from which the dilated symbol is invertible with norm <= bound."""
    cyc = mapping_torus(1.0, n, n, n // 2)
    for R in sorted(R_grid):
        pts = {k: v for k, v in cyc.ambient.items()}
        pts["t"] = pts["t"] * R
        if check_ellipticity(orbit.realized(R), pts, bound, W=W).passed:
            return R
    return None


def fit_limit(R, values, fixed_rate=None, terms=1):
    """Least-squares fit value(R) = L + c R^-p (+ d R^-(p+1) with ``terms=2``).

    With ``fixed_rate`` the fit is linear in L and ``terms`` coefficients of
    R^-p, R^-(p+1), ...  Returns (L, c, p, residual); p is the leading rate.
    """
    R = np.asarray(R, float)
    v = np.real(np.asarray(values))
    if fixed_rate is not None:
        # linear in L and the coefficients of R^-p, R^-(p+1), ...
        A = np.stack([np.ones_like(R)] + [R ** -(fixed_rate + k) for k in range(terms)], 1)
        coef, *_ = np.linalg.lstsq(A, v, rcond=None)
        return float(coef[0]), float(coef[1]), float(fixed_rate), float(np.max(np.abs(A @ coef - v)))
    p0 = fit_limit(R, values, 1.0)

    def model(r, L, c, p):
        return L + c * r ** -p
    popt, _ = curve_fit(model, R, v, p0=[p0[0], p0[1], 1.0], maxfev=20000)
    if terms == 2:
        if R.size < 5:
            raise ValueError("a two-term fit needs at least five points")

        def model2(r, L, c, d, p):
            return L + c * r ** -p + d * r ** (-p - 1)
        popt2, _ = curve_fit(model2, R, v, p0=[popt[0], popt[1], 0.0, popt[2]], maxfev=20000)
        res = float(np.max(np.abs(model2(R, *popt2) - v)))
        return float(popt2[0]), float(popt2[1]), float(popt2[3]), res
    res = float(np.max(np.abs(model(R, *popt) - v)))
    return float(popt[0]), float(popt[1]), float(popt[2]), res


def ind_t_mapping_torus(orbit: OrbitSymbol, R_grid=(1, 2, 4, 8, 16, 32, 64), W=6, sizes=(16, 24, 8),
                        target=None, exact=True, tol=1e-6, fit_points=5):
    """Chain values over R, their limit fit, and the exact R-independent value.

    The rate p comes from L + c R^-p + d R^-(p+1) on the ``fit_points``
    largest R (a single power law with fewer than five points).  The limit is
    then fitted linearly with the powers R^-q, R^-(q+1), R^-(q+2), q the
    rounded rate; a single power law is biased by the next orders at R ~ 4.
    The fixed-rate (p = 1) fit and the rates read off successive differences
    are reported alongside.
    """
    R0 = measure_R0(orbit, R_grid)
    grid = [R for R in R_grid if R0 is not None and R >= R0]
    chain = [orbit.chain_value(R, mapping_torus(R, *sizes), W) for R in grid]
    usable = [(R, v) for R, v in zip(grid, chain) if R > 1]
    fit_R = [R for R, _ in usable][-fit_points:]
    fit_v = [v for _, v in usable][-fit_points:]
    if np.ptp(np.real(fit_v)) < 1e-10:
        # the chain is exact (no shift coupling): there is no R-dependence to fit
        L, c, rate, res = float(np.mean(np.real(fit_v))), 0.0, None, float(np.ptp(np.real(fit_v)))
    else:
        _, c, p, res = fit_limit(fit_R, fit_v, terms=2 if len(fit_R) >= 5 else 1)
        rate = -p
        # the limit from the integer-step expansion at the measured leading order
        k = max(min(3, len(fit_R) - 2), 1)
        L, _, _, _ = fit_limit(fit_R, fit_v, fixed_rate=max(float(np.rint(p)), 1.0), terms=k)
    report = {"R0": R0, "R": list(grid), "chain": [[v.real, v.imag] for v in chain], "fit_R": list(fit_R),
              "limit": L, "coefficient": c, "rate": rate, "fit_residual": res}
    if rate is not None:
        L1, c1, _, res1 = fit_limit(fit_R, fit_v, 1.0)
        report["fixed_rate_fit"] = {"rate": -1.0, "limit": L1, "coefficient": c1, "residual": res1}
        dv = np.abs(np.diff(np.real(fit_v)))
        Rf = np.asarray(fit_R, float)
        report["difference_rates"] = [float(-np.log(dv[i] / dv[i + 1]) / np.log(Rf[i + 1] / Rf[i]))
                                      for i in range(len(dv) - 1) if dv[i + 1] > 0]
        if target is not None:
            report["fixed_rate_fit"]["limit_error"] = abs(L1 - float(np.real(target)))
    if exact:
        ex = [orbit.exact_value(R, mapping_torus(R, *sizes), W + 2) for R in grid]
        report["exact"] = [[v.real, v.imag] for v in ex]
    if target is not None:
        report["target"] = float(np.real(target))
        report["limit_error"] = abs(L - float(np.real(target)))
        rate_ok = rate is None or abs(rate + 1) <= 0.3
        report["passed"] = bool(report["limit_error"] < tol and rate_ok)
    return report


def sweep_csv(rows):
    """CSV text with columns param, value_re, value_im, err."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["param", "value_re", "value_im", "err"])
    for param, val, err in rows:
        val = complex(val)
        w.writerow([repr(float(param)), repr(val.real), repr(val.imag), repr(float(err))])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Order estimates for the restriction map


def _unit_points(n=4, t_values=(0.0, 0.37)):
    psi = np.linspace(0.1, 2 * np.pi - 0.2, n)
    x = np.linspace(0.3, 5.0, n)
    X, PSI, T = np.meshgrid(x, psi, np.asarray(t_values), indexing="ij")
    return {"x": X.ravel(), "xi": np.cos(PSI).ravel(), "t": T.ravel(), "tau": np.sin(PSI).ravel()}


def _family_norms(field_R, R_grid, prefactor, points, W):
    out = []
    for R in R_grid:
        mats = field_R(R).sample(points, W)
        out.append(float(np.max(np.linalg.norm(mats, 2, axis=(1, 2)))) / R ** prefactor)
    return np.array(out)


def _slope(R, norms):
    R = np.asarray(R, float)
    ok = norms > 1e-300
    if ok.sum() < 2:
        return -np.inf
    return float(np.polyfit(np.log(R[ok]), np.log(norms[ok]), 1)[0])


@dataclass
class OrderFit:
    kind: str
    monomial: tuple
    bidegree: tuple
    declared: int
    fitted: float
    norms: list
    weighted_sup: float = float("nan")
    passed: bool = False
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def verify_order_estimates(a: GradedForm, R_grid=(2, 4, 8, 16, 32, 64), a_prime: GradedForm = None,
                           points=None, W=None, tol=0.25):
    """Order fits for each monomial of ``a`` and, with ``a_prime``, fits of the product defect.

    For the order fit the norm of a_R / R^j is fitted against R; the declared order is
    -i-j for bidegree (i, j).  The product fit takes ||(a' a)_R - a'_R a_R|| / R^(j+j') with
    declared order -i-i'-j-j'-1.  Components that vanish identically are
    reported as passing with order -inf.
    """
    points = points or _unit_points()
    W = W if W is not None else 2 * max(1, max((abs(k) for g in a.comps.values() for k in g), default=1)) + 4
    fits = []
    for mu in a.comps:
        i, j = a.bidegree(mu)
        single = GradedForm(a.model, {mu: a.comps[mu]}, True, a.block)
        norms = _family_norms(lambda R: dilate(single, R).coefficient_field(mu), R_grid, j, points, W)
        fitted = _slope(R_grid, norms)
        wsup = _weighted_sup(single, mu, R_grid, j, -i - j, points, W)
        ok = (fitted == -np.inf) or abs(fitted - (-i - j)) <= tol or (fitted < -i - j and norms.max() < 1e-12)
        fits.append(OrderFit("order", mu, (i, j), -i - j, fitted, norms.tolist(), wsup, bool(ok)))
    if a_prime is not None:
        prod = a_prime.wedge(a)
        for mu in prod.comps:
            i, j = prod.bidegree(mu)
            declared = -i - j - 1

            def defect(R, mu=mu):
                lhs = dilate(prod, R)
                rhs = dilate(a_prime, R).wedge(dilate(a, R))
                return (lhs - rhs).coefficient_field(mu)
            norms = _family_norms(defect, R_grid, j, points, W)
            fitted = _slope(R_grid, norms)
            ok = (fitted == -np.inf) or abs(fitted - declared) <= tol
            fits.append(OrderFit("product", mu, (i, j), declared, fitted, norms.tolist(), passed=bool(ok)))
    return fits


def _weighted_sup(single, mu, R_grid, j, k, points, W, s=0.0):
    """max_R of the l2(mu_{s,R}) -> l2(mu_{s-k,R}) norm of a_R / R^j (at one base point per R)."""
    vals = []
    for R in R_grid:
        m = dilate(single, R).coefficient_field(mu).sample({n: v[:1] for n, v in points.items()}, W)[0]
        if single.block == 1:
            vals.append(weighted_norm(m, W, s, k, R) / R ** j)
    return float(max(vals)) if vals else float("nan")


# ---------------------------------------------------------------------------
# Trace identity


def solid_angle_form(model, f=None, block=1):
    """omega = dx ^ f(y / rho) Omega_0 on the cylinder, Omega_0 the degree-0 solid angle form.

    ``f`` maps (xi, t, tau) symbols of the unit vector to a dict {offset: expr};
    the default is 1 + 0.3 e^{ix} T (a coupled coefficient).
    """
    x = model.base_syms[0]
    xi = model.covar_syms[0]
    t, tau = T_SYM, TAU_SYM
    rho = sp.sqrt(xi ** 2 + t ** 2 + tau ** 2)
    if f is None:
        gens = {0: 1 + xi * t / rho ** 2, 1: sp.Rational(3, 10) * sp.exp(sp.I * x) * tau / rho}
    else:
        gens = f(xi / rho, t / rho, tau / rho)
    r3 = rho ** 3
    base = {("x", "t", "tau"): xi / r3, ("x", "xi", "tau"): -t / r3, ("x", "xi", "t"): tau / r3}
    comps = {mu: {k: g * c for k, g in gens.items()} for mu, c in base.items()}
    return GradedForm(model, comps, True, block)


def trace_identity(omega: GradedForm, R_grid=(1, 2, 4, 8), cyl_sizes=(32, 24, 8), mt_sizes=(32, 96, 48),
                   tol=1e-8):
    """tau(omega) over S(T*M x R^2) versus the E-trace of omega_R over S*M_Z, per R."""
    from .topo import tau
    ref = tau(omega, cylinder_sphere(*cyl_sizes), W=2)
    vals = []
    for R in R_grid:
        vals.append(tau(dilate(omega, R), mapping_torus(R, *mt_sizes), W=2))
    vals = np.array(vals, dtype=complex)
    dev = float(np.max(np.abs(vals - ref)))
    var = float(np.max(np.abs(vals - vals[0])))
    return {"tau": [complex(ref).real, complex(ref).imag], "R": list(R_grid),
            "values": [[v.real, v.imag] for v in vals], "max_deviation": dev, "R_variation": var,
            "passed": bool(dev < tol and var < tol)}


def trace_scaling(m, R_grid=(1, 2, 4, 8, 16), W=4096):
    """Fitted exponent of tr diag((n^2 + R^2)^(m/2)) against R (expected m + 1)."""
    vals = []
    for R in R_grid:
        a = RapidMatrix.diag(lambda n, R=R: (n ** 2 + R ** 2) ** (m / 2.0), W, order=m)
        vals.append(weighted_trace(a)[0].real)
    return _slope(R_grid, np.abs(np.array(vals))), vals


ORDER_MONOMIALS = {(0, 0): (), (0, 1): ("xi",), (0, 2): ("xi", "tau"), (1, 0): ("t",), (1, 1): ("xi", "t"),
                   (1, 2): ("xi", "t", "tau")}


def order_form(model, bidegree, c=sp.Rational(3, 10)):
    """A coupled homogeneous cylinder form of the given bidegree (degree 0 overall)."""
    x, xi = model.base_syms[0], model.covar_syms[0]
    t, tau = T_SYM, TAU_SYM
    rho = sp.sqrt(xi ** 2 + t ** 2 + tau ** 2)
    deg = sum(bidegree)
    gens = {0: (1 + xi * t / rho ** 2) / rho ** deg, 1: c * sp.exp(sp.I * x) * (tau / rho) / rho ** deg}
    return GradedForm(model, {ORDER_MONOMIALS[tuple(bidegree)]: gens}, True)


def order_gallery(model, R_grid=(2, 4, 8, 16, 32, 64), tol=0.25):
    """Order and product fits (against a coupled function a') for every bidegree in {0,1} x {0,1,2}."""
    a0 = order_form(model, (0, 0))
    fits = []
    for bd in ORDER_MONOMIALS:
        fits += verify_order_estimates(order_form(model, bd), R_grid, a_prime=a0, tol=tol)
    return fits
