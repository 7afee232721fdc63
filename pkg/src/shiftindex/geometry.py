"""Flat torus models, closed-form symbol fields and graded forms.

A symbol field is stored by its generators: ``gens[k]`` is a closed-form
block matrix sigma_k(x, xi[, t, tau]) and the operator-valued symbol has
entries  sigma_{ij} = sigma_{j-i}(g^i(x), xi[, t + i*t_step, tau]).
Here g is the translation x -> x + 2*pi*theta, which leaves the covariables
fixed.  ``t_step`` is 0 on the cylinder and 1 in the mapping-torus
realization.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import sympy as sp

from .seqalg import RapidMatrix

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
RATIONAL = 1.0 / 3.0

T_SYM = sp.Symbol("t", real=True)
TAU_SYM = sp.Symbol("tau", real=True)


class SymbolError(ValueError):
    pass


@dataclass(frozen=True)
class FlatModel:
    dim: int = 1
    theta: tuple = (GOLDEN,)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise SymbolError("only T^1 and T^2 are supported")
        if len(self.theta) != self.dim:
            raise SymbolError("theta must have one entry per circle factor")

    @property
    def base_names(self):
        return ("x",) if self.dim == 1 else ("x1", "x2")

    @property
    def covar_names(self):
        return ("xi",) if self.dim == 1 else ("xi1", "xi2")

    @cached_property
    def base_syms(self):
        return tuple(sp.Symbol(n, real=True) for n in self.base_names)

    @cached_property
    def covar_syms(self):
        return tuple(sp.Symbol(n, real=True) for n in self.covar_names)

    def names(self, cylinder):
        extra = ("t", "tau") if cylinder else ()
        return self.base_names + self.covar_names + extra

    def syms(self, cylinder):
        extra = (T_SYM, TAU_SYM) if cylinder else ()
        return self.base_syms + self.covar_syms + extra

    def orbit_subs(self, l, t_step=0):
        """Substitution realizing (x, xi, t, tau) -> (g^l x, xi, t + l*t_step, tau)."""
        subs = {x: x + 2 * sp.pi * sp.Float(th, 30) * l for x, th in zip(self.base_syms, self.theta)}
        if t_step:
            subs[T_SYM] = T_SYM + l * t_step
        return subs

    def shift_points(self, points, l, t_step=0):
        out = dict(points)
        for name, th in zip(self.base_names, self.theta):
            out[name] = points[name] + 2 * np.pi * th * l
        if t_step and "t" in points:
            out["t"] = points["t"] + l * t_step
        return out


@dataclass(frozen=True)
class TrigPolynomial:
    terms: tuple  # ((freq tuple), complex amplitude)

    @classmethod
    def const(cls, c, dim=1):
        return cls((((0,) * dim, complex(c)),))

    @classmethod
    def mono(cls, freq, c=1.0):
        freq = (freq,) if np.isscalar(freq) else tuple(freq)
        return cls(((freq, complex(c)),))

    def __add__(self, other):
        return TrigPolynomial(self.terms + other.terms)

    @property
    def bandwidth(self):
        return max((max(abs(f) for f in fr) for fr, _ in self.terms), default=0)

    def expr(self, model: FlatModel):
        tot = sp.Integer(0)
        for freq, a in self.terms:
            phase = sum(int(f) * x for f, x in zip(freq, model.base_syms))
            tot += _num(a) * sp.exp(sp.I * phase)
        return tot

    def __call__(self, *x):
        tot = 0j
        for freq, a in self.terms:
            tot = tot + a * np.exp(1j * sum(f * xx for f, xx in zip(freq, x)))
        return tot

    def derivative(self, axis=0):
        return TrigPolynomial(tuple((fr, a * 1j * fr[axis]) for fr, a in self.terms))


def _num(c):
    c = complex(c)
    re = sp.Float(c.real, 30) if c.real != int(c.real) else sp.Integer(int(c.real))
    im = sp.Float(c.imag, 30) if c.imag != int(c.imag) else sp.Integer(int(c.imag))
    return re + sp.I * im


def _strip_delta(expr):
    return expr.replace(lambda e: isinstance(e, sp.DiracDelta), lambda e: sp.Integer(0))


def _compile(expr, syms):
    f = sp.lambdify(syms, expr, modules=[{"Heaviside": lambda v, h=0.5: np.heaviside(v, 1.0)}, "numpy"])

    def g(*args):
        shape = np.broadcast(*args).shape if args else ()
        return np.broadcast_to(np.asarray(f(*args), dtype=complex), shape)
    return g


class SymbolField:
    """Z-invariant operator-valued symbol given by closed-form generators."""

    def __init__(self, model: FlatModel, gens: dict, cylinder=False, degree=0, block=1, name="", t_step=0):
        self.model = model
        self.t_step = t_step
        self.cylinder = cylinder
        self.degree = degree
        self.block = block
        self.name = name
        self.gens = {}
        for k, g in gens.items():
            m = sp.Matrix(g) if isinstance(g, (list, sp.MatrixBase)) else sp.Matrix([[g]])
            if m.shape != (block, block):
                raise SymbolError(f"generator {k} has shape {m.shape}, block is {block}")
            if any(e != 0 for e in m):
                self.gens[int(k)] = m
        self._cache = {}

    @property
    def names(self):
        return self.model.names(self.cylinder)

    @property
    def syms(self):
        return self.model.syms(self.cylinder)

    @property
    def bandwidth(self):
        return max((abs(k) for k in self.gens), default=0)

    def _fn(self, k, deriv, p, q):
        key = (k, deriv, p, q)
        if key not in self._cache:
            e = self.gens[k][p, q]
            if deriv is not None:
                e = _strip_delta(sp.diff(e, self.syms[self.names.index(deriv)]))
            self._cache[key] = _compile(e, self.syms)
        return self._cache[key]

    def sample(self, points, W=None, t_step=None, deriv=None, rows=None, cols=None):
        """Window matrices at a batch of points, shape (P, len(rows)*r, len(cols)*r)."""
        t_step = self.t_step if t_step is None else t_step
        if rows is None:
            rows = np.arange(-W, W + 1)
        if cols is None:
            cols = np.arange(-W, W + 1)
        rows, cols = np.asarray(rows), np.asarray(cols)
        shape = np.broadcast(*[np.asarray(points[n]) for n in self.names]).shape
        P = int(np.prod(shape)) if shape else 1
        r = self.block
        out = np.zeros((P, rows.size, r, cols.size, r), dtype=complex)
        base = {n: np.broadcast_to(np.asarray(points[n], dtype=float), shape).reshape(P, 1) for n in self.names}
        shifted = self.model.shift_points({n: base[n] + 0 * rows[None, :] for n in self.names},
                                          rows[None, :], t_step)
        args = [np.broadcast_to(shifted[n], (P, rows.size)) for n in self.names]
        for k in self.gens:
            b = rows + k - cols[0]
            ok = (b >= 0) & (b < cols.size)
            ok[ok] &= cols[b[ok]] == rows[ok] + k
            if not ok.any():
                continue
            a_idx = np.nonzero(ok)[0]
            sub = [arg[:, a_idx] for arg in args]
            for p in range(r):
                for q in range(r):
                    if self.gens[k][p, q] == 0:
                        continue
                    out[:, a_idx, p, b[a_idx], q] = self._fn(k, deriv, p, q)(*sub)
        return out.reshape(P, rows.size * r, cols.size * r)

    def evaluate(self, point, W, t_step=None):
        """The symbol at one point as a :class:`RapidMatrix` (scalar blocks only)."""
        t_step = self.t_step if t_step is None else t_step
        if self.block != 1:
            raise SymbolError("RapidMatrix evaluation needs block size 1; use sample()")
        pts = {n: np.array([float(point[n])]) for n in self.names}
        model, fn = self.model, self

        def gen(k, rows):
            if k not in fn.gens:
                return np.zeros(np.shape(rows), dtype=complex)
            rows = np.asarray(rows)
            sh = model.shift_points({n: pts[n] + 0 * rows for n in fn.names}, rows, t_step)
            return fn._fn(k, None, 0, 0)(*[sh[n] for n in fn.names])
        return RapidMatrix.from_generator(gen, W, sorted(self.gens), exact_bandwidth=self.bandwidth)

    def shifted_gen(self, k, l, t_step=None):
        t_step = self.t_step if t_step is None else t_step
        return self.gens[k].subs(self.model.orbit_subs(l, t_step))

    def adjoint(self):
        """(sigma^*)_k(y) = sigma_{-k}(g^k y)^H, the pointwise adjoint on l^2(Z)."""
        gens = {}
        for k in self.gens:
            m = self.shifted_gen(k, -k)
            gens[-k] = m.applyfunc(sp.conjugate).T
        return SymbolField(self.model, gens, self.cylinder, self.degree, self.block, self.name + "*", self.t_step)

    def scaled(self, c):
        return SymbolField(self.model, {k: g * c for k, g in self.gens.items()}, self.cylinder,
                           self.degree, self.block, self.name, self.t_step)

    def __add__(self, other):
        gens = dict(self.gens)
        for k, g in other.gens.items():
            gens[k] = gens.get(k, sp.zeros(self.block)) + g
        return SymbolField(self.model, gens, self.cylinder, self.degree, self.block, self.name, self.t_step)

    def on_cylinder(self, homogenize=True):
        """Lift a cosphere symbol to S(T*M x R^2), made homogeneous of degree 1 in xi."""
        if self.cylinder:
            return self
        factor = sp.Integer(1)
        if homogenize and self.degree == 0:
            factor = sp.sqrt(sum(x ** 2 for x in self.model.covar_syms))
        gens = {k: g * factor for k, g in self.gens.items()}
        return SymbolField(self.model, gens, True, 1 if homogenize else self.degree, self.block, self.name)

    def homogeneity_ratio(self, points, lam, W=1):
        pts = dict(points)
        for n in self.model.covar_names + (("t", "tau") if self.cylinder else ()):
            pts[n] = np.asarray(points[n]) * lam
        a = self.sample(points, W)
        b = self.sample(pts, W)
        return b, a * lam ** self.degree


def linear_path(s0: SymbolField, s1: SymbolField, lam):
    if s0.model != s1.model or s0.cylinder != s1.cylinder:
        raise SymbolError("path endpoints live on different models")
    return s0.scaled(1 - lam) + s1.scaled(lam)


# ---------------------------------------------------------------------------
# Graded forms


def _merge(mu, nu, order):
    """Wedge of basis monomials; returns (sign, monomial) or (0, None)."""
    if set(mu) & set(nu):
        return 0, None
    seq = [order.index(v) for v in mu + nu]
    inv = sum(1 for a, b in itertools.combinations(range(len(seq)), 2) if seq[a] > seq[b])
    return (-1) ** inv, tuple(sorted(mu + nu, key=order.index))


class GradedForm:
    """Z-invariant endomorphism-valued differential form with closed-form coefficients.

    ``comps[monomial][k]`` is the generator matrix of offset ``k`` multiplying
    ``d(monomial)``.  The bidegree (i, j) counts dt factors and dxi/dtau
    factors respectively.
    """

    def __init__(self, model: FlatModel, comps: dict, cylinder=False, block=1, t_step=0):
        self.model = model
        self.cylinder = cylinder
        self.block = block
        self.t_step = t_step
        self.comps = {}
        for mu, gens in comps.items():
            mu = tuple(sorted(mu, key=self.names.index))
            g = {int(k): (sp.Matrix(v) if isinstance(v, (list, sp.MatrixBase)) else sp.Matrix([[v]]))
                 for k, v in gens.items()}
            g = {k: v for k, v in g.items() if any(e != 0 for e in v)}
            if g:
                self.comps[mu] = g

    @property
    def names(self):
        return self.model.names(self.cylinder)

    @property
    def syms(self):
        return self.model.syms(self.cylinder)

    @classmethod
    def from_symbol(cls, s: SymbolField):
        return cls(s.model, {(): dict(s.gens)}, s.cylinder, s.block, s.t_step)

    @classmethod
    def zero(cls, model, cylinder=False, block=1):
        return cls(model, {}, cylinder, block)

    def degrees(self):
        return sorted({len(mu) for mu in self.comps})

    @property
    def degree(self):
        d = self.degrees()
        if len(d) > 1:
            raise SymbolError(f"form is not homogeneous in degree: {d}")
        return d[0] if d else 0

    def bidegree(self, mu):
        i = sum(1 for v in mu if v == "t")
        j = sum(1 for v in mu if v in self.model.covar_names or v == "tau")
        return i, j

    def bidegrees(self):
        return sorted({self.bidegree(mu) for mu in self.comps})

    def component(self, i, j):
        return GradedForm(self.model, {mu: g for mu, g in self.comps.items() if self.bidegree(mu) == (i, j)},
                          self.cylinder, self.block, self.t_step)

    def __add__(self, other):
        comps = {mu: dict(g) for mu, g in self.comps.items()}
        for mu, g in other.comps.items():
            tgt = comps.setdefault(mu, {})
            for k, v in g.items():
                tgt[k] = tgt.get(k, sp.zeros(self.block)) + v
        return GradedForm(self.model, comps, self.cylinder, self.block, self.t_step)

    def scaled(self, c):
        return GradedForm(self.model, {mu: {k: v * c for k, v in g.items()} for mu, g in self.comps.items()},
                          self.cylinder, self.block, self.t_step)

    def __neg__(self):
        return self.scaled(-1)

    def __sub__(self, other):
        return self + (-other)

    def wedge(self, other):
        order = list(self.names)
        comps = {}
        for mu, ga in self.comps.items():
            for nu, gb in other.comps.items():
                sign, lam = _merge(mu, nu, order)
                if not sign:
                    continue
                tgt = comps.setdefault(lam, {})
                for l, a in ga.items():
                    for kb, b in gb.items():
                        k = l + kb
                        bs = b.subs(self.model.orbit_subs(l, self.t_step))
                        tgt[k] = tgt.get(k, sp.zeros(self.block)) + sign * a * bs
        return GradedForm(self.model, comps, self.cylinder, self.block, self.t_step)

    __mul__ = wedge

    def d(self):
        order = list(self.names)
        comps = {}
        for mu, g in self.comps.items():
            for v, sym in zip(self.names, self.syms):
                sign, lam = _merge((v,), mu, order)
                if not sign:
                    continue
                tgt = comps.setdefault(lam, {})
                for k, c in g.items():
                    dc = c.applyfunc(lambda e: _strip_delta(sp.diff(e, sym)))
                    tgt[k] = tgt.get(k, sp.zeros(self.block)) + sign * dc
        return GradedForm(self.model, comps, self.cylinder, self.block, self.t_step)

    def coefficient_field(self, mu):
        return SymbolField(self.model, self.comps.get(tuple(mu), {}), self.cylinder, 0, self.block, t_step=self.t_step)

    def sample(self, points, W=None, t_step=None, rows=None, cols=None):
        ts = self.t_step if t_step is None else t_step
        return SampledForm({mu: self.coefficient_field(mu).sample(points, W, ts, rows=rows, cols=cols)
                            for mu in self.comps}, self.names)

    def max_abs(self, points, W=2):
        s = self.sample(points, W)
        return max((float(np.max(np.abs(v))) for v in s.comps.values()), default=0.0)


class SampledForm:
    """A graded form sampled at a batch of points: monomial -> (P, n, n) array."""

    def __init__(self, comps, coords):
        self.comps = dict(comps)
        self.coords = tuple(coords)

    def wedge(self, other: "SampledForm"):
        order = list(self.coords)
        comps = {}
        for mu, a in self.comps.items():
            for nu, b in other.comps.items():
                sign, lam = _merge(mu, nu, order)
                if sign:
                    comps[lam] = comps.get(lam, 0) + sign * (a @ b)
        return SampledForm(comps, self.coords)

    __mul__ = wedge

    def __add__(self, other):
        comps = dict(self.comps)
        for mu, v in other.comps.items():
            comps[mu] = comps.get(mu, 0) + v
        return SampledForm(comps, self.coords)

    def __sub__(self, other):
        return self + other.scaled(-1)

    def scaled(self, c):
        return SampledForm({mu: c * v for mu, v in self.comps.items()}, self.coords)

    def max_abs(self):
        return max((float(np.max(np.abs(v))) for v in self.comps.values()), default=0.0)

    def center(self, W):
        """Restriction to rows/columns -W..W of each (square, centred) window."""
        out = {}
        for mu, v in self.comps.items():
            n = v.shape[1]
            c = (n - 1) // 2
            out[mu] = v[:, c - W:c + W + 1, c - W:c + W + 1] if n > 2 * W + 1 else v
        return SampledForm(out, self.coords)

    def pullback(self, jac, chart):
        """Pull back along a chart; ``jac[p, a, c]`` = d ambient_a / d chart_c."""
        out = {}
        chart = tuple(chart)
        for mu, v in self.comps.items():
            amb = [self.coords.index(a) for a in mu]
            for lam in itertools.combinations(range(len(chart)), len(mu)):
                minor = np.linalg.det(jac[:, amb][:, :, list(lam)]) if mu else np.ones(jac.shape[0])
                if np.max(np.abs(minor)) == 0:
                    continue
                key = tuple(chart[c] for c in lam)
                out[key] = out.get(key, 0) + minor[:, None, None] * v
        return SampledForm(out, chart)


# ---------------------------------------------------------------------------
# Operations on symbols


@dataclass
class EllipticityReport:
    passed: bool
    worst_norm: float
    worst_point: dict
    norms: np.ndarray
    offending: list = field(default_factory=list)


def tall_left_inverse(mats_tall):
    """Least-squares left inverse (A^H A)^-1 A^H of a batch of tall compressions."""
    ah = np.conj(np.swapaxes(mats_tall, 1, 2))
    return np.linalg.solve(ah @ mats_tall, ah)


def _tall_sample(sigma, points, W, t_step=None, deriv=None):
    b = sigma.bandwidth
    rows = np.arange(-W - b, W + b + 1)
    cols = np.arange(-W, W + 1)
    return sigma.sample(points, rows=rows, cols=cols, t_step=t_step, deriv=deriv)


def smallest_singular(sigma, points, W, t_step=None):
    s1 = np.linalg.svd(_tall_sample(sigma, points, W, t_step), compute_uv=False)[:, -1]
    s2 = np.linalg.svd(_tall_sample(sigma.adjoint(), points, W, t_step), compute_uv=False)[:, -1]
    return np.minimum(s1, s2)


def check_ellipticity(sigma: SymbolField, points: dict, bound: float, W=32, t_step=None):
    """Invertibility of the symbol at every grid point with inverse norm <= bound.

    The inverse norm is 1/(smallest singular value) of tall compressions of the
    symbol and its adjoint; a point fails if that value exceeds ``bound`` or
    drops by more than 25% when the window is halved -> doubled.
    """
    s_big = smallest_singular(sigma, points, W, t_step)
    s_half = smallest_singular(sigma, points, max(W // 2, sigma.bandwidth + 1), t_step)
    with np.errstate(divide="ignore"):
        norms = 1.0 / s_big
    unstable = s_big < 0.75 * s_half
    bad = (norms > bound) | unstable | ~np.isfinite(norms)
    P = norms.size
    idx = int(np.argmax(norms))
    pt = {n: float(np.broadcast_to(points[n], (P,))[idx]) for n in sigma.names}
    offending = [{n: float(np.broadcast_to(points[n], (P,))[i]) for n in sigma.names} for i in np.nonzero(bad)[0]]
    return EllipticityReport(not bad.any(), float(norms[idx]), pt, norms, offending)


class SampledInverse:
    """Pointwise inverse of a symbol on a grid, stored as window matrices."""

    def __init__(self, sigma, points, W, mats, t_step=None):
        self.sigma = sigma
        self.points = points
        self.W = W
        self.mats = mats
        self.t_step = t_step

    def row0_diagonals(self):
        """r_k(p) = inverse_{0,k} at each point, for k = -W..W (block entries)."""
        c = self.W * self.sigma.block
        r = self.sigma.block
        return {k: self.mats[:, c:c + r, c + k * r:c + k * r + r] for k in range(-self.W, self.W + 1)}

    def rapid(self, p, window=None):
        if self.sigma.block != 1:
            raise SymbolError("scalar blocks only")
        return RapidMatrix.from_dense(self.mats[p] if window is None else self.mats[p])


def inverse_symbol(sigma: SymbolField, points: dict, W=16, t_step=None, check=True, tol=1e-10):
    """Pointwise inverses on the grid (central (2W+1)-block windows)."""
    if check:
        rep = check_ellipticity(sigma, points, np.inf, W=W + 4, t_step=t_step)
        if not rep.passed:
            raise SymbolError(f"symbol not elliptic; worst point {rep.worst_point}")
    Wb = W + max(8, W)
    left = tall_left_inverse(_tall_sample(sigma, points, Wb, t_step))
    b = sigma.bandwidth
    r = sigma.block
    c0 = (Wb - W) * r
    c1 = (Wb - W + b) * r
    n = (2 * W + 1) * r
    mats = left[:, c0:c0 + n, c1:c1 + n]
    return SampledInverse(sigma, points, W, mats, t_step)


def z_invariance_defect(sigma: SymbolField, points: dict, W=8, t_step=None, inverse=False):
    """max |value(g p)_{ij} - value(p)_{i+1,j+1}| over stored entries."""
    t_step = sigma.t_step if t_step is None else t_step
    gpts = sigma.model.shift_points(points, 1, t_step)
    if inverse:
        a = inverse_symbol(sigma, points, W + 1, t_step, check=False).mats
        b = inverse_symbol(sigma, gpts, W + 1, t_step, check=False).mats
        r = sigma.block
        n = (2 * W - 1) * r
        b_in = b[:, 2 * r:2 * r + n, 2 * r:2 * r + n]
        a_sh = a[:, 3 * r:3 * r + n, 3 * r:3 * r + n]
        return float(np.max(np.abs(b_in - a_sh)))
    a = sigma.sample(points, rows=np.arange(-W + 1, W + 2), cols=np.arange(-W + 1, W + 2), t_step=t_step)
    b = sigma.sample(gpts, W=W, t_step=t_step)
    return float(np.max(np.abs(a - b)))


def inverse_differential(sigma: SymbolField, points: dict, W=12, t_step=None):
    """d(sigma^-1) = -sigma^-1 (d sigma) sigma^-1 on the central window, as a SampledForm."""
    inv = inverse_symbol(sigma, points, W, t_step, check=False).mats
    comps = {}
    for v in sigma.names:
        ds = sigma.sample(points, W, t_step, deriv=v)
        if np.max(np.abs(ds)) == 0:
            continue
        comps[(v,)] = -inv @ ds @ inv
    return SampledForm(comps, sigma.names), inv


def exact_differential(omega):
    if isinstance(omega, SymbolField):
        omega = GradedForm.from_symbol(omega)
    return omega.d()
