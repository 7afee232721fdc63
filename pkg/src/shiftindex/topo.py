"""Topological index: cycle traces of (sigma^-1 d sigma)^(2j-1) over cosphere bundles.

    ind_t(sigma) = sum_j C_j tau((sigma^-1 d sigma)^(2j-1) ^ Td),
    C_j = (j-1)! / ((2 pi i)^j (2j-1)!).

tau integrates the (0,0) entry (traced over the matrix block) of the top
degree part over an oriented cycle from :mod:`shiftindex.quadrature`; Z
invariance makes this the trace over a fundamental domain of the orbit.
"""
from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import sympy as sp

from .geometry import (GradedForm, SampledForm, SymbolError, SymbolField, T_SYM, TAU_SYM,
                       _tall_sample, check_ellipticity, tall_left_inverse)
from .quadrature import Cycle

THREADS_ENV = "SHIFTINDEX_THREADS"


def index_constant(j):
    return math.factorial(j - 1) / ((2j * np.pi) ** j * math.factorial(2 * j - 1))


def thread_count(default=1):
    try:
        return max(1, int(os.environ.get(THREADS_ENV, default)))
    except ValueError:
        return default


def _perm_sign(p):
    inv = sum(1 for a, b in itertools.combinations(range(len(p)), 2) if p[a] > p[b])
    return -1 if inv % 2 else 1


@dataclass
class IndexResult:
    value: complex
    nearest: int
    residual: float
    quad_err: float = float("nan")
    tail_err: float = float("nan")
    n_points: int = 0
    window: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def error(self):
        return float(np.nansum([self.quad_err, self.tail_err]))

    def to_dict(self):
        d = asdict(self)
        d["value"] = [float(np.real(self.value)), float(np.imag(self.value))]
        return d


def _result(value, **kw):
    nearest = int(np.rint(value.real))
    return IndexResult(complex(value), nearest, float(abs(value - nearest)), **kw)


class ToddForm:
    """A scalar even form on the ambient space; the degree-0 part is 1.

    ``comps`` maps sorted tuples of ambient coordinate names to callables of
    the ambient point dictionary.  The flat models have trivial Todd class,
    so the default ``ToddForm()`` is the constant 1.
    """

    def __init__(self, comps=None):
        self.comps = dict(comps or {})
        if any(len(mu) % 2 for mu in self.comps):
            raise SymbolError("Todd form must be even")

    def pullback(self, pts, jac, ambient, chart_dim):
        """Ordered-tuple antisymmetric coefficients on the chart, {chart index tuple: (P,)}."""
        P = jac.shape[0]
        out = {(): np.ones(P)}
        for mu, f in self.comps.items():
            if not mu:
                continue
            amb = [ambient.index(a) for a in mu]
            val = np.broadcast_to(np.asarray(f(pts), dtype=complex), (P,))
            for lam in itertools.permutations(range(chart_dim), len(mu)):
                minor = np.linalg.det(jac[:, amb][:, :, list(lam)])
                out[lam] = out.get(lam, 0) + val * minor
        return out


def _pulled_log_derivative(sigma: SymbolField, pts, jac, cycle, W):
    """A_c = L * d sigma / d chart_c on the central window, L the tall left inverse."""
    tall = _tall_sample(sigma, pts, W)
    L = tall_left_inverse(tall)
    A = []
    for c in range(cycle.dim):
        acc = 0
        for a, name in enumerate(cycle.ambient_names):
            if name not in sigma.names or not np.any(jac[:, a, c]):
                continue
            acc = acc + jac[:, a, c][:, None, None] * _tall_sample(sigma, pts, W, deriv=name)
        A.append(L @ acc if not np.isscalar(acc) else np.zeros(L.shape[:1] + (L.shape[1],) * 2, complex))
    return A


def _top_coefficient(A, r, todd_coefs, dim):
    n = A[0].shape[1]
    c0 = (n // r - 1) // 2 * r
    P = A[0].shape[0]
    total = np.zeros(P, dtype=complex)
    for m in range(dim, 0, -2):
        tcoef = todd_coefs if m < dim else {(): np.ones(P)}
        if m < dim and not any(len(k) == dim - m for k in tcoef):
            continue
        j = (m + 1) // 2
        part = np.zeros(P, dtype=complex)
        for perm in itertools.permutations(range(dim)):
            rest = perm[m:]
            tc = tcoef.get(rest)
            if tc is None:
                continue
            X = A[perm[0]][:, c0:c0 + r, :]
            for c in perm[1:m - 1]:
                X = X @ A[c]
            if m > 1:
                X = X @ A[perm[m - 1]][:, :, c0:c0 + r]
            else:
                X = X[:, :, c0:c0 + r]
            part += _perm_sign(perm) * np.trace(X, axis1=1, axis2=2) * tc
        total += index_constant(j) * part / math.factorial(dim - m)
    return total


def _ambient_points(sigma, cycle, sl):
    pts, jac, w = cycle.chunk(sl)
    P = w.size
    full = {n: np.asarray(pts[n]) if n in pts else np.zeros(P) for n in sigma.names}
    return full, jac, w


def _chunk_value(sigma, cycle, W, sl, todd):
    pts, jac, w = _ambient_points(sigma, cycle, sl)
    A = _pulled_log_derivative(sigma, pts, jac, cycle, W)
    tco = todd.pullback(pts, jac, cycle.ambient_names, cycle.dim) if todd is not None else {}
    return np.sum(w * _top_coefficient(A, sigma.block, tco, cycle.dim))


def _integrate(sigma, cycle, W, chunk, parallel, todd):
    slices = [slice(i, min(i + chunk, cycle.size)) for i in range(0, cycle.size, chunk)]
    if parallel and thread_count() > 1:
        with ThreadPoolExecutor(thread_count()) as ex:
            parts = list(ex.map(lambda s: _chunk_value(sigma, cycle, W, s, todd), slices))
    else:
        parts = [_chunk_value(sigma, cycle, W, s, todd) for s in slices]
    total = 0j
    for p in parts:  # fixed order, independent of scheduling
        total += p
    return total


def ind_t(sigma: SymbolField, cycle: Cycle, W=None, chunk=256, parallel=False, error=False,
          check=True, bound=1e6):
    """Cycle-trace index of an elliptic symbol.

    ``W`` is the half-width of the l^2(Z) window; diagonal symbols need W=0.
    With ``error=True`` the quadrature error is estimated against the
    coarsened grid and the tail error against a window of half the size.
    """
    if cycle.dim % 2 == 0:
        raise SymbolError("cycle must be odd dimensional")
    if W is None:
        W = 0 if sigma.bandwidth == 0 else 12
    todd = cycle.todd
    if check:
        pts, _, _ = _ambient_points(sigma, cycle, slice(0, cycle.size, max(1, cycle.size // 64)))
        rep = check_ellipticity(sigma, pts, bound, W=max(2 * W, 8) if sigma.bandwidth else 1)
        if not rep.passed:
            raise SymbolError(f"symbol {sigma.name!r} not elliptic on {cycle.name}; worst {rep.worst_point}")
    val = _integrate(sigma, cycle, W, chunk, parallel, todd)
    kw = {"n_points": cycle.size, "window": W, "meta": {"cycle": cycle.name, "symbol": sigma.name}}
    if error:
        coarse = _integrate(sigma, cycle.coarsened(), W, chunk, parallel, todd)
        kw["quad_err"] = float(abs(val - coarse))
        if sigma.bandwidth:
            half = _integrate(sigma, cycle, max(W // 2, 2), chunk, parallel, todd)
            kw["tail_err"] = float(abs(val - half))
        else:
            kw["tail_err"] = 0.0
    return _result(val, **kw)


def tau(omega, cycle: Cycle, W=4, t_step=None):
    """Cycle trace of a graded form: integral of the (0,0) entry of its top part.

    Forms of the wrong degree have zero trace (a warning is issued).  ``omega``
    may be a :class:`GradedForm` or a :class:`SampledForm` already expressed in
    the chart coordinates of ``cycle``.
    """
    if isinstance(omega, GradedForm):
        pts, jac, w = _ambient_points(omega, cycle, slice(None))
        if omega.degrees() and cycle.dim not in omega.degrees():
            warnings.warn("form degree does not match the cycle; trace is zero")
            return 0.0
        sf = omega.sample(pts, W, t_step)
        jfull = np.zeros((w.size, len(omega.names), cycle.dim))
        for a, n in enumerate(cycle.ambient_names):
            if n in omega.names:
                jfull[:, omega.names.index(n)] = jac[:, a]
        sf = sf.pullback(jfull, cycle.chart)
        block = omega.block
    else:
        sf, block = omega, 1
        w = cycle.weights * cycle.orientation
    top = sf.comps.get(tuple(cycle.chart))
    if top is None:
        if any(len(mu) != cycle.dim for mu in sf.comps):
            warnings.warn("form degree does not match the cycle; trace is zero")
        return 0.0
    n = top.shape[1]
    c0 = (n // block - 1) // 2 * block
    return complex(np.sum(w * np.trace(top[:, c0:c0 + block, c0:c0 + block], axis1=1, axis2=2)))


# ---------------------------------------------------------------------------
# Symbols built from others


def bott_symbol(model):
    """t + i tau on the R^2 factor, as a scalar cylinder symbol."""
    return SymbolField(model, {0: T_SYM + sp.I * TAU_SYM}, cylinder=True, degree=1, name="bott")


def external_product(s1: SymbolField, s2: SymbolField = None):
    """sigma_1 # sigma_2 = [[s1, s2], [-s2^*, s1^*]] for a scalar diagonal s2 on R^2.

    ``s1`` is lifted to the cylinder and made homogeneous of degree one in
    xi; ``s2`` defaults to the Bott symbol.
    """
    if s2 is None:
        s2 = bott_symbol(s1.model)
    if s2.bandwidth or s2.block != 1:
        raise SymbolError("second factor must be a scalar function of (t, tau)")
    a = s1.on_cylinder()
    b = s2.gens[0][0, 0]
    r = a.block
    astar = a.adjoint()
    ident = sp.eye(r)
    gens = {}
    for k in set(a.gens) | set(astar.gens) | {0}:
        m = sp.zeros(2 * r)
        m[:r, :r] = a.gens.get(k, sp.zeros(r))
        m[r:, r:] = astar.gens.get(k, sp.zeros(r))
        if k == 0:
            m[:r, r:] = b * ident
            m[r:, :r] = -sp.conjugate(b) * ident
        gens[k] = m
    return SymbolField(a.model, gens, True, 1, 2 * r, f"{s1.name}#{s2.name}")
