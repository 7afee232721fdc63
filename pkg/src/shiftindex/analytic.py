"""Analytic index of D = sum_k D_k T^k on T^n in the Fourier basis.

Each term is ``a(x) F(D_x) T^k`` with a trigonometric polynomial ``a`` and a
Fourier multiplier ``F``.  On modes it acts by

    e^{imx}  ->  sum_l a_l F(m) e^{2 pi i k m.theta} e^{i(m+l)x},

so the matrix is exactly banded.  Two index computations are offered: the
finite-section SVD count on tall compressions, and the trace formula
tr(1 - R'D) - tr(1 - DR') with a refined parametrix R'.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .geometry import FlatModel, SymbolField, TrigPolynomial, inverse_symbol

log = logging.getLogger(__name__)

# multiplier name -> order; abs+/abs- are |xi| restricted to the sheets xi >= 0 / xi < 0
_FACTORS = {
    "1": 0, "P+": 0, "P-": 0, "riesz": 0,
    "xi": 1, "xi1": 1, "xi2": 1, "abs": 1, "abs+": 1, "abs-": 1,
}


def factor_order(name):
    try:
        return _FACTORS[name]
    except KeyError:
        raise ValueError(f"unknown factor {name!r}; choose from {sorted(_FACTORS)}") from None


def factor_values(name, modes):
    m = np.atleast_2d(modes)
    norm = np.sqrt(np.sum(m.astype(float) ** 2, axis=1))
    if name == "1":
        return np.ones(len(m), dtype=complex)
    if name in ("xi", "xi1"):
        return m[:, 0].astype(complex)
    if name == "xi2":
        return m[:, 1].astype(complex)
    if name == "abs":
        return norm.astype(complex)
    if name == "P+":
        return (m[:, 0] >= 0).astype(complex)
    if name == "P-":
        return (m[:, 0] < 0).astype(complex)
    if name == "abs+":
        return (norm * (m[:, 0] >= 0)).astype(complex)
    if name == "abs-":
        return (norm * (m[:, 0] < 0)).astype(complex)
    if name == "riesz":
        z = m[:, 0] + 1j * m[:, 1]
        return np.where(norm > 0, z / np.where(norm > 0, norm, 1), 1.0)
    raise ValueError(name)


def factor_symbol(name, covar):
    xi = covar[0]
    if name == "1":
        return sp.Integer(1)
    if name in ("xi", "xi1"):
        return xi
    if name == "xi2":
        return covar[1]
    if name == "abs":
        return sp.sqrt(sum(c ** 2 for c in covar))
    if name == "P+":
        return sp.Heaviside(xi)
    if name == "P-":
        return sp.Heaviside(-xi)
    if name in ("abs+", "abs-"):
        side = xi if name == "abs+" else -xi
        return sp.sqrt(sum(c ** 2 for c in covar)) * sp.Heaviside(side)
    if name == "riesz":
        return (covar[0] + sp.I * covar[1]) / sp.sqrt(covar[0] ** 2 + covar[1] ** 2)
    raise ValueError(name)


@dataclass(frozen=True)
class Term:
    k: int
    coeff: TrigPolynomial
    factor: str = "1"

    @property
    def order(self):
        return factor_order(self.factor)


@dataclass
class ShiftOperator:
    model: FlatModel
    terms: list
    order: int = 0
    name: str = ""

    def __post_init__(self):
        for t in self.terms:
            if t.order > self.order:
                raise ValueError(f"term of order {t.order} exceeds declared order {self.order}")
            if self.model.dim == 1 and t.factor in ("xi2", "riesz"):
                raise ValueError(f"factor {t.factor} needs the 2-torus")

    @property
    def bandwidth(self):
        return max((t.coeff.bandwidth for t in self.terms), default=0)

    def matrix(self, rows, cols):
        """Dense block <e_row, D e_col> for arrays of modes (shape (n,) or (n, dim))."""
        rows, cols = _modes(rows, self.model.dim), _modes(cols, self.model.dim)
        index = {tuple(r): i for i, r in enumerate(rows)}
        out = np.zeros((len(rows), len(cols)), dtype=complex)
        theta = np.asarray(self.model.theta)
        phase_base = 2j * np.pi * (cols @ theta)
        for t in self.terms:
            f = factor_values(t.factor, cols) * np.exp(phase_base * t.k)
            for freq, amp in t.coeff.terms:
                l = np.atleast_1d(freq)
                tgt = cols + l
                for j, m in enumerate(tgt):
                    i = index.get(tuple(m))
                    if i is not None:
                        out[i, j] += complex(amp) * f[j]
        return out

    def symbol(self):
        """Principal symbol sigma_k = sum of top-order terms with shift power k."""
        cov = self.model.covar_syms
        gens = {}
        for t in self.terms:
            if t.order != self.order:
                continue
            e = t.coeff.expr(self.model) * factor_symbol(t.factor, cov)
            gens[t.k] = gens.get(t.k, 0) + e
        return SymbolField(self.model, gens, False, self.order, 1, self.name)

    def adjoint(self):
        return Adjoint(self)


@dataclass
class Adjoint:
    """D^* as a matrix provider (the conjugate transpose of the mode matrix)."""
    op: ShiftOperator

    @property
    def model(self):
        return self.op.model

    @property
    def order(self):
        return self.op.order

    @property
    def bandwidth(self):
        return self.op.bandwidth

    @property
    def name(self):
        return self.op.name + "*"

    def matrix(self, rows, cols):
        return np.conj(self.op.matrix(cols, rows)).T

    def adjoint(self):
        return self.op


@dataclass
class MultipliedOperator:
    """D composed on the right with a diagonal Fourier multiplier m -> F(m)."""
    op: object
    multiplier: object
    name: str = ""

    @property
    def model(self):
        return self.op.model

    @property
    def order(self):
        return self.op.order

    @property
    def bandwidth(self):
        return self.op.bandwidth

    def matrix(self, rows, cols):
        cols_m = _modes(cols, self.model.dim)
        return self.op.matrix(rows, cols) * np.asarray(self.multiplier(cols_m))[None, :]

    def adjoint(self):
        return Adjoint(self)

    def symbol(self):
        raise NotImplementedError


def _modes(m, dim):
    m = np.asarray(m)
    if dim == 1:
        return m.reshape(-1, 1).astype(int)
    return m.reshape(-1, dim).astype(int)


def mode_box(N, dim=1):
    if dim == 1:
        return np.arange(-N, N + 1).reshape(-1, 1)
    r = np.arange(-N, N + 1)
    return np.array(list(itertools.product(r, r)))


def sobolev_weight(modes, s):
    m = np.atleast_2d(modes).astype(float)
    return (1.0 + np.sum(m ** 2, axis=1)) ** (s / 2.0)


@dataclass
class FourierCompression:
    N: int
    s: float
    order: int
    rows: np.ndarray
    cols: np.ndarray
    matrix: np.ndarray
    weighted: np.ndarray


def assemble(D, N, s=0.0, tall=True):
    """Compression onto modes |m|_inf <= N, weighted H^s -> H^{s-d}.

    With ``tall`` the rows are extended by the bandwidth, so that the block
    contains the full image of every retained column.
    """
    if N < D.bandwidth:
        raise ValueError("N must be at least the bandwidth")
    dim = D.model.dim
    cols = mode_box(N, dim)
    rows = mode_box(N + D.bandwidth, dim) if tall else cols
    M = D.matrix(rows, cols)
    Wd = sobolev_weight(cols, s)
    Wc = sobolev_weight(rows, s - D.order)
    return FourierCompression(N, s, D.order, rows, cols, M, Wc[:, None] * M / Wd[None, :])


def quadrature_matrix_elements(D, rows, cols, n=512):
    """<e^{im'x}, D e^{imx}> by trapezoid quadrature in x (dim 1), as an independent check."""
    x = 2 * np.pi * np.arange(n) / n
    out = np.zeros((len(rows), len(cols)), dtype=complex)
    th = D.model.theta[0]
    for j, m in enumerate(cols):
        u = np.zeros(n, dtype=complex)
        for t in D.terms:
            f = factor_values(t.factor, np.array([[m]]))[0] * np.exp(2j * np.pi * t.k * m * th)
            u += t.coeff(x) * f * np.exp(1j * m * x)
        for i, mp in enumerate(rows):
            out[i, j] = np.mean(np.exp(-1j * mp * x) * u)
    return out


# ---------------------------------------------------------------------------
# finite sections


@dataclass
class SVDResult:
    index: object  # int or None
    status: str  # "ok", "low-confidence", "inconclusive"
    table: list = field(default_factory=list)
    plateau: int = 0

    def to_dict(self):
        return {"index": self.index, "status": self.status, "plateau": self.plateau, "table": self.table}


def _kernel_count(mat, eps_rel):
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0:
        return 0, np.inf, sv
    thr = eps_rel * sv[0]
    k = int(np.sum(sv < thr))
    if k == 0:
        gap = sv[-1] / thr
    else:
        nz = sv[: sv.size - k]
        gap = (nz[-1] / max(sv[-k], 1e-300)) if nz.size else 0.0
    return k, float(gap), sv


def index_svd(D, s=0.0, N_list=(16, 32, 64, 128), eps_rel=1e-6, gap_min=1e3):
    """dim ker - dim coker from tall compressions of D and D^*, with plateau detection."""
    if len(N_list) < 3:
        raise ValueError("need at least three window sizes")
    table = []
    for N in N_list:
        fc = assemble(D, N, s)
        fa = assemble(D.adjoint(), N, -(s - D.order))
        k1, g1, sv1 = _kernel_count(fc.weighted, eps_rel)
        k2, g2, sv2 = _kernel_count(fa.weighted, eps_rel)
        table.append({"N": int(N), "ker": k1, "coker": k2, "index": k1 - k2, "gap": min(g1, g2),
                      "smallest": [float(sv1[-1]), float(sv2[-1])]})
    top = table[len(table) // 2:]
    vals = {r["index"] for r in top}
    if len(vals) != 1:
        return SVDResult(None, "inconclusive", table, 0)
    idx = vals.pop()
    plateau = 0
    for r in reversed(table):
        if r["index"] != idx:
            break
        plateau += 1
    gap = min(r["gap"] for r in top)
    status = "ok" if gap >= gap_min else "low-confidence"
    return SVDResult(int(idx), status, table, plateau)


# ---------------------------------------------------------------------------
# parametrix and regularizer trace


@dataclass
class Parametrix:
    """R = sum_k Op(r_k) T^k with r_k(x, +-1) given by Fourier coefficients."""
    model: FlatModel
    coeffs: dict  # (k, sign) -> array of Fourier coefficients indexed by l = -L..L
    L: int
    order: int
    reg0: float = 1.0

    @property
    def bandwidth(self):
        return self.L

    def matrix(self, rows, cols):
        rows = _modes(rows, 1)[:, 0]
        cols = _modes(cols, 1)[:, 0]
        out = np.zeros((rows.size, cols.size), dtype=complex)
        pos = {int(r): i for i, r in enumerate(rows)}
        th = self.model.theta[0]
        absm = np.abs(cols).astype(float)
        scale = np.where(cols != 0, np.where(absm > 0, absm, 1.0) ** (-self.order), self.reg0)
        sgn_pos = cols >= 0
        for (k, sgn), c in self.coeffs.items():
            sel = sgn_pos if sgn > 0 else ~sgn_pos
            f = scale * np.exp(2j * np.pi * k * cols * th) * sel
            for l in range(-self.L, self.L + 1):
                a = c[l + self.L]
                if a == 0:
                    continue
                i = np.array([pos.get(int(v), -1) for v in cols + l])
                ok = i >= 0
                out[i[ok], np.nonzero(ok)[0]] += a * f[ok]
        return out


def parametrix(D: ShiftOperator, W=16, n_x=256, reg0=1.0, tol=1e-14):
    """Quantize the inverse symbol: coefficient at mode m uses xi = sign(m) and |m|^-d."""
    if D.model.dim != 1:
        raise NotImplementedError("the parametrix is implemented on T^1")
    sigma = D.symbol()
    x = 2 * np.pi * np.arange(n_x) / n_x
    Wuse = W if sigma.bandwidth else 0
    coeffs = {}
    Lmax = 0
    for sgn in (1.0, -1.0):
        pts = {"x": x, "xi": np.full(n_x, sgn)}
        inv = inverse_symbol(sigma, pts, W=max(Wuse, 1) if sigma.bandwidth else 0, check=False)
        for k, r in inv.row0_diagonals().items():
            vals = r[:, 0, 0]
            if np.max(np.abs(vals)) < tol:
                continue
            c = np.fft.fft(vals) / n_x
            l = np.fft.fftfreq(n_x, 1.0 / n_x).astype(int)
            keep = np.abs(c) > tol * max(1.0, np.max(np.abs(c)))
            coeffs[(k, int(sgn))] = dict(zip(l[keep], c[keep]))
            Lmax = max(Lmax, int(np.max(np.abs(l[keep])))) if keep.any() else Lmax
    L = Lmax
    dense = {}
    for key, d in coeffs.items():
        arr = np.zeros(2 * L + 1, dtype=complex)
        for l, v in d.items():
            arr[l + L] = v
        dense[key] = arr
    return Parametrix(D.model, dense, L, D.order, reg0)


def _window(D, R, N):
    m = np.arange(-N, N + 1)
    return D.matrix(m, m), R.matrix(m, m)


@dataclass
class RegularizerResult:
    index: object
    value: float
    residual: float
    error: float
    status: str
    orders: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def _order_fit(mat, modes, lo, floor=1e-12):
    """Slope of log column norms against log|m| over |m| >= lo.

    Columns below ``floor`` are rounding noise; a remainder with fewer than
    four columns above it is smoothing (returned as order -inf).
    """
    norms = np.linalg.norm(mat, axis=0)
    sel = (np.abs(modes) >= lo) & (norms > floor)
    if sel.sum() < 4:
        return -np.inf
    return float(np.polyfit(np.log(np.abs(modes[sel])), np.log(norms[sel]), 1)[0])


def remainders(D, R, N):
    """S = 1 - RD, S' = 1 - DR and the refined remainders S^2, S'^2 on the inner modes.

    Products are formed on a window padded by the combined bandwidth so the
    returned inner blocks are exact.
    """
    pad = 3 * (D.bandwidth + R.bandwidth) + 4
    Nb = N + pad
    Dm, Rm = _window(D, R, Nb)
    n = 2 * Nb + 1
    I = np.eye(n)
    S = I - Rm @ Dm
    Sp = I - Dm @ Rm
    S2 = S @ S
    Sp2 = Sp @ Sp
    sl = slice(pad, pad + 2 * N + 1)
    return {"S": S[sl, sl], "Sp": Sp[sl, sl], "S2": S2[sl, sl], "Sp2": Sp2[sl, sl]}, np.arange(-N, N + 1)


def remainder_orders(D, R, N=256):
    rem, m = remainders(D, R, N)
    lo = max(N // 8, 4)
    inner = np.abs(m) <= N - 2 * (D.bandwidth + R.bandwidth) - 2
    return {k: _order_fit(v[np.ix_(inner, inner)], m[inner], lo) for k, v in rem.items()}


def index_regularizer(D, R=None, N=256, tail="fit", tol=0.1, W=16, reg0=1.0):
    """tr(1 - R'D) - tr(1 - DR') over modes |m| <= N with a fitted |m|^-p tail."""
    if R is None:
        R = parametrix(D, W=W, reg0=reg0)
    rem, m = remainders(D, R, N)
    lo = max(N // 8, 4)
    orders = {k: _order_fit(v, m, lo) for k, v in rem.items()}
    if orders["S2"] > -1.7 or orders["Sp2"] > -1.7:
        return RegularizerResult(None, float("nan"), float("nan"), float("nan"), "inconclusive", orders,
                                 {"reason": "remainder order above -2"})
    diag = np.diag(rem["S2"]) - np.diag(rem["Sp2"])
    order = np.argsort(np.abs(m), kind="stable")
    value = 0j
    for i in order:  # ascending |m|, then sign, for reproducible summation
        value += diag[i]
    tail_est = 0.0
    if tail == "fit":
        for side in (1, -1):
            sel = (side * m >= N // 2) & (np.abs(diag) > 0)
            if sel.sum() < 4:
                continue
            mm = np.abs(m[sel]).astype(float)
            dd = diag[sel]
            # fit d(m) ~ c m^-p on the real part, sum the tail by the integral bound
            mag = np.abs(dd)
            p, logc = np.polyfit(np.log(mm), np.log(mag), 1)
            p = -p
            if p > 1.05:
                c = np.exp(logc)
                tail_est += c * (N + 0.5) ** (1 - p) / (p - 1) * np.sign(np.real(dd[-1]) or 1.0)
    val = float(np.real(value)) + tail_est
    nearest = int(np.rint(val))
    res = abs(val - nearest)
    err = abs(tail_est) + abs(float(np.imag(value)))
    status = "ok" if res < tol else "inconclusive"
    return RegularizerResult(nearest if status == "ok" else None, val, res, err, status, orders,
                             {"N": N, "raw": [float(value.real), float(value.imag)], "tail": tail_est})
