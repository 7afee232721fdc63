"""Rapid-decay matrices on l^2(Z).

Elements of the algebra of bi-infinite matrices whose off-diagonals decay
faster than any power of the offset.  A :class:`RapidMatrix` stores the rows
``n = -W..W`` of such a matrix diagonal by diagonal; entries outside the
stored rows come from an optional generator ``gen(k, n)`` and are otherwise
treated as zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

N_MAX = 8


class SeqAlgebraError(ValueError):
    pass


class SingularError(SeqAlgebraError):
    """Raised when a matrix is not invertible within tolerance."""

    def __init__(self, message, smallest_sv):
        super().__init__(message)
        self.smallest_sv = smallest_sv


class DecayError(SeqAlgebraError):
    pass


class NonSummableError(SeqAlgebraError):
    pass


def canonical_order(W):
    """Row indices 0, -1, 1, -2, 2, ... used for every reproducible sum."""
    out = [0]
    for m in range(1, W + 1):
        out += [-m, m]
    return np.array(out)


@dataclass(frozen=True)
class RapidMatrix:
    diagonals: dict
    window: int
    exact_bandwidth: Optional[int] = None
    generator: Optional[Callable] = None
    order: Optional[float] = None
    truncation_error: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.window < 0:
            raise SeqAlgebraError("window must be non-negative")
        size = 2 * self.window + 1
        for k, v in self.diagonals.items():
            if np.shape(v) != (size,):
                raise SeqAlgebraError(f"diagonal {k} has shape {np.shape(v)}, expected ({size},)")
        if self.exact_bandwidth is not None:
            bad = [k for k in self.diagonals if abs(k) > self.exact_bandwidth]
            if bad:
                raise SeqAlgebraError(f"diagonals {bad} exceed exact bandwidth {self.exact_bandwidth}")

    # -- construction -------------------------------------------------
    @classmethod
    def from_generator(cls, gen, window, offsets, **kw):
        n = np.arange(-window, window + 1)
        diags = {int(k): np.asarray(gen(int(k), n), dtype=complex) * np.ones(n.shape) for k in offsets}
        return cls(diags, window, generator=gen, **kw)

    @classmethod
    def identity(cls, window):
        return cls.from_generator(lambda k, n: np.ones(n.shape), window, [0], exact_bandwidth=0)

    @classmethod
    def shift(cls, window, power=1):
        """The shift (T u)(n) = u(n + 1), raised to ``power``: ones on offset ``power``."""
        return cls.from_generator(lambda k, n: np.ones(n.shape), window, [power],
                                  exact_bandwidth=abs(power))

    @classmethod
    def diag(cls, func, window, order=None):
        return cls.from_generator(lambda k, n: func(n), window, [0], exact_bandwidth=0, order=order)

    @classmethod
    def from_dense(cls, mat, window=None, exact_bandwidth=None, atol=0.0):
        """Rows and columns of ``mat`` are indexed by -W..W."""
        mat = np.asarray(mat, dtype=complex)
        size = mat.shape[0]
        if mat.shape != (size, size) or size % 2 == 0:
            raise SeqAlgebraError("dense input must be square with odd size")
        W = (size - 1) // 2 if window is None else window
        diags = {}
        for k in range(-(size - 1), size):
            d = np.zeros(2 * W + 1, dtype=complex)
            n = np.arange(-W, W + 1)
            j = n + k
            ok = (np.abs(n) <= (size - 1) // 2) & (np.abs(j) <= (size - 1) // 2)
            c = (size - 1) // 2
            d[ok] = mat[n[ok] + c, j[ok] + c]
            if np.max(np.abs(d), initial=0.0) > atol:
                diags[k] = d
        if exact_bandwidth is not None:
            diags = {k: v for k, v in diags.items() if abs(k) <= exact_bandwidth}
        return cls(diags, W, exact_bandwidth=exact_bandwidth)

    # -- access ---------------------------------------------------------
    @property
    def offsets(self):
        return sorted(self.diagonals)

    @property
    def bandwidth(self):
        if self.exact_bandwidth is not None:
            return self.exact_bandwidth
        return max((abs(k) for k in self.diagonals), default=0)

    def entry(self, i, j):
        k = j - i
        if abs(i) <= self.window:
            d = self.diagonals.get(k)
            return complex(d[i + self.window]) if d is not None else 0j
        if self.generator is not None and (self.exact_bandwidth is None or abs(k) <= self.exact_bandwidth):
            return complex(np.asarray(self.generator(k, np.array([i])))[0])
        return 0j

    def rows(self, rows, cols):
        """Dense block with the given row and column index arrays."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        out = np.zeros((rows.size, cols.size), dtype=complex)
        inside = np.abs(rows) <= self.window
        for k, d in self.diagonals.items():
            for a, i in enumerate(rows):
                if not inside[a]:
                    continue
                b = i + k - cols[0]
                if 0 <= b < cols.size and cols[b] == i + k:
                    out[a, b] = d[i + self.window]
        if self.generator is not None and not inside.all():
            offsets = self.offsets if self.exact_bandwidth is None else range(-self.exact_bandwidth, self.exact_bandwidth + 1)
            for a, i in enumerate(rows):
                if inside[a]:
                    continue
                for k in offsets:
                    b = i + k - cols[0]
                    if 0 <= b < cols.size:
                        out[a, b] = np.asarray(self.generator(k, np.array([i])))[0]
        return out

    def to_dense(self, window=None):
        W = self.window if window is None else window
        idx = np.arange(-W, W + 1)
        return self.rows(idx, idx)

    def tail_bound(self, N):
        """Certified constant C_N with |a_ij| <= C_N (1+|i-j|)^-N on stored entries."""
        if not 0 <= N <= N_MAX:
            raise SeqAlgebraError(f"certificate only retained for 0 <= N <= {N_MAX}")
        return seminorm(self, N)

    def decay_certificate(self):
        return {N: self.tail_bound(N) for N in range(N_MAX + 1)}

    def decay_fit(self):
        """Least-squares slope of log max_n |a_k(n)| against log(1+|k|)."""
        ks, vals = [], []
        for k, d in self.diagonals.items():
            m = np.max(np.abs(d))
            if m > 0:
                ks.append(abs(k))
                vals.append(m)
        if len(set(ks)) < 2:
            return -np.inf
        x = np.log1p(np.array(ks, dtype=float))
        y = np.log(np.array(vals))
        return float(np.polyfit(x, y, 1)[0])


def seminorm(a: RapidMatrix, N: int) -> float:
    if N < 0:
        raise SeqAlgebraError("N must be non-negative")
    if not a.diagonals:
        raise SeqAlgebraError("no stored entries")
    W = a.window
    n = np.arange(-W, W + 1)
    best = 0.0
    for k, d in a.diagonals.items():
        valid = np.abs(n + k) <= W
        if valid.any():
            best = max(best, float(np.max(np.abs(d[valid]))) * (1 + abs(k)) ** N)
    return best


def multiply(a: RapidMatrix, b: RapidMatrix) -> RapidMatrix:
    if a.window != b.window:
        raise SeqAlgebraError(f"window mismatch {a.window} != {b.window}")
    W = a.window
    n = np.arange(-W, W + 1)
    out = {}
    err = a.truncation_error + b.truncation_error
    bmax = seminorm(b, 0) if b.diagonals else 0.0
    for l, da in a.diagonals.items():
        rows = n + l
        inside = np.abs(rows) <= W
        for lp in b.offsets if b.exact_bandwidth is None else sorted(set(b.offsets)):
            vals = np.zeros(n.size, dtype=complex)
            vals[inside] = b.diagonals[lp][rows[inside] + W]
            if not inside.all():
                if b.generator is not None:
                    vals[~inside] = b.generator(lp, rows[~inside])
                else:
                    missing = np.abs(da[~inside])
                    if missing.size:
                        err = max(err, float(np.max(missing)) * bmax)
            k = l + lp
            if abs(k) > 2 * W:
                continue
            out[k] = out.get(k, 0) + da * vals
    bw = None
    if a.exact_bandwidth is not None and b.exact_bandwidth is not None:
        bw = a.exact_bandwidth + b.exact_bandwidth
        out = {k: v for k, v in out.items() if abs(k) <= bw}
    gen = None
    if a.generator is not None and b.generator is not None and bw is not None:
        ga, gb, ab, bb = a.generator, b.generator, a.exact_bandwidth, b.exact_bandwidth

        def gen(k, rows):
            tot = np.zeros(np.shape(rows), dtype=complex)
            for l in range(-ab, ab + 1):
                if abs(k - l) <= bb:
                    tot = tot + ga(l, rows) * gb(k - l, rows + l)
            return tot
    return RapidMatrix(out, W, exact_bandwidth=bw, generator=gen, truncation_error=err)


def conjugate_shift(a: RapidMatrix, n: int) -> RapidMatrix:
    """T^-n a T^n: entry (i, j) of the result is a_{i+n, j+n}."""
    W = a.window
    if a.generator is not None:
        g = a.generator
        newgen = lambda k, rows: g(k, rows + n)
        offsets = a.offsets if a.exact_bandwidth is None else range(-a.exact_bandwidth, a.exact_bandwidth + 1)
        return RapidMatrix.from_generator(newgen, W, offsets, exact_bandwidth=a.exact_bandwidth, order=a.order)
    Wn = W - abs(n)
    if Wn < 0:
        raise SeqAlgebraError(f"shift {n} exceeds window {W}")
    idx = np.arange(-Wn, Wn + 1) + n + W
    diags = {k: d[idx] for k, d in a.diagonals.items()}
    return RapidMatrix(diags, Wn, exact_bandwidth=a.exact_bandwidth, order=a.order,
                       truncation_error=a.truncation_error, meta={"window_shrink": abs(n)})


def _sv_tall(a, W, margin):
    rows = np.arange(-W, W + 1)
    cols = np.arange(-(W - margin), W - margin + 1)
    tall = a.rows(rows, cols)
    return tall, rows, cols, np.linalg.svd(tall, compute_uv=False)


def invert(a: RapidMatrix, tol: float = 1e-8) -> RapidMatrix:
    """Inverse via the least-squares left inverse of a tall compression.

    Columns -Wc..Wc are mapped into all rows they touch (-W..W), so the
    compression is bounded below by the same constant as ``a`` itself;
    square finite sections of e.g. ``T - c`` are not.
    """
    W = a.window
    margin = a.bandwidth if a.exact_bandwidth is not None else max(W // 4, 1)
    if 2 * margin >= W:
        raise SeqAlgebraError(f"window {W} too small for bandwidth {margin}")
    tall, rows, cols, sv = _sv_tall(a, W, margin)
    smin, smax = sv[-1], sv[0]
    if smax == 0 or smin <= 1e-8 * smax:
        raise SingularError(f"smallest singular value {smin:.3e} below threshold", smin)
    Wh = (W + margin) // 2
    if Wh - margin > 0:
        sv_half = _sv_tall(RapidMatrix({k: d[W - Wh:W + Wh + 1] for k, d in a.diagonals.items()}, Wh,
                                       exact_bandwidth=a.exact_bandwidth), Wh, margin)[3]
        if smin < 0.75 * sv_half[-1]:
            raise SingularError(
                f"smallest singular value unstable under window doubling "
                f"({sv_half[-1]:.3e} -> {smin:.3e})", smin)
    left = np.linalg.pinv(tall)  # rows: cols of a, cols: rows of a
    Wc = W - margin
    n = np.arange(-Wc, Wc + 1)
    diags = {}
    for k in range(-W - Wc, W + Wc + 1):
        j = n + k
        ok = np.abs(j) <= W
        if not ok.any():
            continue
        d = np.zeros(n.size, dtype=complex)
        d[ok] = left[n[ok] + Wc, j[ok] + W]
        diags[k] = d
    scale = max(np.max(np.abs(d)) for d in diags.values())
    outer = max((np.max(np.abs(d)) for k, d in diags.items() if abs(k) > Wc // 2), default=0.0)
    if outer > 1e-6 * scale:
        raise DecayError(f"inverse off-diagonals do not decay (outer/max = {outer / scale:.2e})")
    diags = {k: d for k, d in diags.items() if np.max(np.abs(d)) > 1e-18 * scale}
    r = RapidMatrix(diags, Wc)
    res = inverse_residual(a, r)
    if res > tol:
        raise SingularError(f"inverse residual {res:.2e} exceeds tol {tol:.1e}", smin)
    return RapidMatrix(diags, Wc, truncation_error=res, meta={"smallest_sv": float(smin), "residual": res})


def inverse_residual(a, r):
    """max of ||a r - 1|| and ||r a - 1|| on the inner half window of ``r``."""
    Wc = r.window
    Wh = Wc // 2
    inner = np.arange(-Wh, Wh + 1)
    big = np.arange(-a.window, a.window + 1)
    mid = np.arange(-Wc, Wc + 1)
    ar = a.rows(inner, mid) @ r.rows(mid, inner)
    ra = r.rows(inner, big) @ a.rows(big, inner)
    eye = np.eye(inner.size)
    return float(max(np.linalg.norm(ar - eye, 2), np.linalg.norm(ra - eye, 2)))


@dataclass(frozen=True)
class WeightedMeasure:
    s: float
    R: float = 1.0

    def __post_init__(self):
        if self.R < 1:
            raise SeqAlgebraError("R must be >= 1")

    def weight(self, n):
        return (np.asarray(n, dtype=float) ** 2 + self.R ** 2) ** self.s

    @classmethod
    def orbit(cls, xi, tau, s):
        """mu_{xi,tau,s}(n) = (xi^2 + tau^2 + n^2)^s, i.e. R^2 = xi^2 + tau^2."""
        return cls(s, float(np.hypot(xi, tau)))


@dataclass(frozen=True)
class RFamily:
    sampler: Callable
    declared_order: int
    prefactor_exponent: int = 0


def weighted_norm(mat, W, s, k, R):
    """Operator norm l^2(mu_{s,R}) -> l^2(mu_{s-k,R}) of a dense window matrix."""
    n = np.arange(-W, W + 1)
    w_dom = WeightedMeasure(s, R).weight(n) ** 0.5
    w_cod = WeightedMeasure(s - k, R).weight(n) ** 0.5
    return float(np.linalg.norm(w_cod[:, None] * mat / w_dom[None, :], 2))


def family_norms(f: RFamily, s, k, R_grid):
    out = []
    for R in R_grid:
        if R < 1:
            raise SeqAlgebraError("R grid must lie in [1, inf)")
        a = f.sampler(R)
        mat = a.to_dense() if isinstance(a, RapidMatrix) else np.asarray(a)
        W = (mat.shape[0] - 1) // 2
        out.append(weighted_norm(mat, W, s, k, R) / R ** f.prefactor_exponent)
    return np.array(out)


def family_order_norm(f: RFamily, s: float, k: int, R_grid: Sequence[float]) -> float:
    if len(R_grid) == 0:
        raise SeqAlgebraError("empty R grid")
    return float(np.max(family_norms(f, s, k, R_grid)))


def diagonal_order(a: RapidMatrix):
    """Power-law exponent of |a_nn| in n, fitted on the outer half of the window."""
    if a.order is not None:
        return float(a.order)
    d = a.diagonals.get(0)
    if d is None:
        return -np.inf
    W = a.window
    n = np.arange(-W, W + 1)
    sel = (np.abs(n) >= max(W // 2, 1)) & (np.abs(d) > 0)
    if sel.sum() < 2:
        return -np.inf
    return float(np.polyfit(np.log1p(np.abs(n[sel])), np.log(np.abs(d[sel])), 1)[0])


def weighted_trace(a: RapidMatrix):
    """Sum of the diagonal with a tail bound; returns ``(value, error_bar)``."""
    m = diagonal_order(a)
    if not m < -1:
        raise NonSummableError(f"diagonal order {m:.3g} is not < -1")
    d = a.diagonals.get(0)
    if d is None:
        return 0j, 0.0
    W = a.window
    order = canonical_order(W)
    total = 0j
    for n in order:
        total += d[n + W]
    if np.isinf(m):
        return total, 0.0
    n = np.arange(-W, W + 1)
    outer = np.abs(n) >= W // 2
    C = float(np.max(np.abs(d[outer]) * (1 + np.abs(n[outer])) ** (-m)))
    tail = 2 * C * (1 + W) ** (m + 1) / (-m - 1)
    return total, tail


def shift_weight_ratio(n, k, R):
    n = np.asarray(n, dtype=float)
    return ((n + k) ** 2 + R ** 2) / ((n ** 2 + R ** 2) * (1 + k ** 2))


def shift_weight_sup(n_max=10_000, R_values=range(1, 65), k_values=range(-32, 33)):
    """sup of ((n+k)^2+R^2) / ((n^2+R^2)(1+k^2)) over integer n in [-n_max, n_max]."""
    n = np.arange(-n_max, n_max + 1, dtype=float)
    best = 0.0
    for R in R_values:
        for k in k_values:
            best = max(best, float(np.max(shift_weight_ratio(n, k, R))))
    return best
