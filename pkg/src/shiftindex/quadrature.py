"""Quadrature grids on the cosphere bundles used by the cycle traces.

Each grid is a chart ``(chart coords) -> (ambient coords)`` sampled at tensor
product nodes, with the chart Jacobian and an orientation sign per node.

Orientation convention: the total space T*M (x R^2_{t,tau}) is oriented by
dx ^ dxi (^ dt ^ dtau) -- for T^2 by dx1 ^ dxi1 ^ dx2 ^ dxi2 -- and every
sphere bundle carries the outward-normal-first boundary orientation of its
ball bundle.  For the Bott circle this is the counterclockwise orientation
in the (t, tau) plane, which gives the Bott symbol t + i tau index +1.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np


def trapezoid(n, a=0.0, b=2 * np.pi):
    h = (b - a) / n
    return a + h * np.arange(n), np.full(n, h)


def gauss_legendre(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def split_gauss(n, breaks):
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(n, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


@dataclass(frozen=True)
class Cycle:
    name: str
    chart: tuple
    ambient_names: tuple
    weights: np.ndarray
    ambient: dict
    jac: np.ndarray  # (P, n_ambient, n_chart)
    orientation: np.ndarray
    sizes: dict
    builder: Callable = None
    todd: object = None

    @property
    def dim(self):
        return len(self.chart)

    @property
    def size(self):
        return self.weights.size

    def refined(self, factor=2):
        return self.builder(**{k: v * factor if k.startswith("n_") else v for k, v in self.sizes.items()})

    def coarsened(self, factor=2):
        return self.builder(**{k: max(v // factor, 2) if k.startswith("n_") else v for k, v in self.sizes.items()})

    def chunk(self, sl):
        return {n: v[sl] for n, v in self.ambient.items()}, self.jac[sl], self.weights[sl] * self.orientation[sl]

    def with_todd(self, todd):
        return replace(self, todd=todd)


def _tensor(*axes):
    grids = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wts = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    w = np.ones_like(grids[0])
    for g in wts:
        w = w * g
    return [g.ravel() for g in grids], w.ravel()


def cosphere_circle(n_x=256):
    """S*T^1 = T^1 x {xi = +1, -1}; the xi = +1 sheet is oriented by -dx."""
    (x, xi), w = _tensor(trapezoid(n_x), (np.array([1.0, -1.0]), np.ones(2)))
    P = x.size
    jac = np.zeros((P, 2, 1))
    jac[:, 0, 0] = 1.0
    return Cycle("cosphere_T1", ("x",), ("x", "xi"), w, {"x": x, "xi": xi}, jac, -np.sign(xi),
                 {"n_x": n_x}, cosphere_circle)


def bott_circle(n_psi=64):
    """Unit circle in the (t, tau) plane, counterclockwise."""
    psi, w = trapezoid(n_psi)
    jac = np.zeros((psi.size, 2, 1))
    jac[:, 0, 0] = -np.sin(psi)
    jac[:, 1, 0] = np.cos(psi)
    return Cycle("bott_circle", ("psi",), ("t", "tau"), w, {"t": np.cos(psi), "tau": np.sin(psi)}, jac,
                 np.ones(psi.size), {"n_psi": n_psi}, bott_circle)


def cylinder_sphere(n_x=32, n_beta=12, n_phi=4):
    """S(T*T^1 x R^2) = T^1 x S^2 with xi = cos(beta), (t, tau) = sin(beta) (cos phi, sin phi).

    beta is split at the equator xi = 0, where order-normalized symbols have a
    kink.  The chart (x, beta, phi) is negatively oriented.
    """
    (x, beta, phi), w = _tensor(trapezoid(n_x), split_gauss(n_beta, [0, np.pi / 2, np.pi]), trapezoid(n_phi))
    sb, cb, sp_, cp = np.sin(beta), np.cos(beta), np.sin(phi), np.cos(phi)
    amb = {"x": x, "xi": cb, "t": sb * cp, "tau": sb * sp_}
    jac = np.zeros((x.size, 4, 3))
    jac[:, 0, 0] = 1.0
    jac[:, 1, 1] = -sb
    jac[:, 2, 1] = cb * cp
    jac[:, 2, 2] = -sb * sp_
    jac[:, 3, 1] = cb * sp_
    jac[:, 3, 2] = sb * cp
    return Cycle("cylinder_T1", ("x", "beta", "phi"), ("x", "xi", "t", "tau"), w, amb, jac,
                 -np.ones(x.size), {"n_x": n_x, "n_beta": n_beta, "n_phi": n_phi}, cylinder_sphere)


def cosphere_torus2(n_x=24, n_phi=24):
    """S*T^2 = T^2 x S^1 with xi = (cos phi, sin phi); chart (x1, x2, phi) negatively oriented."""
    (x1, x2, phi), w = _tensor(trapezoid(n_x), trapezoid(n_x), trapezoid(n_phi))
    amb = {"x1": x1, "x2": x2, "xi1": np.cos(phi), "xi2": np.sin(phi)}
    jac = np.zeros((x1.size, 4, 3))
    jac[:, 0, 0] = 1.0
    jac[:, 1, 1] = 1.0
    jac[:, 2, 2] = -np.sin(phi)
    jac[:, 3, 2] = np.cos(phi)
    return Cycle("cosphere_T2", ("x1", "x2", "phi"), ("x1", "x2", "xi1", "xi2"), w, amb, jac,
                 -np.ones(x1.size), {"n_x": n_x, "n_phi": n_phi}, cosphere_torus2)


def mapping_torus(t_scale=1.0, n_x=24, n_u=32, n_psi=12):
    """Unit cosphere bundle of the mapping torus, unrolled along the orbit.

    Chart (x, u, psi) with t = t_scale * tan(u) over the whole line and
    (xi, tau) = (cos psi, sin psi); psi is split where xi = 0.  The sum over
    the l^2(Z) fibre index has been traded for the t-line using Z-invariance
    of the integrand, so only (0,0) entries are ever integrated.
    """
    (x, u, psi), w = _tensor(trapezoid(n_x), gauss_legendre(n_u, -np.pi / 2, np.pi / 2),
                             split_gauss(n_psi, [-np.pi / 2, np.pi / 2, 3 * np.pi / 2]))
    amb = {"x": x, "xi": np.cos(psi), "t": t_scale * np.tan(u), "tau": np.sin(psi)}
    jac = np.zeros((x.size, 4, 3))
    jac[:, 0, 0] = 1.0
    jac[:, 2, 1] = t_scale / np.cos(u) ** 2
    jac[:, 1, 2] = -np.sin(psi)
    jac[:, 3, 2] = np.cos(psi)
    return Cycle("mapping_torus", ("x", "u", "psi"), ("x", "xi", "t", "tau"), w, amb, jac,
                 -np.ones(x.size), {"t_scale": t_scale, "n_x": n_x, "n_u": n_u, "n_psi": n_psi}, mapping_torus)
