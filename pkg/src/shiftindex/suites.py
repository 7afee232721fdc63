"""Verification suites shared by the command line and the tests.

Each suite returns a dict with a ``status`` in {"pass", "fail", "inconclusive"}
and only JSON-serializable values.
"""
from __future__ import annotations

import numpy as np
import sympy as sp

from . import gallery
from .analytic import index_regularizer, index_svd
from .geometry import SymbolField, check_ellipticity, exact_differential, linear_path, z_invariance_defect
from .quadrature import bott_circle, cosphere_circle, cosphere_torus2, cylinder_sphere, mapping_torus
from .topo import bott_symbol, external_product, ind_t
from .uniformization import OrbitSymbol, ind_t_mapping_torus

DEFAULTS = {
    "N_list": [32, 64, 128, 256],
    "N_list_2d": [6, 8, 12, 16],  # modes per direction on T^2
    "N_reg": 256,
    "W": None,
    "R_grid": [1, 2, 4, 8, 16, 32, 64],
    "eps_rel": 1e-6,
    "grid": {"n_x": 256, "n_x2": 24, "n_phi2": 24, "cylinder": [32, 12, 4], "mapping_torus": [16, 24, 24]},
    "tolerances": {"integrality": 1e-6, "multiplicativity": 1e-6, "chain": 1e-6, "rate": 0.3, "bott": 1e-10},
}


def _status(ok, inconclusive=False):
    if inconclusive:
        return "inconclusive"
    return "pass" if ok else "fail"


def _c(v):
    v = complex(v)
    return [v.real, v.imag]


def cosphere_cycle(model, numeric):
    g = numeric["grid"]
    if model.dim == 1:
        return cosphere_circle(g["n_x"])
    return cosphere_torus2(g["n_x2"], g["n_phi2"])


def window(example, numeric):
    return numeric["W"] if numeric["W"] is not None else example.window


def mode_list(model, numeric):
    return tuple(numeric["N_list"] if model.dim == 1 else numeric["N_list_2d"])


def run_analytic(example, numeric):
    D = example.operator
    if D is None:
        return {"status": "pass", "skipped": "no operator for the Bott symbol"}
    sv = index_svd(D, example.s, mode_list(D.model, numeric), numeric["eps_rel"])
    out = {"svd": sv.to_dict()}
    if D.model.dim == 1:
        rg = index_regularizer(D, N=numeric["N_reg"], W=max(window(example, numeric), 16))
        out["regularizer"] = rg.to_dict()
        ref = rg.index
    else:
        ref = sv.index if sv.status == "ok" else None
    out["index"] = ref
    if ref is None:
        out["status"] = "inconclusive"
    else:
        agree = sv.index is None or sv.index == ref
        out["svd_agrees"] = bool(agree)
        out["status"] = _status(agree and ref == example.expected)
    return out


def run_topological(example, numeric, parallel=False):
    tol = numeric["tolerances"]
    if example.operator is None:
        r = ind_t(bott_symbol(example.model), bott_circle(64), parallel=parallel)
        return {"ind_t": r.to_dict(), "status": _status(abs(r.value - 1) < tol["bott"])}
    sigma = example.symbol()
    r = ind_t(sigma, cosphere_cycle(sigma.model, numeric), W=window(example, numeric), parallel=parallel,
              error=True)
    ok = r.residual < tol["integrality"] and r.nearest == example.expected
    return {"ind_t": r.to_dict(), "status": _status(ok)}


def run_uniformization(example, numeric, parallel=False, chain=True):
    tol = numeric["tolerances"]
    if example.operator is None or example.model.dim != 1:
        return {"status": "pass", "skipped": "mapping-torus chain is implemented on T^1"}
    sigma = example.symbol()
    W = window(example, numeric)
    cyl = external_product(sigma)
    base = ind_t(sigma, cosphere_circle(numeric["grid"]["n_x"]), W=W, parallel=parallel).value
    prod = ind_t(cyl, cylinder_sphere(*numeric["grid"]["cylinder"]), W=W, parallel=parallel).value
    out = {"ind_t": _c(base), "ind_t_product": _c(prod),
           "multiplicativity_defect": abs(prod - base)}
    ok = out["multiplicativity_defect"] < tol["multiplicativity"]
    if chain and numeric["R_grid"]:
        Wm = max(W // 2 + 1, 3) if example.coupled else 1
        rep = ind_t_mapping_torus(OrbitSymbol(sigma), tuple(numeric["R_grid"]), W=Wm,
                                  sizes=tuple(numeric["grid"]["mapping_torus"]), target=prod.real,
                                  tol=tol["chain"])
        out["mapping_torus"] = rep
        ok = ok and rep["limit_error"] < tol["chain"]
        if rep.get("rate") is not None:
            out["rate_within_tolerance"] = bool(abs(rep["rate"] + 1) <= tol["rate"])
            ok = ok and out["rate_within_tolerance"]
    out["status"] = _status(ok)
    return out


def run_properties(example, numeric):
    if example.operator is None:
        s = bott_symbol(example.model)
        pts = {"x": np.zeros(4), "xi": np.zeros(4), "t": np.cos(np.arange(4.0)), "tau": np.sin(np.arange(4.0))}
        return {"z_invariance": z_invariance_defect(s, pts, W=2), "status": "pass"}
    sigma = example.symbol()
    cyc = cosphere_cycle(sigma.model, numeric)
    sub = slice(0, cyc.size, max(cyc.size // 16, 1))
    pts = {n: v[sub] for n, v in cyc.ambient.items()}
    zi = z_invariance_defect(sigma, pts, W=4)
    dd = exact_differential(exact_differential(sigma)).max_abs(pts, W=2)
    W = window(example, numeric)
    v1 = ind_t(sigma, cyc, W=W).value
    v2 = ind_t(sigma, cyc.refined(), W=2 * W).value
    out = {"z_invariance": zi, "d_squared": dd, "stability": abs(v2 - v1)}
    out["status"] = _status(zi < 1e-12 and dd < 1e-13 and out["stability"] < 1e-8)
    return out


SUITES = {"analytic": run_analytic, "topological": run_topological, "uniformization": run_uniformization,
          "properties": run_properties}


def homotopy_path(s0: SymbolField, s1: SymbolField, cycle, steps=16, W=10, bound=1e6):
    """ind_t along the linear path; each step is checked for ellipticity first."""
    vals = []
    sub = slice(0, cycle.size, max(cycle.size // 64, 1))
    pts = {n: v[sub] for n, v in cycle.ambient.items()}
    for lam in np.linspace(0.0, 1.0, steps):
        s = linear_path(s0, s1, sp.Float(lam, 17))
        rep = check_ellipticity(s, pts, bound, W=max(2 * W, 8))
        if not rep.passed:
            return {"elliptic": False, "failed_at": float(lam), "values": vals}
        vals.append(ind_t(s, cycle, W=W, check=False).value)
    vals = np.array(vals)
    return {"elliptic": True, "values": [_c(v) for v in vals], "spread": float(np.max(np.abs(vals - vals[0])))}
