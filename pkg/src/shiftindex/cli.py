"""Command line front end.

    shiftindex verify --config run.json [--suite NAME] [--serial|--parallel] [--out DIR]
    shiftindex sweep  --config run.json --param {R,N,W} [--out DIR]

Exit status: 0 pass, 1 fail, 2 inconclusive, 64 configuration error.
The thread count for ``--parallel`` is read from SHIFTINDEX_THREADS.
"""
from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import platform
import sys
import time

import jsonschema
import numpy as np

from . import gallery, suites
from .analytic import ShiftOperator, Term, index_svd
from .geometry import FlatModel, TrigPolynomial
from .quadrature import cosphere_circle
from .topo import THREADS_ENV, ind_t, thread_count
from .uniformization import OrbitSymbol, mapping_torus, sweep_csv

log = logging.getLogger("shiftindex")

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_CONFIG = 0, 1, 2, 64

_num = {"type": "number"}
_int_list = {"type": "array", "items": {"type": "integer", "minimum": 1}}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "example": {"type": "string"},
        "expected_index": {"type": "integer"},
        "model": {
            "type": "object", "additionalProperties": False, "required": ["dim", "theta"],
            "properties": {"dim": {"enum": [1, 2]}, "theta": {"type": "array", "items": _num, "minItems": 1,
                                                                  "maxItems": 2}},
        },
        "operator": {
            "type": "object", "additionalProperties": False, "required": ["terms"],
            "properties": {
                "name": {"type": "string"},
                "order": {"enum": [0, 1]},
                "s": _num,
                "window": {"type": "integer", "minimum": 0},
                "terms": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "additionalProperties": False, "required": ["k", "coeff"],
                    "properties": {
                        "k": {"type": "integer"},
                        "factor": {"enum": ["1", "xi", "xi1", "xi2", "abs", "abs+", "abs-", "P+", "P-", "riesz"]},
                        "coeff": {"type": "array", "minItems": 1, "items": {
                            "type": "array", "minItems": 3, "maxItems": 3,
                            "prefixItems": [{"oneOf": [{"type": "integer"},
                                                       {"type": "array", "items": {"type": "integer"}}]},
                                            _num, _num]}},
                    }}},
            },
        },
        "suites": {"type": "array", "items": {"enum": list(suites.SUITES)}, "uniqueItems": True},
        "numeric": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "N_list": {**_int_list, "minItems": 3},
                "N_list_2d": {**_int_list, "minItems": 3},
                "N_reg": {"type": "integer", "minimum": 8},
                "W": {"type": ["integer", "null"], "minimum": 0},
                "R_grid": {"type": "array", "items": {"type": "number", "minimum": 1}},
                "eps_rel": {"type": "number", "exclusiveMinimum": 0},
                "grid": {"type": "object", "additionalProperties": False, "properties": {
                    "n_x": {"type": "integer", "minimum": 4},
                    "n_x2": {"type": "integer", "minimum": 4},
                    "n_phi2": {"type": "integer", "minimum": 4},
                    "cylinder": {**_int_list, "minItems": 3, "maxItems": 3},
                    "mapping_torus": {**_int_list, "minItems": 3, "maxItems": 3}}},
                "tolerances": {"type": "object", "additionalProperties": False, "properties": {
                    k: {"type": "number", "exclusiveMinimum": 0}
                    for k in suites.DEFAULTS["tolerances"]}},
            },
        },
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string"}, "report": {"type": "string"}}},
    },
    "oneOf": [{"required": ["example"], "not": {"required": ["operator"]}},
              {"required": ["operator", "model"], "not": {"required": ["example"]}}],
}


class ConfigError(ValueError):
    pass


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return validate_config(cfg, path)


def validate_config(cfg, source="<config>"):
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{source}: field {where}: {e.message}")
    if "example" in cfg and cfg["example"] not in gallery.REGISTRY:
        raise ConfigError(f"{source}: field example: unknown gallery example {cfg['example']!r}")
    cfg = dict(cfg)
    cfg["numeric"] = _merge(suites.DEFAULTS, cfg.get("numeric", {}))
    cfg.setdefault("suites", list(suites.SUITES))
    cfg.setdefault("output", {})
    if "model" in cfg and len(cfg["model"]["theta"]) != cfg["model"]["dim"]:
        raise ConfigError(f"{source}: field model/theta: need one entry per circle factor")
    return cfg


def build_example(cfg):
    if "example" in cfg:
        ex = gallery.get(cfg["example"])
        if "expected_index" in cfg:
            ex.expected = cfg["expected_index"]
        return ex
    mdl = FlatModel(cfg["model"]["dim"], tuple(cfg["model"]["theta"]))
    op = cfg["operator"]
    terms = []
    for t in op["terms"]:
        tp = TrigPolynomial(tuple(((f,) if isinstance(f, int) else tuple(f), complex(re, im))
                                  for f, re, im in t["coeff"]))
        terms.append(Term(int(t["k"]), tp, t.get("factor", "1")))
    try:
        D = ShiftOperator(mdl, terms, op.get("order", 0), op.get("name", "custom"))
    except ValueError as e:
        raise ConfigError(f"field operator: {e}") from None
    coupled = any(t.k != 0 for t in terms)
    ex = gallery.Example(D.name, D, cfg.get("expected_index"), "from config", op.get("s", float(D.order)),
                         op.get("window", 10 if coupled else 0), coupled)
    if ex.expected is None:
        # without an oracle the analytic index is the reference
        ex.expected = suites.run_analytic(gallery.Example(D.name, D, 0, s=ex.s), cfg["numeric"])["index"]
    return ex


def environment():
    import scipy
    import sympy
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "sympy": sympy.__version__}


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (complex, np.complexfloating)):
        return [float(o.real), float(o.imag)]
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if np.isfinite(f) else repr(f)
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    return o


def dumps(obj):
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def run(cfg, suite=None, parallel=False, out_dir=None):
    """Execute suites; returns (report, timings, exit status)."""
    ex = build_example(cfg)
    numeric = cfg["numeric"]
    names = [suite] if suite else cfg["suites"]
    results, timings = {}, {}
    for name in names:
        t0 = time.perf_counter()
        fn = suites.SUITES[name]
        try:
            if name in ("topological", "uniformization"):
                results[name] = fn(ex, numeric, parallel=parallel)
            else:
                results[name] = fn(ex, numeric)
        except (ValueError, np.linalg.LinAlgError) as e:
            log.warning("suite %s failed numerically: %s", name, e)
            results[name] = {"status": "inconclusive", "error": str(e)}
        timings[name] = time.perf_counter() - t0
    status = [r["status"] for r in results.values()]
    code = EXIT_FAIL if "fail" in status else EXIT_INCONCLUSIVE if "inconclusive" in status else EXIT_PASS
    report = {"example": ex.name, "expected_index": ex.expected, "config": cfg, "environment": environment(),
              "mode": "parallel" if parallel else "serial", "results": results,
              "failed": [n for n, r in results.items() if r["status"] == "fail"],
              "inconclusive": [n for n, r in results.items() if r["status"] == "inconclusive"],
              "exit_status": code, "timings_file": "timings.json"}
    if parallel:
        report["threads"] = thread_count()
    return report, timings, code


def sweep(cfg, param):
    ex = build_example(cfg)
    numeric = cfg["numeric"]
    rows = []
    if param == "R":
        if ex.operator is None or ex.model.dim != 1:
            raise ConfigError("R sweeps need an operator on T^1")
        orb = OrbitSymbol(ex.symbol())
        W = max(suites.window(ex, numeric) // 2 + 1, 3) if ex.coupled else 1
        sizes = tuple(numeric["grid"]["mapping_torus"])
        for R in numeric["R_grid"]:
            cyc = mapping_torus(R, *sizes)
            v = orb.chain_value(R, cyc, W)
            e = orb.exact_value(R, cyc, W + 2)
            rows.append((R, v, abs(v - e)))
    elif param == "N":
        if ex.operator is None:
            raise ConfigError("N sweeps need an operator")
        res = index_svd(ex.operator, ex.s, suites.mode_list(ex.model, numeric), numeric["eps_rel"])
        for r in res.table:
            rows.append((r["N"], r["index"], 1.0 / r["gap"] if r["gap"] > 0 else float("inf")))
    elif param == "W":
        if ex.operator is None:
            raise ConfigError("W sweeps need an operator")
        sigma = ex.symbol()
        cyc = suites.cosphere_cycle(sigma.model, numeric)
        prev = None
        for W in ([8, 16, 32, 64, 128] if sigma.bandwidth else [0]):
            v = ind_t(sigma, cyc, W=W).value
            rows.append((W, v, abs(v - prev) if prev is not None else float("nan")))
            prev = v
    else:
        raise ConfigError(f"unknown sweep parameter {param!r}")
    return sweep_csv(rows)


def main(argv=None):
    p = argparse.ArgumentParser(prog="shiftindex", description="verify the index formula for operators with shifts")
    sub = p.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("verify", help="run verification suites")
    v.add_argument("--config", required=True)
    v.add_argument("--suite", choices=list(suites.SUITES))
    mode = v.add_mutually_exclusive_group()
    mode.add_argument("--serial", action="store_true")
    mode.add_argument("--parallel", action="store_true")
    v.add_argument("--out")
    s = sub.add_parser("sweep", help="emit a CSV parameter sweep")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True, choices=["R", "N", "W"])
    s.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        out_dir = args.out or cfg["output"].get("dir", "out")
        os.makedirs(out_dir, exist_ok=True)
        if args.cmd == "verify":
            report, timings, code = run(cfg, args.suite, args.parallel, out_dir)
            name = cfg["output"].get("report", "report.json")
            with open(os.path.join(out_dir, name), "w") as fh:
                fh.write(dumps(report))
            with open(os.path.join(out_dir, "timings.json"), "w") as fh:
                fh.write(dumps(timings))
            for k, r in report["results"].items():
                print(f"{k}: {r['status']}")
            return code
        text = sweep(cfg, args.param)
        path = os.path.join(out_dir, f"sweep_{args.param}.csv")
        with open(path, "w") as fh:
            fh.write(text)
        print(path)
        return EXIT_PASS
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
