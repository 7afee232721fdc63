import csv
import json
import os

import numpy as np
import pytest

from shiftindex import cli

FAST = {"R_grid": [1, 2, 4], "grid": {"mapping_torus": [8, 16, 16]}}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    return str(p)


def verify(tmp_path, cfg, *extra, out="out"):
    code = cli.main(["verify", "--config", write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])
    rep = tmp_path / out / "report.json"
    return code, (json.loads(rep.read_text()) if rep.exists() else None)


def test_identity_all_suites(tmp_path):
    code, rep = verify(tmp_path, {"example": "identity", "numeric": FAST})
    assert code == cli.EXIT_PASS
    assert set(rep["results"]) == {"analytic", "topological", "uniformization", "properties"}
    assert rep["results"]["analytic"]["index"] == 0
    assert rep["results"]["topological"]["ind_t"]["nearest"] == 0
    assert (tmp_path / "out" / "timings.json").exists()


def test_bott(tmp_path):
    code, rep = verify(tmp_path, {"example": "bott"}, "--suite", "topological")
    assert code == 0
    v = rep["results"]["topological"]["ind_t"]["value"]
    assert abs(complex(*v) - 1) < 1e-10


def test_winding_2_chain_closure(tmp_path):
    code, rep = verify(tmp_path, {"example": "winding_2", "numeric": FAST})
    assert code == 0
    r = rep["results"]
    assert r["analytic"]["index"] == -2
    assert abs(complex(*r["uniformization"]["ind_t"]) + 2) < 1e-6
    assert r["uniformization"]["mapping_torus"]["limit_error"] < 1e-6


def test_wrong_expected_index_fails(tmp_path):
    code, rep = verify(tmp_path, {"example": "winding_1", "expected_index": 3}, "--suite", "analytic")
    assert code == cli.EXIT_FAIL and rep["failed"] == ["analytic"]


def test_non_elliptic_is_inconclusive(tmp_path):
    cfg = {"model": {"dim": 1, "theta": [0.618]}, "expected_index": 0,
           "operator": {"terms": [{"k": 0, "coeff": [[0, 1, 0]]}, {"k": 1, "coeff": [[1, 1, 0]]}]}}
    code, rep = verify(tmp_path, cfg, "--suite", "topological")
    assert code == cli.EXIT_INCONCLUSIVE and rep["inconclusive"] == ["topological"]


def test_custom_operator(tmp_path):
    cfg = {"model": {"dim": 1, "theta": [0.3819660112501051]}, "expected_index": -1,
           "operator": {"name": "custom", "window": 10, "terms": [
               {"k": 0, "coeff": [[1, 1, 0]], "factor": "P+"},
               {"k": 1, "coeff": [[1, 0.2, 0.1]], "factor": "P+"},
               {"k": 0, "coeff": [[0, 1, 0]], "factor": "P-"}]}}
    for suite in ("analytic", "topological"):
        code, rep = verify(tmp_path, cfg, "--suite", suite)
        assert code == 0, rep


@pytest.mark.parametrize("cfg, needle", [
    ({"example": "identity", "colour": 1}, "colour"),
    ({"example": "nope"}, "unknown gallery example"),
    ({"example": "identity", "numeric": {"N_list": [8, 16]}}, "N_list"),
    ({"example": "identity", "numeric": {"tolerances": {"speed": 1}}}, "speed"),
    ({"model": {"dim": 1, "theta": [0.1, 0.2]}, "operator": {"terms": [{"k": 0, "coeff": [[0, 1, 0]]}]}}, "theta"),
    ({"example": "identity", "operator": {"terms": []}}, "<root>"),
    ({"model": {"dim": 1, "theta": [0.1]}, "operator": {"terms": [{"k": 0, "coeff": [[0, 1, 0]], "factor": "xi"}]}},
     "order"),
])
def test_config_errors(tmp_path, capsys, cfg, needle):
    code = cli.main(["verify", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")])
    assert code == cli.EXIT_CONFIG
    assert needle in capsys.readouterr().err


def test_json_syntax_error_has_line(tmp_path, capsys):
    code = cli.main(["verify", "--config", write(tmp_path, '{\n  "example": "identity",\n  oops\n}')])
    assert code == cli.EXIT_CONFIG
    assert ":3:" in capsys.readouterr().err


def test_missing_config(tmp_path):
    assert cli.main(["verify", "--config", str(tmp_path / "absent.json")]) == cli.EXIT_CONFIG


def test_defaults_and_precedence():
    cfg = cli.validate_config({"example": "identity", "numeric": {"grid": {"n_x": 64}}})
    assert cfg["numeric"]["grid"]["n_x"] == 64
    assert cfg["numeric"]["grid"]["cylinder"] == [32, 12, 4]
    assert cfg["numeric"]["R_grid"] == [1, 2, 4, 8, 16, 32, 64]
    assert cfg["suites"] == ["analytic", "topological", "uniformization", "properties"]


def test_serial_reruns_byte_identical(tmp_path):
    cfg = {"example": "shift_winding", "suites": ["analytic", "topological", "properties"]}
    verify(tmp_path, cfg, "--serial", out="a")
    verify(tmp_path, cfg, "--serial", out="b")
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def _numbers(obj):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _numbers(obj[k])
    elif isinstance(obj, list):
        for v in obj:
            yield from _numbers(v)
    elif isinstance(obj, float):
        yield obj


def test_parallel_matches_serial(tmp_path, monkeypatch):
    monkeypatch.setenv("SHIFTINDEX_THREADS", "4")
    cfg = {"example": "shift_winding", "suites": ["topological"]}
    _, a = verify(tmp_path, cfg, "--serial", out="s")
    _, b = verify(tmp_path, cfg, "--parallel", out="p")
    assert b["threads"] == 4 and b["mode"] == "parallel"
    ra, rb = a["results"], b["results"]
    na, nb = np.array(list(_numbers(ra))), np.array(list(_numbers(rb)))
    assert na.shape == nb.shape and np.max(np.abs(na - nb)) < 1e-12


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sweep_N(tmp_path):
    code = cli.main(["sweep", "--config", write(tmp_path, {"example": "winding_2"}), "--param", "N",
                     "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "sweep_N.csv")
    assert code == 0 and list(rows[0]) == ["param", "value_re", "value_im", "err"]
    assert [float(r["value_re"]) for r in rows] == [-2.0] * 4


def test_sweep_W(tmp_path):
    cli.main(["sweep", "--config", write(tmp_path, {"example": "coupled_invertible"}), "--param", "W",
              "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "sweep_W.csv")
    for r in rows:
        if float(r["param"]) > 64:
            assert float(r["err"]) < 1e-10


def test_sweep_R(tmp_path):
    cfg = {"example": "winding_1", "numeric": FAST}
    cli.main(["sweep", "--config", write(tmp_path, cfg), "--param", "R", "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "sweep_R.csv")
    v = [float(r["value_re"]) for r in rows]
    assert [float(r["param"]) for r in rows] == [1, 2, 4]
    assert max(abs(x + 1) for x in v) < 1e-6


def test_sweep_R_needs_operator(tmp_path):
    assert cli.main(["sweep", "--config", write(tmp_path, {"example": "bott"}), "--param", "R",
                     "--out", str(tmp_path)]) == cli.EXIT_CONFIG
