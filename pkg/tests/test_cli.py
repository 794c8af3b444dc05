from __future__ import annotations

import csv
import json

import pytest

from isodyn.cli import main


def _run(tmp_path, *args, name="out.csv", capsys=None):
    out = tmp_path / name
    code = main([*args, "--out", str(out)])
    return code, out


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_star_check_agreement(tmp_path):
    code, out = _run(tmp_path, "star-check", "--model", "r2", "--pairs", "200", "--seed", "7")
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["pair", "seed", "angle", "in_band", "analytic", "sampled", "agree"]
    body = [r for r in rows[1:] if r[3] == "False"]
    assert len(body) > 150 and all(r[6] == "True" for r in body)
    manifest = json.loads((tmp_path / "out.csv.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["version"] == "0.1.0" and len(manifest["config_hash"]) == 64


def test_output_independent_of_workers(tmp_path):
    _, a = _run(tmp_path, "star-check", "--model", "rxh2", "--pairs", "120", "--workers", "1", name="a.csv")
    _, b = _run(tmp_path, "star-check", "--model", "rxh2", "--pairs", "120", "--workers", "3", name="b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_env_workers_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("ISODYN_WORKERS", "2")
    code, out = _run(tmp_path, "walk", "--steps", "100", "--seeds", "4")
    assert code == 0
    assert json.loads((tmp_path / "out.csv.manifest.json").read_text())["workers"] == 2
    monkeypatch.setenv("ISODYN_WORKERS", "many")
    assert main(["walk", "--steps", "100", "--seeds", "2"]) == 2


def test_rerun_is_byte_identical(tmp_path):
    _, a = _run(tmp_path, "walk", "--steps", "300", "--seeds", "3", "--seed", "5", name="a.csv")
    _, b = _run(tmp_path, "walk", "--steps", "300", "--seeds", "3", "--seed", "5", name="b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_walk_summary_row(tmp_path):
    code, out = _run(tmp_path, "walk", "--group", "free2", "--steps", "500", "--seeds", "20")
    assert code == 0
    rows = _rows(out)
    assert rows[0] == ["seed", "n", "a_n", "is_special", "witness_ok"]
    assert len(rows) == 1 + 20 * 501 + 1
    summary = rows[-1]
    assert summary[0] == "summary" and 0.4 <= float(summary[2]) <= 0.6


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "pingpong", "group": "abelian2", "R": 4, "seed": 3}))
    code, out = _run(tmp_path, "pingpong", "--config", str(cfg), "--format", "json", name="p.json")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["rows"][0]["verdict"] == "FailsWithWitness" and data["rows"][0]["witness"] == "[1, 1]"
    assert data["rows"][0]["R"] == 4
    assert json.loads((tmp_path / "p.json.manifest.json").read_text())["seed"] == 3
    code, out = _run(tmp_path, "pingpong", "--config", str(cfg), "--group", "free2", name="q.csv")
    assert _rows(out)[1][4] == "CertifiedOnBall"


def test_unknown_config_key_exits_2_without_output(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"pairs": 3, "colour": "red"}))
    code, out = _run(tmp_path, "star-check", "--config", str(cfg))
    assert code == 2 and not out.exists()
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and err["exit_code"] == 2


@pytest.mark.parametrize("args", [
    ["star-check", "--pairs", "0"],
    ["star-check", "--model", "r7"],
    ["walk", "--group", "lattice3"],
    ["pingpong", "--g", "[0, 5]"],
    ["denjoy-wolff", "--z0", "[1.5, 0]"],
    ["hilbert-diameter", "--polytopes", "[\"dodecagon\"]"],
    ["dynamics", "--sl2", "[[1, 1], [1, 1]]"],
    ["walk", "--C", "-1"],
])
def test_config_errors_exit_2(tmp_path, args):
    code, out = _run(tmp_path, *args)
    assert code == 2 and not out.exists()


def test_missing_config_file_exits_2(tmp_path):
    assert main(["walk", "--config", str(tmp_path / "nope.json")]) == 2


def test_precondition_violations_exit_3(tmp_path, capsys):
    code, out = _run(tmp_path, "dynamics", "--sl2", "[[0.8, -0.6], [0.6, 0.8]]")
    assert code == 3 and not out.exists()
    assert json.loads(capsys.readouterr().err.strip())["error"] == "precondition"
    code, _ = _run(tmp_path, "pingpong", "--group", "free2", "--g", "[]")
    assert code == 3


def test_dynamics_parabolic(tmp_path, capsys):
    code, out = _run(tmp_path, "dynamics", "--sl2", "[[1, 20], [0, 1]]", "--etas", "5", "--format", "json",
                     name="d.json")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["summary"]["parabolic"] and data["summary"]["success_fraction"] == 1.0
    assert len(data["rows"]) == 5 * 200


def test_hilbert_tables(tmp_path):
    code, out = _run(tmp_path, "hilbert-star", "--polytopes", '["square", {"name": "tri", "vertices": [[0,0],[1,0],[0,1]]}]',
                     name="s.csv")
    assert code == 0
    rows = _rows(out)
    assert rows[0][-2:] == ["agree", "star_distance"]
    assert all(r[-2] == "True" for r in rows[1:]) and len(rows) == 1 + 64 + 36
    code, out = _run(tmp_path, "hilbert-diameter", name="d.csv")
    table = {r[0]: r for r in _rows(out)[1:]}
    assert table["square"][4] == "3.0" and table["triangle"][5] == "True"


def test_denjoy_wolff_table(tmp_path):
    code, out = _run(tmp_path, "denjoy-wolff", "--format", "json", name="dw.json")
    assert code == 0
    rows = {r["map"]: r for r in json.loads(out.read_text())["rows"]}
    assert rows["hyperbolic"]["outcome"] == "ConvergesTo" and abs(rows["hyperbolic"]["theta"]) < 1e-3
    assert rows["parabolic"]["outcome"] == "ConvergesTo"
    assert rows["elliptic"]["outcome"] == rows["contraction"]["outcome"] == "BoundedOrbit"
    code, out = _run(tmp_path, "denjoy-wolff", "--maps", '[{"name": "sq", "kind": "blaschke", "zeros": [0, 0]}]',
                     name="dw.csv")
    assert _rows(out)[1][:2] == ["sq", "BoundedOrbit"]


def test_stdout_when_no_out(capsys):
    assert main(["pingpong", "--R", "3"]) == 0
    assert capsys.readouterr().out.startswith("group,g,h,R,verdict")
