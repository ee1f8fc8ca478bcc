import csv
import io
import json
import math

import numpy as np
import pytest

from zesim import cli
from zesim import graphspace as gs
from zesim import linalg as la
from zesim import simcost as sc

PI3 = "1.0471975512"


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def values(text):
    out = {}
    for line in text.splitlines():
        if ":" in line and not line.startswith(" "):
            key, _, rest = line.partition(":")
            out[key.strip()] = rest.split()[0] if rest.split() else ""
    return out


def test_sigma_delta(capsys):
    code, out, _ = run(capsys, "sigma", "--delta", "3")
    assert code == 0
    assert float(values(out)["sigma"]) == pytest.approx(3.0, abs=1e-6)


def test_sigma_kalpha_power(capsys):
    code, out, _ = run(capsys, "sigma", "--kalpha", PI3, "--power", "2", "--minus")
    assert code == 0
    v = values(out)
    assert float(v["sigma"]) == pytest.approx(2.5716, abs=5e-3)
    assert math.sqrt(float(v["sigma_power2"])) <= 2.571
    assert float(v["sigma_minus"]) < float(v["sigma"])


def test_sigma_json_and_bounds(capsys):
    code, out, _ = run(capsys, "sigma", "--delta", "2", "--bounds", "--json")
    assert code == 0
    obj = json.loads(out)
    assert obj["sigma"] == pytest.approx(2.0, abs=1e-6)
    assert obj["bounds"]["lower_log2"] == pytest.approx(1.0, abs=1e-6)
    assert obj["bounds"]["upper_log2"] == pytest.approx(1.0, abs=1e-6)


def test_sigma_graph_file(tmp_path, capsys):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(gs.graph_to_json(gs.delta_ell(2))))
    code, out, _ = run(capsys, "sigma", str(path))
    assert code == 0 and float(values(out)["sigma"]) == pytest.approx(2.0, abs=1e-6)


def test_sigma_classical_file(tmp_path, capsys):
    path = tmp_path / "adj.txt"
    path.write_text("1 0\n1 1\n")
    code, out, _ = run(capsys, "sigma", "--classical", str(path))
    assert code == 0 and float(values(out)["sigma"]) == pytest.approx(1.0, abs=1e-6)
    path.write_text("[[1, 0], [0, 1]]")
    code, out, _ = run(capsys, "sigma", "--classical", str(path))
    assert code == 0 and float(values(out)["sigma"]) == pytest.approx(2.0, abs=1e-6)


def test_exit_codes(tmp_path, capsys):
    assert run(capsys, "sigma")[0] == 2
    assert run(capsys, "sigma", "--kalpha", "0")[0] == 2
    assert run(capsys, "sigma", str(tmp_path / "missing.json"))[0] == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["sigma", "--delta", "x"])
    assert exc.value.code == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(gs.graph_to_json(
        gs.NCBGraph.from_kraus(2, 2, [np.outer(la.ket(0, 2), la.ket(0, 2))]))))
    assert run(capsys, "sigma", str(bad))[0] == 4
    assert run(capsys, "sigma", "--delta", "2", "--max-iter", "1")[0] == 3
    assert run(capsys, "sigma", "--kalpha", PI3, "--power", "5")[0] == 2


def test_verify_builtin_pi3(capsys):
    code, out, _ = run(capsys, "verify", "--paper-pi3")
    assert code == 0
    assert out.startswith("PASS lower bound 2.5716")


def test_verify_files(tmp_path, capsys):
    cert = sc.paper_certificate_pi3()
    good = tmp_path / "good.json"
    good.write_text(json.dumps(cert.to_json()))
    assert run(capsys, "verify", str(good))[0] == 0
    tampered = sc.Certificate("lower", cert.first, 1.01 * cert.second, cert.graph)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(tampered.to_json()))
    code, out, _ = run(capsys, "verify", str(bad), "--json")
    assert code == 5
    rep = json.loads(out)
    assert rep["margins"]["trace_A"] < -1e-3
    zero = sc.Certificate("lower", np.zeros((2, 2)), la.kron(np.eye(2), np.eye(3)) / 2)
    zpath = tmp_path / "zero.json"
    zpath.write_text(json.dumps(zero.to_json()))
    code, out, _ = run(capsys, "verify", str(zpath), "--kalpha", PI3)
    assert code == 0 and "bound 0" in out
    assert run(capsys, "verify", str(zpath))[0] == 2
    assert run(capsys, "verify")[0] == 2


def test_checks(capsys):
    code, out, _ = run(capsys, "checks", "--delta", "2")
    assert code == 0
    v = values(out)
    assert v["nontrivial"] == "true"
    assert v["cheapest-full-rank"] == "true"
    assert "theorem1-condition: found" in out


def test_checks_kpi3(capsys):
    code, out, _ = run(capsys, "checks", "--kalpha", PI3)
    assert code == 0
    assert "theorem1-condition: none found" in out


def test_checks_trivial(tmp_path, capsys):
    e = lambda b, a: np.outer(la.ket(b, 2), la.ket(a, 2))
    k = gs.NCBGraph.from_kraus(2, 2, [e(0, 0), e(1, 0), e(1, 1)])
    path = tmp_path / "triv.json"
    path.write_text(json.dumps(gs.graph_to_json(k)))
    code, out, _ = run(capsys, "checks", str(path))
    assert code == 0 and values(out)["nontrivial"] == "false"


def parse_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], rows[1:]


def test_sweep_csv(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ZESIM_THREADS", "1")
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sweep", "--min-cos2", "0.25", "--max-cos2", "0.35",
                     "--steps", "3", "--out", str(out))
    assert code == 0
    header, rows = parse_csv(out.read_text())
    assert header == cli.SWEEP_HEADER
    assert len(rows) == 3
    for r in rows:
        vals = [float(x) for x in r]
        assert all(math.isfinite(x) for x in vals)
        alpha, c2, s1, s2, gap = vals
        assert math.cos(alpha) ** 2 == pytest.approx(c2, abs=1e-9)
        assert gap > 0
    assert float(rows[0][1]) == pytest.approx(0.25)
    assert float(rows[0][2]) == pytest.approx(2.5716, abs=5e-3)


def test_sweep_row_fields():
    row = cli.sweep_row(0.3)
    assert math.cos(row.alpha) ** 2 == pytest.approx(row.cos2alpha, abs=1e-12)
    assert row.gap == row.sigma1 - row.sigma2avg
    assert row.status1 == row.status2 == "optimal"


def test_sweep_deterministic_and_ordered(capsys, monkeypatch):
    monkeypatch.setenv("ZESIM_THREADS", "1")
    args = ["sweep", "--min-cos2", "0.28", "--max-cos2", "0.32", "--steps", "2"]
    a = run(capsys, *args)[1]
    monkeypatch.setenv("ZESIM_THREADS", "2")
    b = run(capsys, *args)[1]
    assert a == b
    _, rows = parse_csv(a)
    assert [float(r[1]) for r in rows] == [0.28, 0.32]


def test_sweep_rejects_bad_range(capsys):
    assert run(capsys, "sweep", "--min-cos2", "0.3", "--max-cos2", "0.3")[0] == 2
    assert run(capsys, "sweep", "--steps", "1")[0] == 2
    assert run(capsys, "sweep", "--min-cos2", "0", "--max-cos2", "0.3")[0] == 2


def test_failed_row_has_empty_fields():
    row = cli.SweepRow(1.0, 0.3, 2.4, None, None, "optimal", "solver-failure")
    assert row.csv_fields()[3:] == ["", ""]
