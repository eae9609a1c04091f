import json

import pytest

from ringpatterns.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ring_command(capsys):
    code, out, _ = run(capsys, "ring", "pgr:6:x^2-2")
    assert code == 0
    record = json.loads(out)
    assert record == {"kind": "pgr:6:x^2-2", "size": 36, "char": 6, "lpf": 2, "factors": [6, 6]}


def test_pet_diagram_text(capsys):
    code, out, _ = run(capsys, "pet-diagram", "y,y^2")
    assert code == 0
    assert "{2*h2*y, 2*h1*y, (2*h2+2*h1)*y}" in out
    assert "[y]" in out


def test_pet_diagram_json(capsys):
    code, out, _ = run(capsys, "pet-diagram", "y^3,y^3+y^2", "--fork", "--json")
    assert code == 0
    tree = json.loads(out)
    assert tree["children"]


def test_intersective(capsys):
    code, out, _ = run(capsys, "intersective", "--family", "y,2*y,3*y,4*y,5*y", "--k-max", "50")
    assert code == 0 and json.loads(out)["ok"]
    code, out, _ = run(capsys, "intersective", "--family", "y,y^2+1", "--k-max", "10")
    record = json.loads(out)
    assert record["ok"] is False and record["first_failure"] == 2


def test_charsum_hadamard(capsys):
    code, out, _ = run(capsys, "charsum", "zmod:7", "--hadamard", "2")
    assert code == 0
    records = json.loads(out)
    assert len(records) == 6
    for rec in records:
        assert rec["abs"] <= rec["bound"] + 1e-9


def test_roots_and_lambda(capsys):
    code, out, _ = run(capsys, "roots", "zmod:15", "--poly", "y^2-1")
    assert code == 0 and json.loads(out)["count"] == 4
    code, out, _ = run(capsys, "lambda", "zmod:7", "--family", "y,y^2",
                       "--functions", "random:1,random:2,random:3")
    assert code == 0
    assert "discrepancy" in json.loads(out)


def test_config_count_builtin(capsys):
    code, out, _ = run(capsys, "config-count", "--builtin", "avoid-3y:1", "--witness")
    assert code == 0
    record = json.loads(out)
    assert record["M1"] == 0 and record["witness"] is None


def test_gowers_command(capsys):
    code, out, _ = run(capsys, "gowers", "zmod:6", "--function", "z6-counterexample:1", "--s", "2")
    assert code == 0
    norms = json.loads(out)["norms"]
    assert abs(norms["U1"] - 1 / 3) < 1e-9


def test_pet_step_command(capsys):
    code, out, _ = run(capsys, "pet-step", "zmod:31", "--family", "y,y^2", "--window", "4")
    assert code == 0
    record = json.loads(out)
    assert record["lhs"] <= record["rhs"] + 1e-8
    assert record["m_prime"] == 2


def test_pet_bounds_command(capsys):
    code, out, _ = run(capsys, "pet-bounds", "--m", "1", "--d", "2", "--pair", "2:1,1")
    record = json.loads(out)
    assert record["t_bound"]["value"] == "6"
    assert record["max_path_length"] == 2


def test_us_trace_command(capsys):
    code, out, _ = run(capsys, "us-trace", "zmod:101", "--family", "y,y^2",
                       "--functions", "random:1,random:2,random:3",
                       "--target", "2", "--windows", "4,4")
    assert code == 0
    record = json.loads(out)
    assert record["certified"] and len(record["steps"]) == 2


def test_hypothesis_violation_exit_code(capsys):
    code, _, err = run(capsys, "pet-step", "zmod:31", "--family", "y,2*y", "--window", "4")
    assert code == 1
    assert "hypothesis violated" in err
    assert "degree" in err


def test_usage_error_exit_code(capsys):
    code, _, err = run(capsys, "ring", "zmood:7")
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_sweep_deterministic_and_renders(tmp_path, capsys):
    config = {
        "rings": ["zmod:5", "zmod:7"],
        "family": "y^2",
        "functions": "random",
        "trials": 3,
        "seed": 9,
    }
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert run(capsys, "sweep", "--config", str(cfg), "--out", str(out1))[0] == 0
    assert run(capsys, "sweep", "--config", str(cfg), "--out", str(out2))[0] == 0
    body1 = out1.read_text().splitlines()
    body2 = out2.read_text().splitlines()
    assert body1[0].startswith("# generated")
    assert body1[1:] == body2[1:]  # identical modulo the timestamp header
    assert (tmp_path / "a.png").exists()
    assert (tmp_path / "b.png").exists()
    # summary rows carry the per-ring maxima
    summary = [line for line in body1 if line.startswith("summary")]
    assert len(summary) == 2


def test_sweep_toml_config(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('family = "y^2"\ntrials = 2\nseed = 1\nrings = ["zmod:5"]\n')
    out = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--config", str(cfg), "--out", str(out))
    assert code == 0 and out.exists()


def test_sweep_bound_column_matches_formula(tmp_path, capsys):
    config = {"rings": ["zmod:13"], "family": "y^2", "trials": 2, "seed": 4}
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(config))
    out = tmp_path / "sweep.csv"
    run(capsys, "sweep", "--config", str(cfg), "--out", str(out))
    rows = [line.split(",") for line in out.read_text().splitlines()[2:]]
    header = out.read_text().splitlines()[1].split(",")
    bound_idx = header.index("bound")
    for row in rows:
        assert abs(float(row[bound_idx]) - 2 * (1 / 13) ** 0.25) < 1e-12


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert "FAIL" not in out
