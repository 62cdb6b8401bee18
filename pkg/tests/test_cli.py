import json

import pytest

from graphdiff.cli import main

STAR = {
    "edges": [
        {"id": "E1", "length": 1.0, "sigma": 1.0, "left_vertex": "a",
         "right_vertex": "hub", "l": 0.0, "r": 1.0,
         "l_to": {}, "r_to": {"E2": 0.6, "E3": 0.4}},
        {"id": "E2", "length": 1.0, "sigma": 0.8, "left_vertex": "hub",
         "right_vertex": "b", "l": 0.9, "r": 0.0,
         "l_to": {"E1": 0.5, "E3": 0.4}, "r_to": {}},
        {"id": "E3", "length": 1.0, "sigma": 1.2, "left_vertex": "hub",
         "right_vertex": "c", "l": 1.1, "r": 0.0,
         "l_to": {"E1": 0.7, "E2": 0.4}, "r_to": {}},
    ]
}


@pytest.fixture
def star_path(tmp_path):
    p = tmp_path / "star.json"
    p.write_text(json.dumps(STAR))
    return str(p)


@pytest.fixture
def broken_path(tmp_path):
    cfg = json.loads(json.dumps(STAR))
    cfg["edges"][0]["r_to"] = {"E2": 0.6, "E3": 9.4}   # oversubscribed
    p = tmp_path / "broken.json"
    p.write_text(json.dumps(cfg))
    return str(p)


def test_validate_ok(star_path, capsys):
    assert main(["validate", "--graph", star_path]) == 0
    out = capsys.readouterr().out
    assert "conservative: true" in out


def test_validate_reports_problems(broken_path, capsys):
    assert main(["validate", "--graph", broken_path]) == 1
    out = capsys.readouterr().out
    assert "problem:" in out
    assert "E1" in out   # the offending edge is named
    assert "conservative: false" in out


def test_missing_file_is_a_usage_error(tmp_path):
    assert main(["validate", "--graph", str(tmp_path / "nope.json")]) == 2


def test_unparseable_file_is_a_usage_error(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{oops")
    assert main(["validate", "--graph", str(p)]) == 2


def test_limit_q_writes_csv(star_path, tmp_path, capsys):
    out = tmp_path / "q.csv"
    assert main(["limit-q", "--graph", star_path, "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "variant,edge,E1,E2,E3"
    assert len(lines) == 1 + 3 + 3 + 1   # header, dual rows, primal rows, mass_rate
    assert lines[-1].startswith("mass_rate")
    text = capsys.readouterr().out
    assert "entries differing" in text


def test_limit_q_rejects_invalid(broken_path):
    assert main(["limit-q", "--graph", broken_path]) == 1


def test_sweep_happy_path(star_path, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--graph", star_path,
        "--kappa", "1,10,100", "--t", "1", "--h", "0.1",
        "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("kappa,t,")
    assert len(lines) == 4
    assert "nonincreasing" in capsys.readouterr().out


def test_sweep_fem_path(star_path, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--graph", star_path, "--disc", "fem",
        "--kappa", "1,10", "--t", "0.5", "--h", "0.1",
        "--out", str(out),
    ])
    assert code == 0


def test_sweep_phi0_by_edge_id(star_path, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main([
        "sweep", "--graph", star_path, "--phi0", "indicator:E2",
        "--kappa", "1,10", "--t", "0.5", "--h", "0.1",
        "--out", str(out),
    ])
    assert code == 0


def test_sweep_unknown_phi0_edge(star_path, tmp_path):
    code = main([
        "sweep", "--graph", star_path, "--phi0", "indicator:Z9",
        "--kappa", "1,10", "--t", "0.5", "--h", "0.1",
        "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 2


def test_sweep_bad_thread_env(star_path, tmp_path, monkeypatch):
    monkeypatch.setenv("GRAPHDIFF_THREADS", "many")
    code = main([
        "sweep", "--graph", star_path,
        "--kappa", "1,10", "--t", "0.5", "--h", "0.1",
        "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 2


def test_sweep_threaded_env(star_path, tmp_path, monkeypatch):
    monkeypatch.setenv("GRAPHDIFF_THREADS", "2")
    code = main([
        "sweep", "--graph", star_path,
        "--kappa", "1,10", "--t", "0.5", "--h", "0.1",
        "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 0


def test_bad_kappa_list_is_parse_error(star_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--graph", star_path, "--kappa", "1,zap"])
    assert exc.value.code == 2   # argparse usage failure


def test_decreasing_kappa_list_is_clean_error(star_path, tmp_path, capsys):
    # parses as floats but violates the sweep's ordering precondition;
    # must exit cleanly instead of dumping a traceback
    code = main([
        "sweep", "--graph", star_path,
        "--kappa", "10,1", "--t", "0.5", "--h", "0.1",
        "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_resolvent_check_defaults(capsys):
    assert main(["resolvent-check"]) == 0
    out = capsys.readouterr().out
    assert "lambda,l1_distance" in out
    assert "average: 0.5" in out


def test_resolvent_check_failure_exit(capsys):
    # big lambda keeps the scaled resolvent far from the plain average
    assert main(["resolvent-check", "--lambdas", "10,5"]) == 3


def test_resolvent_check_bad_interval():
    assert main(["resolvent-check", "--a", "2", "--b", "1"]) == 2


def test_duality_check(star_path, tmp_path, capsys):
    out = tmp_path / "d.csv"
    code = main([
        "duality-check", "--graph", star_path,
        "--h", "0.1", "--levels", "3", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "h,defect,ratio"
    assert len(lines) == 4
    assert "ratio" in capsys.readouterr().out


def test_duality_check_second_order_traces(star_path, tmp_path):
    code = main([
        "duality-check", "--graph", star_path, "--trace-order", "2",
        "--h", "0.1", "--levels", "2", "--out", str(tmp_path / "d.csv"),
    ])
    assert code == 0
