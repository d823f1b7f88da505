import csv
import json

import pytest

from covertseq.cli import ConfigError, build_config, main, parse_values


def rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def test_parse_values():
    assert parse_values("1:4", int) == [1, 2, 3, 4]
    assert parse_values("0.1:0.3:0.1", float) == [0.1, 0.2, 0.3]
    assert parse_values("cusum,sr", str) == ["cusum", "sr"]
    assert parse_values(0.5, float) == [0.5]


def test_flags_override_file():
    cfg = build_config({"gamma": 200, "theta": 0.9}, {"gamma": "1000"})
    assert cfg.gamma == [1000.0] and cfg.theta == [0.9]


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        build_config({"gama": 200}, {})


def test_calibrate_sr(capsys):
    assert main(["calibrate", "--test", "sr", "--gamma", "500", "--q", "0.25"]) == 0
    assert "eta_r=400" in capsys.readouterr().out


def test_calibrate_shewhart(capsys):
    assert main(["calibrate", "--test", "shewhart", "--gamma", "500"]) == 0
    assert "eta_s_prime=6.21461" in capsys.readouterr().out


def test_calibrate_verify_json(tmp_path):
    out = tmp_path / "cal.json"
    code = main(["calibrate", "--test", "cusum", "--gamma", "100", "--q", "0.5", "--verify",
                 "--trials", "20000", "--format", "json", "--output", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())[0]
    assert abs(rep["arl_mc"] - 100) < 4 * rep["arl_mc_stderr"] + 1


def test_covert_csv_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["covert", "--test", "shewhart,cusum", "--q", "0.15", "--L", "1,15", "--nu", "0,20", "--trials", "5000", "--seed", "4"]
    assert main(args + ["--output", str(a)]) == 0
    assert main(args + ["--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    text = a.read_text().splitlines()
    assert text[0].startswith("# covertseq covert schema=")
    r = rows(a)
    assert list(r[0]) == ["q", "L", "nu", "test", "Q_analytic", "Q_mc", "mc_stderr"]
    assert len(r) == 8
    assert float(r[2]["Q_analytic"]) == pytest.approx((1 - 500 ** (-1 / 1.15)) ** 15, rel=1e-9)


def test_optimize_shewhart(capsys, tmp_path):
    trace = tmp_path / "t.csv"
    assert main(["optimize", "--test", "shewhart", "--method", "exhaustive", "--trace", str(trace)]) == 0
    out = capsys.readouterr().out
    assert "L*=9" in out
    assert len(rows(trace)) == 25


def test_optimize_infeasible_exit():
    assert main(["optimize", "--test", "shewhart", "--theta", "0.999"]) == 5


def test_optimize_algorithm1_json(tmp_path):
    out = tmp_path / "o.json"
    code = main(["optimize", "--test", "cusum", "--q-min", "0.1", "--q-max", "0.3", "--dq", "0.1",
                 "--format", "json", "--output", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["method"] == "algorithm1" and rep["L_star"] >= 1


def test_exit_codes_for_bad_input(tmp_path):
    assert main(["covert", "--test", "ewma"]) == 2
    assert main(["covert", "--theta", "1.5"]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"unknown": 1}))
    assert main(["covert", "--config", str(cfg)]) == 2
    # SR needs gamma/(1+q) >= 1/q
    assert main(["calibrate", "--test", "sr", "--gamma", "5", "--q", "0.1"]) == 3
    # a threshold this low alarms almost surely before the change
    assert main(["covert", "--test", "shewhart", "--gamma", "1.01", "--nu", "30", "--trials", "2000"]) == 4


def test_figure_bundle(tmp_path):
    code = main(["figure", "I-vs-theta", "--test", "shewhart,cusum", "--theta", "0.95,0.99",
                 "--q-min", "0.1", "--q-max", "0.4", "--dq", "0.1", "--out-dir", str(tmp_path)])
    assert code == 0
    for test in ("shewhart", "cusum"):
        r = rows(tmp_path / f"I-vs-theta_{test}.csv")
        assert [float(x["theta"]) for x in r] == [0.95, 0.99]
        assert float(r[0]["I_star"]) >= float(r[1]["I_star"])


def test_figure_covert_vs_L(tmp_path):
    assert main(["figure", "covert-vs-L", "--test", "sr", "--N", "300", "--nu", "50", "--out-dir", str(tmp_path)]) == 0
    q = [float(x["Q"]) for x in rows(tmp_path / "covert-vs-L_sr.csv")]
    assert len(q) == 40 and all(a >= b for a, b in zip(q, q[1:]))
