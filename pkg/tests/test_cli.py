import json
import os

import pytest

from bhwave import cli


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_wave_smoke(tmp_path):
    assert run(tmp_path, "wave", "--eps", "0.1", "--modes", "64", "--method", "newton") == 0
    d = json.loads((tmp_path / "wave.json").read_text())
    assert d["runspec"]["subcommand"] == "wave"
    assert d["runspec"]["parameters"]["modes"] == 64
    assert d["wave"]["residual_norm"] < 1e-12
    spec, header, rows = cli.read_csv(tmp_path / "coefficients.csv")
    assert spec == d["runspec"] and header == ["k", "cos_coef"] and len(rows) == 64


def test_wave_taylor_tables(tmp_path):
    assert run(tmp_path, "wave", "--method", "taylor", "--order", "6", "--modes", "8") == 0
    lines = (tmp_path / "taylor_u.csv").read_text().splitlines()
    assert lines[0].startswith("# runspec ") and "2,2,-1/2" in lines


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["wave", "--eps", "0.1"]) == 1                # no --out
    assert run(tmp_path, "wave", "--eps", "0.6") == 1             # out of range
    assert run(tmp_path, "wave", "--bogus", "1") == 1             # unknown flag
    assert cli.main([]) == 1
    assert run(tmp_path, "lifespan", "--eps", "0.1,0.05") == 1    # fewer than 3 eps
    # a Newton failure is numerical
    assert run(tmp_path, "wave", "--eps", "0.3", "--modes", "4", "--tol", "1e-16") == 2
    fail = json.loads((tmp_path / "failure.json").read_text())
    assert fail["error"] == "NewtonDivergence" and fail["history"]
    assert "runspec" in fail


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# comment\neps = 0.05\nmodes=16\n")
    assert run(tmp_path, "wave", "--config", str(conf), "--modes", "24") == 0
    d = json.loads((tmp_path / "wave.json").read_text())
    assert d["runspec"]["parameters"]["eps"] == 0.05
    assert d["runspec"]["parameters"]["modes"] == 24
    conf.write_text("nonsense = 1\n")
    assert run(tmp_path, "wave", "--config", str(conf)) == 1
    conf.write_text("method = magic\n")
    assert run(tmp_path, "wave", "--config", str(conf)) == 1
    assert run(tmp_path, "wave", "--config", str(tmp_path / "missing.conf")) == 1


def test_spectrum_command(tmp_path):
    assert run(tmp_path, "spectrum", "--eps", "0.07", "--modes", "64", "--scan-M", "32") == 0
    d = json.loads((tmp_path / "spectrum.json").read_text())
    assert d["nonres_min"] > 0.07 ** 2 / 5
    _, header, rows = cli.read_csv(tmp_path / "spectrum.csv")
    assert header == ["n", "re_lambda", "im_lambda", "taylor_pred", "remainder"]


def test_constants_command(tmp_path):
    assert run(tmp_path, "constants", "--modes", "16", "--trials", "1", "--n-max", "20") == 0
    d = json.loads((tmp_path / "constants.json").read_text())
    assert len(d["bounds"]) == 3
    assert 0.22 <= d["xstar"]["bisection"] <= 0.24
    assert d["C_n"]["argmax"] == 4
    _, header, rows = cli.read_csv(tmp_path / "cn_table.csv")
    assert header == cli.CN_CSV_HEADER and len(rows) == 20


def test_simulate_command(tmp_path):
    assert run(tmp_path, "simulate", "--eps", "0.1", "--delta", "0.002", "--modes", "32",
               "--t-end", "2", "--record-every", "40") == 0
    spec, header, rows = cli.read_csv(tmp_path / "run.csv")
    assert header == cli.RUN_CSV_HEADER
    assert float(rows[-1][0]) == pytest.approx(2.0)
    assert all(abs(float(r[5]) - 0.1) < 1e-3 for r in rows)
    assert (tmp_path / "g_h4.svg").exists()


def test_frame_command(tmp_path):
    assert run(tmp_path, "frame", "--eps", "0.1", "--a", "0.3", "--modes", "32",
               "--a-guess", "0.25") == 0
    d = json.loads((tmp_path / "frame.json").read_text())
    assert d["a"] == pytest.approx(0.3, abs=1e-10) and d["g_L2"] < 1e-10


def test_lifespan_command(tmp_path):
    assert run(tmp_path, "lifespan", "--eps", "0.16,0.12,0.08", "--modes", "32",
               "--t-max", "4", "--workers", "1") == 0
    _, header, rows = cli.read_csv(tmp_path / "lifespan.csv")
    assert header == cli.SWEEP_CSV_HEADER
    assert [r[3] for r in rows] == ["doubling", "t_max", "t_max"]
    d = json.loads((tmp_path / "lifespan.json").read_text())
    assert d["slope_A"] is None
    assert (tmp_path / "run_eps0.16.csv").exists()


def test_csv_roundtrip(tmp_path):
    spec = cli.RunSpec("simulate", {"eps": 0.1}, str(tmp_path), 3)
    rows = [(0.0, 1.5, 0.1 + 0.2, "x"), (1.0, 2.5e-17, -3.0, "y")]
    p = tmp_path / "t.csv"
    cli.write_csv(p, ["a", "b", "c", "d"], rows, spec)
    s, header, got = cli.read_csv(p)
    assert s == spec.to_dict()
    assert [float(v) for v in got[0][:3]] == [0.0, 1.5, 0.1 + 0.2]
    # re-emitting the parsed table reproduces the file
    cli.write_csv(tmp_path / "u.csv", header, got, cli.RunSpec(**s))
    assert (tmp_path / "u.csv").read_text() == p.read_text()
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]


def test_svg_deterministic_and_single_point():
    spec = cli.RunSpec("lifespan", {"eps": [0.16, 0.08, 0.04]}, "out", 0)
    rows = [(10.0, 3.0), (100.0, 30.0), (1000.0, 250.0)]
    plot = {"title": "t", "logx": True, "logy": True, "style": "scatter", "fit": (0.95, 0.5)}
    a = cli.render_svg(rows, plot, spec)
    assert a == cli.render_svg(rows, plot, spec)
    assert a.count("<circle") == 3 and "slope 0.950" in a
    assert spec.to_json().replace("<", "&lt;") in a
    one = cli.render_svg([(1.0, 2.0)], {}, None)
    assert one.count("<circle") == 1 and "<polyline" not in one


def test_svg_empty_skipped(tmp_path, capsys):
    assert cli.render_svg([], {}) is None
    assert cli.render_svg([(0.0, -1.0)], {"logy": True}) is None
    assert not cli.write_svg(str(tmp_path / "e.svg"), [], {}, cli.RunSpec("wave"))
    assert "skipped" in capsys.readouterr().err
    assert not (tmp_path / "e.svg").exists()
