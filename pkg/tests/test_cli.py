import json

import numpy as np
import pytest

from heatbounds import cli
from heatbounds.errors import InvalidParameterError


def run_cli(args):
    return cli.main(args)


def test_print_schema(capsys):
    assert run_cli(["--print-schema"]) == 0
    out = capsys.readouterr().out
    assert "seed" in out and "paths" in out and "verify checks" in out


def test_config_file_roundtrip(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("seed = 7\npaths = 1200   # comment\ndomain = ball\nradius = 0.5\n")
    assert run_cli(["--config", str(cfgfile), "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert '"seed": 7' in out and '"radius": 0.5' in out


def test_config_rejects_unknown_keys(tmp_path):
    cfgfile = tmp_path / "bad.cfg"
    cfgfile.write_text("bogus_key = 1\n")
    with pytest.raises(InvalidParameterError):
        cli.parse_config_file(str(cfgfile))
    assert run_cli(["--config", str(cfgfile), "--dry-run"]) == 1


def test_flags_override_config(tmp_path, capsys):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text("seed = 7\n")
    assert run_cli(["--config", str(cfgfile), "--seed", "9", "--dry-run"]) == 0
    assert '"seed": 9' in capsys.readouterr().out


def test_field_spec_parsing():
    f = cli.parse_field("const(2.5)", 2)
    assert f(np.zeros((1, 2)))[0] == 2.5
    g = cli.parse_field("sin(0.3, 2.0)", 1)
    assert g(np.array([[0.4]]))[0] == pytest.approx(0.3 * np.sin(0.8))
    with pytest.raises(InvalidParameterError):
        cli.parse_field("nope(1)", 2)
    with pytest.raises(InvalidParameterError):
        cli.parse_field("const(1", 2)


def test_geodesic_subcommand_flat_torus(tmp_path):
    code = run_cli([
        "geodesic", "--psi", "log_radial(0,0;1)",
        "--from", "1,0", "--to", "0,1",
        "--vertices", "129", "--out", str(tmp_path),
    ])
    assert code == 0
    data = np.loadtxt(tmp_path / "geodesic.csv", delimiter=",", skiprows=1)
    rad = np.linalg.norm(data[:, 1:3], axis=1)
    assert np.max(np.abs(rad - 1.0)) <= 1e-3


def test_spectrum_subcommand_disc(tmp_path, capsys):
    code = run_cli([
        "spectrum", "--domain", "disc", "--radius", "0.5",
        "--grid", "96", "--out", str(tmp_path),
    ])
    assert code == 0
    payload = json.loads((tmp_path / "spectrum.json").read_text())
    assert payload["lambda1"] == pytest.approx(13.56, rel=5e-3)
    assert payload["bound"] == pytest.approx(0.5 / np.tan(0.5) ** 2, rel=1e-12)
    assert payload["verdict"] == "PASS"


def test_simulate_and_trace(tmp_path, capsys):
    code = run_cli([
        "simulate", "--domain", "half_space", "--x0", "0,0",
        "--horizon", "0.5", "--dt", "0.002", "--paths", "2000",
        "--seed", "3", "--out", str(tmp_path),
    ])
    assert code == 0
    assert (tmp_path / "paths.csv").exists()
    code = run_cli([
        "simulate", "--domain", "half_space", "--x0", "0,0",
        "--horizon", "0.1", "--dt", "0.002", "--seed", "3",
        "--trace", "4", "--out", str(tmp_path),
    ])
    assert code == 0
    data = np.loadtxt(tmp_path / "trace_4.csv", delimiter=",", skiprows=1)
    assert data.shape[0] == 51  # t, x1, x2, L, push rows per step
    header = (tmp_path / "trace_4.csv").read_text().splitlines()[0]
    assert header == "t,x1,x2,L,push"


def test_heat_subcommand(tmp_path):
    code = run_cli([
        "heat", "--domain", "interval", "--f", "cos(1,1)", "--time", "0.3",
        "--grid", "101", "--out", str(tmp_path),
    ])
    assert code == 0
    data = np.loadtxt(tmp_path / "heat.csv", delimiter=",", skiprows=1)
    x, u = data[:, 0], data[:, 1]
    assert np.max(np.abs(u - np.exp(-0.3) * np.cos(x))) < 1e-3


def test_flow_contraction_exit_codes(tmp_path):
    ok = run_cli([
        "flow", "--f", "radial_poly(0,0.65)", "--ell", "const(1.3)",
        "--x0", "1,0.5", "--y0=-0.3,0.8", "--horizon", "1.0",
        "--dt", "0.05", "--out", str(tmp_path),
    ])
    assert ok == 0
    bad = run_cli([
        "flow", "--f", "radial_poly(0,0.65)", "--ell", "const(10.0)",
        "--x0", "1,0.5", "--y0=-0.3,0.8", "--horizon", "1.0",
        "--dt", "0.05", "--out", str(tmp_path),
    ])
    assert bad == 1


def test_verify_subset_and_summary(tmp_path, capsys):
    code = run_cli([
        "verify", "spectral_gap", "cantor_weight", "evi_quadratic",
        "--seed", "11", "--out", str(tmp_path),
    ])
    assert code == 0
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert summary[0] == "check,verdict,lhs,rhs,se,slack"
    assert len(summary) == 4
    assert all(",PASS," in line for line in summary[1:])


def test_verify_cantor_cli(tmp_path):
    code = run_cli(["cantor", "-j", "3", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "cantor_3.csv").exists()
    payload = json.loads((tmp_path / "cantor_3.json").read_text())
    assert payload["verdict"] == "PASS"


def test_unknown_check_is_an_error(tmp_path):
    assert run_cli(["verify", "not_a_check", "--out", str(tmp_path)]) == 1
