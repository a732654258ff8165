import json
import math

import pytest

from wavelab import cli
from wavelab.gfun import GLadder, build_ladder, check_ladder


def run(args, capsys):
    code = cli.main(args)
    out = capsys.readouterr().out
    return code, out


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "c.cfg"
    cfg_file.write_text("# comment\nT = 0.25\ndt=0.002\n\ndata=eigenmode:2\n")
    cfg = cli.make_config("energy-conservation", cli.read_config_file(cfg_file), {"T": "0.5"})
    assert cfg.T == 0.5 and cfg.dt == 0.002 and cfg.data == "eigenmode:2"
    assert cfg.N == 1024
    assert cli.make_config("scattering").T == 10.0


@pytest.mark.parametrize("line, field", [
    ("dt = fast", "dt"),
    ("N = 1000", "N"),
    ("colour = red", "colour"),
    ("just text", "config"),
    ("data = triangle:1", "data"),
    ("ladder_file = /nonexistent/ladder.json", "ladder_file"),
    ("dt_out = 0.0015", "dt_out"),
])
def test_malformed_config_exit_2(tmp_path, capsys, line, field):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text(line + "\n")
    code, out = run(["energy-conservation", "--config", str(cfg_file), "--out", str(tmp_path / "o")],
                    capsys)
    assert code == 2
    err = json.loads(out.strip().splitlines()[-1])
    assert err["error"] == "ConfigError" and err["field"] == field
    assert json.loads((tmp_path / "o" / "error.json").read_text())["field"] == field


def test_unknown_scenario(capsys, tmp_path):
    code, out = run(["no-such-thing", "--out", str(tmp_path)], capsys)
    assert code == 2 and json.loads(out)["field"] == "scenario"


def test_linear_exactness_outputs(tmp_path, capsys):
    out = tmp_path / "lin"
    code, text = run(["linear-exactness", "--out", str(out)], capsys)
    assert code == 0
    assert "PASS linear-exactness:eigenmode" in text
    report = json.loads((out / "report.json").read_text())
    assert report["ok"] and report["max_eigenmode_error"] <= 1e-10
    assert (out / "ledger.csv").read_text().splitlines()[1].startswith("t,")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["scenario"] == "linear-exactness"
    assert set(manifest["volatile"]) == {"timestamp", "runtime_s"}


def test_env_out_dir(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("WAVE_LAB_OUT", str(tmp_path / "env"))
    code, _ = run(["linear-exactness"], capsys)
    assert code == 0 and (tmp_path / "env" / "report.json").exists()
    code, _ = run(["linear-exactness", "--out", str(tmp_path / "flag")], capsys)
    assert (tmp_path / "flag" / "report.json").exists()


def test_overrides_on_command_line(tmp_path, capsys):
    out = tmp_path / "e"
    code, _ = run(["energy-conservation", "--out", str(out), "--T", "0.2", "--N=256",
                   "--dt", "0.002", "--dt-out", "0.04"], capsys)
    assert code == 0
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["T"] == 0.2 and cfg["N"] == 256 and cfg["dt_out"] == 0.04


def test_failing_assertion_exit_1(tmp_path, capsys):
    # a huge dt ruins the order-two confirmation over a short run
    out = tmp_path / "f"
    code, text = run(["energy-conservation", "--out", str(out), "--N", "64", "--dt", "0.1",
                      "--dt_out", "0.1", "--T", "1.0", "--data", "gaussian-bump:3.0,1.0,0.0"],
                     capsys)
    assert code == 1 and "FAIL" in text
    assert json.loads((out / "report.json").read_text())["ok"] is False


def _artifacts(path):
    return (path / "ledger.csv").read_bytes(), (path / "report.json").read_bytes()


def test_prop13_deterministic_and_jobs_invariant(tmp_path, capsys):
    args = ["prop-1-3-bound", "--ensemble", "3", "--N", "256", "--dt", "4e-3", "--dt_out", "0.02"]
    for name, extra in (("a", []), ("b", []), ("c", ["--jobs", "2"])):
        code, _ = run(args + extra + ["--out", str(tmp_path / name)], capsys)
        assert code == 0
    assert _artifacts(tmp_path / "a") == _artifacts(tmp_path / "b") == _artifacts(tmp_path / "c")
    hashes = {json.loads((tmp_path / n / "manifest.json").read_text())["content_hash"] for n in "abc"}
    assert len(hashes) == 1
    report = json.loads((tmp_path / "a" / "report.json").read_text())
    assert report["C"] == pytest.approx(1 + report["C_probe"])
    assert all(m["holds"] for m in report["members"])


def test_build_ladder_user_table(tmp_path, capsys):
    ref = build_ladder(10.0, 5)
    table = tmp_path / "c.txt"
    table.write_text("".join(f"{i} {max(i, ref.Cp(i))!r}\n" for i in range(1, 6)))
    out = tmp_path / "ladder.json"
    code, _ = run(["build-ladder", "--A", "10", "--rungs", "5", "--certificate", str(table),
                   "--out", str(out)], capsys)
    assert code == 0
    lad = GLadder.load(out)
    assert lad.depth == 5 and check_ladder(lad) == []
    assert lad.to_json() == ref.to_json()


def test_build_ladder_zero_rungs(tmp_path, capsys):
    code, out = run(["build-ladder", "--rungs", "0", "--out", str(tmp_path / "x.json")], capsys)
    assert code == 2 and json.loads(out)["field"] == "rungs"


def test_build_ladder_extend_bit_identical(tmp_path, capsys):
    five, six, direct = (tmp_path / f for f in ("five.json", "six.json", "direct.json"))
    assert run(["build-ladder", "--rungs", "5", "--out", str(five)], capsys)[0] == 0
    assert run(["build-ladder", "--rungs", "6", "--extend", str(five), "--out", str(six)], capsys)[0] == 0
    assert run(["build-ladder", "--rungs", "6", "--out", str(direct)], capsys)[0] == 0
    assert six.read_bytes() == direct.read_bytes()


def test_build_ladder_overflow_reports_error(tmp_path, capsys):
    code, out = run(["build-ladder", "--rungs", "7", "--out", str(tmp_path / "x.json")], capsys)
    assert code == 1 and json.loads(out)["error"] == "ConstructionError"


def test_build_ladder_measured(tmp_path):
    from wavelab.gfun import ConstantG
    from wavelab.propagator import SolverConfig
    from wavelab.spectral import RadialGrid
    conf = SolverConfig(5.0, ConstantG(1.0), 4e-3, 0.2, 0.04, RadialGrid(20.0, 128))
    lad = cli.build_ladder_command(10.0, 2, "measured", measure_config=conf)
    assert check_ladder(lad) == []
    assert lad.C(1) >= lad.Cp(1)


def test_ladder_validate_with_file(tmp_path, capsys):
    path = tmp_path / "l.json"
    build_ladder(10.0, 3).save(path)
    code, _ = run(["ladder-validate", "--ladder_file", str(path), "--out", str(tmp_path / "v")],
                  capsys)
    assert code == 0
    rep = json.loads((tmp_path / "v" / "report.json").read_text())
    assert len(rep["rung_integrals"]) == 3


def test_ladder_rung_g_spec(tmp_path, capsys):
    path = tmp_path / "l.json"
    build_ladder(10.0, 2).save(path)
    code, _ = run(["energy-conservation", "--g", "ladder-rung:1", "--ladder_file", str(path),
                   "--data", "gaussian-bump:1.5,1.0,0.0",
                   "--out", str(tmp_path / "e")], capsys)
    assert code == 0
    rep = json.loads((tmp_path / "e" / "report.json").read_text())
    assert rep["drift"] <= 1e-6 and math.isfinite(rep["ratio"])
