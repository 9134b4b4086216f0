import json
from pathlib import Path

import pytest

from apme import __version__
from apme.cli import ConfigError, load_config, main

EVOLVE = """\
[experiment]
name = small
kind = evolve
output_dir = {out}

[medium]
m = 2, 3

[grid]
half_width = 3
cells = 32

[initial]
type = plateau
mass = 1
height = 1
radius = 1

[evolve]
t_end = 1
checkpoints = 0.5, 1
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_info_prints_table(capsys):
    assert main(["info", "--m", "2", "3"]) == 0
    out = capsys.readouterr().out
    assert "alpha  = 0.4" in out and "PASS" in out


def test_info_reports_violation(capsys):
    assert main(["info", "--m", "0.5", "2"]) == 1
    assert "H1" in capsys.readouterr().out
    assert main(["info", "--m", "2", "5"]) == 1
    assert "H2" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_run_with_h1_violation_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, EVOLVE.format(out=tmp_path / "o").replace("m = 2, 3", "m = 0.9, 2"))
    assert main(["run", str(cfg)]) == 1
    assert "H1" in capsys.readouterr().err


def test_bad_key_names_the_key(tmp_path, capsys):
    cfg = write(tmp_path, EVOLVE.format(out=tmp_path / "o").replace("cells = 32", "cels = 32"))
    assert main(["run", str(cfg)]) == 1
    assert "[grid] cells" in capsys.readouterr().err
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert exc.value.key == "grid.cells" or "cells" in str(exc.value)


def test_run_evolve_writes_outputs_and_is_reproducible(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["run", str(write(tmp_path, EVOLVE.format(out=out), f"c{k}.ini"))]) == 0
        outs.append(out)
    for name in ("trace.csv", "trace.gp"):
        assert (outs[0] / name).exists()
    assert (outs[0] / "trace.csv").read_bytes() == (outs[1] / "trace.csv").read_bytes()
    meta = json.loads((outs[0] / "manifest.json").read_text())
    assert meta["version"] == __version__ and meta["results"]["passed"] is True


def test_profile_command(tmp_path):
    out = tmp_path / "p"
    assert main(["profile", "--m", "2", "2", "--cells", "48", "--half-width", "3", "--out", str(out)]) == 0
    files = {p.name for p in out.iterdir()}
    assert any(f.endswith(".csv") for f in files)
    meta = json.loads((out / "profile.json").read_text())
    assert meta["residual"] < meta["tol"]
    assert json.loads((out / "manifest.json").read_text())["results"]["passed"] is True


def test_verify_subset(tmp_path, capsys):
    out = tmp_path / "v"
    code = main(["verify", "--m", "2", "2", "--checks", "exponents", "ssni", "mass", "--cases", "3", "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert text.count("PASS") == 3 and "FAIL" not in text
    summary = json.loads((out / "summary.json").read_text())
    assert all(summary["pass"].values())


def test_shipped_configs_parse():
    root = Path(__file__).resolve().parents[1] / "configs"
    for p in sorted(root.glob("*.ini")):
        if p.name.startswith("bad"):
            continue
        assert load_config(p).name == p.stem
