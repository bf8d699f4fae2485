import subprocess
import sys

import pytest

from d2dsim.cli import (CSV_HEADER, ConfigError, SweepSpec, emit_csv, figure_points, main,
                        metrics_row, parse_config, read_csv, read_env, run_figure)
from d2dsim.simulator import CampaignConfig, run_campaign


def write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_defaults():
    c, s = parse_config(None, {}, {})
    assert c == CampaignConfig() and s == SweepSpec()


def test_file_values_and_comments(tmp_path):
    path = write(tmp_path, "# campaign\nW = 3\nscheme = geo  # lower case is fine\n"
                           "xi_db_values = 0, 10, 20\n")
    c, s = parse_config(path, {}, {})
    assert c.W == 3 and c.scheme == "GEO" and s.xi_db_values == (0.0, 10.0, 20.0)


def test_precedence_flag_over_env_over_file(tmp_path):
    path = write(tmp_path, "W = 3\nseed = 5\nn_topologies = 40\n")
    env = {"D2DSIM_W": "4", "D2DSIM_SEED": "6"}
    c, _ = parse_config(path, {"W": 7}, env)
    assert (c.W, c.seed, c.n_topologies) == (7, 6, 40)
    c, _ = parse_config(path, {}, env)
    assert c.W == 4
    c, _ = parse_config(path, {"seed": 7}, {})
    assert c.seed == 7


@pytest.mark.parametrize("text,fragment", [
    ("W = 0\n", ":1: W = 0 out of range"),
    ("seed = 1\nfoo = 2\n", ":2: unknown key 'foo'"),
    ("W 3\n", ":1: expected 'key = value'"),
    ("W =\n", ":1: empty value for W"),
    ("W = three\n", ":1: bad value 'three' for W"),
])
def test_file_errors_name_the_line(tmp_path, text, fragment):
    with pytest.raises(ConfigError, match=fragment.replace("'", ".")):
        parse_config(write(tmp_path, text), {}, {})


def test_missing_file_and_bad_env(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(str(tmp_path / "absent.cfg"), {}, {})
    with pytest.raises(ConfigError, match="D2DSIM_BOGUS"):
        read_env({"D2DSIM_BOGUS": "1"})
    with pytest.raises(ConfigError, match="D2DSIM_W"):
        parse_config(None, {}, {"D2DSIM_W": "-2"})


def test_csv_header_only_and_round_trip(tmp_path):
    assert emit_csv([]) == ",".join(CSV_HEADER) + "\n"
    c = CampaignConfig(scheme="NONE", n_topologies=5, epoch_len=20)
    row = metrics_row(c, run_campaign(c))
    path = tmp_path / "out.csv"
    emit_csv([row, row], str(path))
    back = read_csv(str(path))
    assert len(back) == 2 and list(back[0]) == CSV_HEADER and len(CSV_HEADER) == 11
    assert back[0]["scheme"] == "NONE" and int(back[0]["W"]) == 1
    assert float(back[0]["omega_total"]) == pytest.approx(row["omega_total"], rel=1e-5)


def test_figure_points():
    c = CampaignConfig()
    sweep = SweepSpec(w_values=(1, 2), xi_db_values=(0, 10))
    pts6 = figure_points("fig6", c, sweep)
    assert len(pts6) == 6
    assert [(p.scheme, p.n_levels) for p in pts6[:3]] == [("GEO", 1), ("CMP", 1), ("CMP", 20)]
    assert pts6[1].xi_db == 20.0
    pts3 = figure_points("fig3", c, sweep)
    assert len(pts3) == 2 * 2 * 2
    with pytest.raises(ValueError):
        figure_points("fig9", c, sweep)


def test_figure_rows():
    c = CampaignConfig(n_topologies=3, epoch_len=20)
    rows = run_figure("fig5", c, SweepSpec(w_values=(1,), xi_db_values=(0, 10)))
    assert [r["scheme"] for r in rows] == ["CMP", "GEO", "CMP", "GEO"]
    for r in rows:
        assert r["omega_total"] == pytest.approx(r["omega_c"] + r["omega_d"], abs=1e-12)
    geo = [r for r in rows if r["scheme"] == "GEO"]
    assert geo[0]["omega_total"] == geo[1]["omega_total"]


def test_sweep_validation():
    for bad in (dict(w_values=()), dict(w_values=(0,)), dict(schemes=("XYZ",))):
        with pytest.raises(ValueError):
            SweepSpec(**bad)


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "d2dsim", *args], capture_output=True, text=True)


def test_help_and_bad_flags():
    r = run_cli("--help")
    assert r.returncode == 0 and "campaign" in r.stdout
    r = run_cli("campaign", "--help")
    for flag in ("--config", "--W", "--xi-db", "--levels", "--seed", "--workers", "--out"):
        assert flag in r.stdout
    assert run_cli("campaign", "--bogus").returncode != 0
    assert run_cli("campaign", "--W", "x").returncode != 0


def test_range_error_exit_code(tmp_path, capsys):
    path = write(tmp_path, "W = 0\n")
    assert main(["campaign", "--config", path]) == 2
    err = capsys.readouterr().err
    assert f"{path}:1" in err and "W" in err


def test_campaign_and_analyze_commands(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["campaign", "--scheme", "none", "--topologies", "4", "--slots", "20",
                 "--out", str(out)]) == 0
    assert read_csv(str(out))[0]["n_topologies"] == "4"
    assert main(["analyze", "--gammas", "5,2,3,1", "--W", "2"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("lambda_star=") and "tau=" in text
    assert main(["regions", "--grid", "11"]) == 0
