"""Config loading, output formatting, and the command line front end."""

import csv
import math

import numpy as np
import pytest

from pdmp_control.harness import (
    ConfigError,
    RunSettings,
    _cell,
    _parse_nu_level,
    cli_main,
    load_config,
    resolve_run,
    validate_settings,
)


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def test_minimal_config_gets_defaults(tmp_path):
    s = load_config(_write(tmp_path, "[problem]\nname = b1\n"))
    assert s.problem == "b1"
    assert s.horizon == 20.0
    assert s.dx == 0.05
    assert s.n_schedule == (1, 2, 4, 8, 16, 32)
    assert s.n_paths == 20_000
    assert s.out_dir == "out"
    validate_settings(s)


def test_full_config_round_trip(tmp_path):
    text = """
[problem]
name = b2
horizon = 8
discount = 0.7
action_weights = 1, 2
x0 = 0.0
a0 = 1

[grid]
dx = 0.1
tol = 1e-8

[bsde]
n_schedule = 1, 4, 16
limit_tol = 0.05

[mc]
n_paths = 500
seed = 3
threads = 2

[dual]
nus = 0.9, 1.1
eps = 0.1, 0.05

[output]
dir = results
"""
    s = load_config(_write(tmp_path, text))
    assert s.problem == "b2"
    assert s.discount == 0.7
    assert s.action_weights == (1.0, 2.0)
    assert s.x0 == 0.0 and s.a0 == 1
    assert s.n_schedule == (1, 4, 16)
    assert s.nus == (0.9, 1.1)
    assert s.eps == (0.1, 0.05)
    assert s.out_dir == "results"
    validate_settings(s)


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigError, match=r"unknown config keys: grid\.speling"):
        load_config(_write(tmp_path, "[problem]\nname = b1\n[grid]\nspeling = 1\n"))
    with pytest.raises(ConfigError, match=r"\[nonsense\]"):
        load_config(_write(tmp_path, "[problem]\nname = b1\n[nonsense]\nx = 1\n"))


def test_missing_problem_name(tmp_path):
    with pytest.raises(ConfigError, match=r"missing required keys: problem\.name"):
        load_config(_write(tmp_path, "[grid]\ndx = 0.1\n"))


def test_config_file_not_found(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.ini")


def test_unparseable_number_names_the_key(tmp_path):
    with pytest.raises(ConfigError, match=r"grid\.dx: could not parse"):
        load_config(_write(tmp_path, "[problem]\nname = b1\n[grid]\ndx = wide\n"))


# ---------------------------------------------------------------------------
# settings validation and run resolution
# ---------------------------------------------------------------------------


def test_validation_messages():
    with pytest.raises(ConfigError, match="discount must be positive"):
        validate_settings(RunSettings(problem="b1", discount=-1.0))
    with pytest.raises(ConfigError, match="full support"):
        validate_settings(RunSettings(problem="b2", action_weights=(1.0, 0.0, 1.0)))
    with pytest.raises(ConfigError, match="increasing"):
        validate_settings(RunSettings(problem="b1", n_schedule=(4, 2)))
    with pytest.raises(ConfigError, match="shift widths"):
        validate_settings(RunSettings(problem="b1", eps=(0.1, -0.1)))
    validate_settings(RunSettings(problem="b1"))


def test_resolve_rejects_unknown_problem():
    with pytest.raises(ConfigError, match="problem.name"):
        resolve_run(RunSettings(problem="b9"))


def test_resolve_checks_start_state_and_action():
    with pytest.raises(ConfigError, match="outside the domain"):
        resolve_run(RunSettings(problem="b2", x0=99.0))
    with pytest.raises(ConfigError, match="out of range"):
        resolve_run(RunSettings(problem="b2", a0=7))
    with pytest.raises(ConfigError, match="expected 2 entries, got 3"):
        resolve_run(RunSettings(problem="b2", action_weights=(1.0, 1.0, 1.0)))


def test_resolve_applies_overrides():
    rc = resolve_run(RunSettings(problem="b2", discount=0.9, x0=0.5, a0=1))
    assert rc.chars.discount == 0.9
    assert rc.x0[0] == 0.5
    assert rc.a0 == 1


# ---------------------------------------------------------------------------
# output formatting
# ---------------------------------------------------------------------------


def test_cell_formats():
    assert _cell(True) == "true"
    assert _cell(np.bool_(False)) == "false"
    assert _cell(3) == "3"
    assert _cell(np.int64(-2)) == "-2"
    assert _cell(1.0) == "1"
    assert _cell(0.123456789012345) == "0.123456789012"
    assert _cell(np.float64(2.5)) == "2.5"
    assert _cell("label") == "label"


def test_parse_nu_level():
    assert _parse_nu_level("const1") == 1.0
    assert _parse_nu_level("0.75") == 0.75
    assert _parse_nu_level("CONST1.25") == 1.25
    with pytest.raises(ConfigError, match="--nu"):
        _parse_nu_level("bang")
    with pytest.raises(ConfigError, match="positive"):
        _parse_nu_level("const0")


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

_SMALL = """
[problem]
name = b1
horizon = 2.0

[mc]
n_paths = 300
seed = 11
"""


def test_cli_bad_config_exits_2(tmp_path, capsys):
    assert cli_main(["validate", "--config", str(tmp_path / "absent.ini")]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_unknown_problem_exits_2(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli_main(["validate", "--problem", "b99", "--out", str(out)]) == 2
    assert "problem.name" in capsys.readouterr().err


def test_cli_bad_nu_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, _SMALL)
    code = cli_main(
        ["a-shift", "--config", str(cfg), "--nu", "huh",
         "--out", str(tmp_path / "o")]
    )
    assert code == 2
    assert "--nu" in capsys.readouterr().err


def test_cli_validate_passes_on_benchmark(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli_main(["validate", "--problem", "b1", "--out", str(out)]) == 0
    capsys.readouterr()
    with open(out / "hypotheses.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["passed"] == "true" for r in rows)
    assert (out / "resolved_config.ini").is_file()


def test_cli_simulate_is_reproducible(tmp_path, capsys):
    cfg = _write(tmp_path, _SMALL)
    for d in ("o1", "o2"):
        assert cli_main(["simulate", "--config", str(cfg),
                         "--out", str(tmp_path / d)]) == 0
    capsys.readouterr()
    b1 = (tmp_path / "o1" / "simulate.csv").read_bytes()
    b2 = (tmp_path / "o2" / "simulate.csv").read_bytes()
    assert b1 == b2
    with open(tmp_path / "o1" / "simulate.csv") as fh:
        row = next(csv.DictReader(fh))
    est = float(row["cost_mean"])
    target = 1.0 - math.exp(-2.0)
    assert abs(est - target) <= 3.0 * float(row["cost_se"]) + 1e-9


def test_cli_seed_flag_changes_output(tmp_path, capsys):
    # b2's cost varies across paths, so different seeds must differ
    cfg = _write(tmp_path, _SMALL.replace("name = b1", "name = b2"))
    outs = []
    for d, seed in (("s1", "11"), ("s2", "12")):
        assert cli_main(["simulate", "--config", str(cfg), "--seed", seed,
                         "--out", str(tmp_path / d)]) == 0
        with open(tmp_path / d / "simulate.csv") as fh:
            outs.append(next(csv.DictReader(fh))["cost_mean"])
    capsys.readouterr()
    assert outs[0] != outs[1]


def test_cli_compare_on_known_answer(tmp_path, capsys):
    text = """
[problem]
name = b1
horizon = 6.0

[grid]
dx = 0.1

[mc]
n_paths = 400
seed = 2
"""
    cfg = _write(tmp_path, text)
    out = tmp_path / "cmp"
    assert cli_main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
    capsys.readouterr()
    with open(out / "compare.csv") as fh:
        rows = {r["method"]: r for r in csv.DictReader(fh)}
    assert {"hjb_grid", "bsde_limit", "dual_mc_nu1"} <= set(rows)
    v_hjb = float(rows["hjb_grid"]["value_at_x0"])
    v_lim = float(rows["bsde_limit"]["value_at_x0"])
    assert abs(v_hjb - v_lim) < 1e-10
    assert v_hjb == pytest.approx(1.0, abs=1e-6)
    # every constant control prices the constant-cost problem the same way
    for name, r in rows.items():
        if name.startswith("dual_mc_nu"):
            gap = abs(float(r["value_at_x0"]) - (1.0 - math.exp(-6.0)))
            assert gap <= 3.0 * float(r["stat"]) + 1e-9
    assert float(rows["hjb_grid"]["abs_err_vs_oracle"]) < 1e-6


def test_cli_compare_deepens_a_short_schedule(tmp_path, capsys):
    text = """
[problem]
name = b2
horizon = 6.0

[mc]
n_paths = 300
seed = 2
"""
    cfg = _write(tmp_path, text)
    out = tmp_path / "cmp2"
    assert cli_main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "schedule deepened" in printed
    with open(out / "compare.csv") as fh:
        rows = {r["method"]: r for r in csv.DictReader(fh)}
    # both solver columns sit on the exact chain solution
    assert float(rows["hjb_grid"]["abs_err_vs_oracle"]) < 5e-3
    assert float(rows["bsde_limit"]["abs_err_vs_oracle"]) < 5e-3
