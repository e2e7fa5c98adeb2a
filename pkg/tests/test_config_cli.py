import json
import textwrap

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from wgqed.cli import main
from wgqed.config import (
    ConfigError,
    Grid,
    SweepAxis,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
    save_config,
)
from wgqed.experiments import Table, run_experiment
from wgqed.presets import PRESETS

SPECTRUM = """\
name: demo
command: spectrum
system:
  separation_phase: 6.1086523819801535
  gamma_deph: 0.016
  mode: RT
sweep:
  - name: beta
    values: [0.9, 1.0]
outputs:
  detunings: {start: -2.0, stop: 2.0, num: 21}
  refine_levels: 1
"""


def write(tmp_path, text, name="exp.yaml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


# --- parsing ----------------------------------------------------------------

def test_load_and_points(tmp_path):
    cfg = load_config(write(tmp_path, SPECTRUM))
    assert cfg.command == "spectrum"
    assert cfg.points() == [{"beta": 0.9}, {"beta": 1.0}]
    assert cfg.outputs.detunings == Grid(-2.0, 2.0, 21)


def test_round_trip_is_field_identical(tmp_path):
    for preset in PRESETS.values():
        p = save_config(preset.config, tmp_path / f"{preset.name}.yaml")
        assert load_config(p) == preset.config


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=4, unique=True),
       st.floats(-3.0, 3.0), st.sampled_from(["RT", "RR", "RF"]))
def test_round_trip_property(betas, detuning, mode):
    raw = {"name": "x", "command": "g2", "system": {"detuning": detuning, "mode": mode},
           "sweep": [{"name": "beta", "values": betas}]}
    cfg = config_from_dict(raw)
    assert config_from_dict(yaml.safe_load(dump_config(cfg))) == cfg
    assert config_from_dict(config_to_dict(cfg)) == cfg


def test_sweep_from_grid():
    cfg = config_from_dict({"command": "g2", "sweep": [{"name": "gamma_deph", "start": 0, "stop": 1, "num": 3}]})
    assert cfg.sweep == (SweepAxis("gamma_deph", (0.0, 0.5, 1.0)),)


def test_empty_sweep_is_single_point():
    assert config_from_dict({"command": "spectrum"}).points() == [{}]


@pytest.mark.parametrize("text,path,line", [
    ("command: spectrum\nsystem:\n  beta: 1.5\n", "system", 2),
    ("command: spectrum\nsystem:\n  betta: 1.0\n", "system.betta", 3),
    ("command: spectrum\nsweep:\n  - name: colour\n    values: [1]\n", "sweep[0].name", 3),
    ("command: spectrum\nsweep:\n  - name: beta\n    values: []\n", "sweep[0].values", 4),
    ("command: spectrum\noutputs:\n  detunings: {start: 0, stop: 1, num: 0}\n", "outputs.detunings", 3),
    ("command: plot\n", "command", 1),
    ("command: coupling-map\n", "outputs.field_file", None),
    ("command: spectrum\nsystem: [1, 2\n", "", 3),
])
def test_diagnostics_name_field_and_line(tmp_path, text, path, line):
    with pytest.raises(ConfigError) as exc:
        load_config(write(tmp_path, text))
    if path:
        assert exc.value.path == path
    assert exc.value.line == line


def test_deterministic_flag_cannot_be_disabled():
    with pytest.raises(ConfigError, match="deterministic"):
        config_from_dict({"command": "g2", "deterministic": False})


def test_sweep_point_validated():
    with pytest.raises(ConfigError, match="point 1"):
        config_from_dict({"command": "g2", "sweep": [{"name": "beta", "values": [0.5, 2.0]}]})


# --- experiments ---------------------------------------------------------------

def test_table_csv_quoting_and_filters():
    t = Table(("a", "b"), ((1.0, 'x,"y"'), (0.1 + 0.2, "z")))
    assert t.to_csv() == 'a,b\r\n1.0,"x,""y"""\r\n0.30000000000000004,z\r\n'
    assert t.where(a=0.3).rows == ((0.1 + 0.2, "z"),)


def test_rows_carry_full_parameter_tuple(tmp_path):
    b = run_experiment(load_config(write(tmp_path, SPECTRUM)))
    t = b.tables["spectrum"]
    for col in ("sweep_beta", "separation_phase", "beta_1", "beta_2", "gamma_deph_1", "rabi_1",
                "drive_phase_2", "drive_mode", "j12", "gamma12", "mode", "detuning", "intensity"):
        assert col in t.columns
    assert set(t.column("beta_1").astype(float)) == {0.9, 1.0}


def test_single_delay_grid():
    cfg = config_from_dict({"command": "g2", "system": {"mode": "RF"},
                            "outputs": {"taus": {"start": 0.0, "stop": 0.0, "num": 1, "spacing": "linear"}}})
    t = run_experiment(cfg).tables["g2"]
    assert t.column("tau").astype(float).tolist() == [0.0]


def test_zero_drive_gives_zero_excited_populations():
    cfg = config_from_dict({"command": "populations", "system": {"rabi": 0.0, "mode": "RF"},
                            "outputs": {"steady_only": True}})
    t = run_experiment(cfg).tables["steady"]
    for col in ("rho_ee", "rho_ss", "rho_aa"):
        assert float(t.column(col)[0]) == 0.0


def test_tables_byte_identical_across_runs_and_workers(tmp_path):
    cfg = load_config(write(tmp_path, SPECTRUM))
    a = run_experiment(cfg).write(tmp_path / "a")
    b = run_experiment(cfg, workers=2).write(tmp_path / "b")
    for pa, pb in zip(sorted(a), sorted(b)):
        if pa.suffix == ".csv":
            assert pa.read_bytes() == pb.read_bytes()


def test_strict_profile_recorded(tmp_path):
    b = run_experiment(load_config(write(tmp_path, SPECTRUM)), tolerance_profile="strict")
    assert b.provenance["tolerances"]["min_refine_levels"] == 5
    with pytest.raises(ValueError):
        run_experiment(b.config, tolerance_profile="sloppy")


# --- CLI --------------------------------------------------------------------------

def test_cli_spectrum_success(tmp_path, capsys):
    cfg = write(tmp_path, SPECTRUM)
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    prov = json.loads((tmp_path / "o" / "provenance.json").read_text())
    assert prov["command"] == "spectrum" and prov["engine_version"]
    assert (tmp_path / "o" / "spectrum.csv").exists()


def test_cli_config_error_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, "command: spectrum\nsystem:\n  beta: 1.5\n")
    assert main(["spectrum", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_cli_verb_mismatch_exit_2(tmp_path):
    assert main(["g2", "--config", str(write(tmp_path, SPECTRUM)), "--out", str(tmp_path)]) == 2


def test_cli_missing_config_exit_4(tmp_path, capsys):
    missing = tmp_path / "nope.yaml"
    assert main(["spectrum", "--config", str(missing)]) == 4
    assert str(missing) in capsys.readouterr().err


def test_cli_missing_field_file_exit_4(tmp_path, capsys):
    cfg = write(tmp_path, """\
        command: coupling-map
        outputs:
          field_file: absent.txt
          positions: {1: [1.0, 0.0]}
        """)
    assert main(["coupling-map", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4
    assert "absent.txt" in capsys.readouterr().err


def test_cli_numerical_failure_exit_3(tmp_path, capsys):
    # the dark transmitted field of a lossless single emitter has no g2
    cfg = write(tmp_path, """\
        command: g2
        system: {mode: RT, driven: [true, false], beta: [1.0, 0.0]}
        outputs: {taus: {start: 0.0, stop: 1.0, num: 2, spacing: linear}}
        """)
    assert main(["g2", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3
    assert "dark state" in capsys.readouterr().err


def test_cli_presets_list(capsys):
    assert main(["presets", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("fig2a", "fig3b", "fig4a", "fig5-synthetic"):
        assert name in out


def test_cli_unknown_preset(capsys):
    assert main(["presets", "run", "fig9z"]) == 2


def test_cli_runs_cheap_preset(tmp_path, capsys):
    assert main(["presets", "run", "fig5-synthetic", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
    prov = json.loads((tmp_path / "provenance.json").read_text())
    assert all(c["passed"] for c in prov["checks"])
    assert (tmp_path / "config.yaml").exists()
