import json
import math

import numpy as np
import pytest

from qslice.cli import EXIT_AUDIT, EXIT_CONFIG, EXIT_OK, main, summarize_ledger
from qslice.config import (BodySpec, ConfigError, GridSpec, InitialSpec, ReferenceSpec, RunConfig, StepperSpec,
                           validate)
from qslice.measurement import read_ledger
from qslice.runner import ScenarioReport, fringe_analysis, run
from qslice.scenarios import BUNDLED, boosted, load_bundled


def small_config(**body) -> RunConfig:
    screen = dict(name="screen", primitive="line", position=[0.0], d=0.5, v_s=1.0, skin=3.0, absorption=20.0)
    screen.update(body)
    return RunConfig(
        name="small",
        grid=GridSpec(lo=[-25.6], hi=[25.6], n=[256]),
        initial=InitialSpec(kind="gaussian", center=[-10.0], sigma=[2.0], k0=[4.0]),
        stepper=StepperSpec(dt=0.01, t_final=5.0),
        bodies=[BodySpec(**screen)],
        reference=ReferenceSpec(kind="flux", body="screen"),
    )


def test_config_round_trip(tmp_path):
    cfg = small_config()
    cfg.save(tmp_path / "c.toml")
    assert RunConfig.load(tmp_path / "c.toml") == cfg
    assert RunConfig.loads(cfg.dumps()) == cfg


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bundled_files_match_builders(name):
    assert load_bundled(name) == BUNDLED[name]()


def test_unknown_key_rejected():
    text = small_config().dumps().replace("[stepper]", "[stepper]\nsubsteps = 3", 1)
    with pytest.raises(ConfigError, match="unknown keys"):
        RunConfig.loads(text)


def test_validate_catches_bad_configs():
    assert validate(small_config())["kinetic"] < 1.5
    with pytest.raises(ConfigError):
        validate(small_config().replace(stepper=StepperSpec(dt=1.0, t_final=5.0)))
    bad = small_config()
    bad.reference = ReferenceSpec(kind="flux", body="nowhere")
    with pytest.raises(ConfigError):
        validate(bad)


def test_run_without_bodies():
    cfg = small_config()
    cfg.bodies, cfg.reference = [], ReferenceSpec()
    rep = run(cfg)
    assert rep.ledger["records"] == 0
    assert abs(rep.audit["max_identity_residual"]) < 1e-12


def test_run_outputs_and_report(tmp_path):
    rep = run(small_config(), tmp_path)
    rows, summary = read_ledger(tmp_path / "ledger.csv")
    assert len(rows) == rep.ledger["records"]
    assert rep.born_l1 is not None and rep.born_l1 < 1e-3
    back = ScenarioReport.from_json((tmp_path / "report.json").read_text())
    assert back.to_dict() == json.loads(rep.to_json())
    summed = summarize_ledger(tmp_path / "ledger.csv")
    assert summed["bodies"]["screen"]["captured"] == pytest.approx(rep.ledger["total_captured"], abs=1e-15)


def test_boost_shifts_packet_and_bodies():
    cfg = small_config()
    q = -2 * math.pi / 51.2
    out = boosted(cfg, q)
    assert out.initial.k0[0] == pytest.approx(4.0 + q)
    assert out.bodies[0].trajectory == [[0.0, q]]
    assert cfg.bodies[0].trajectory == []


def test_cli_exit_codes(tmp_path, capsys):
    good = tmp_path / "good.toml"
    small_config().save(good)
    assert main(["validate", str(good)]) == EXIT_OK
    assert main(["run", str(good), "--out", str(tmp_path / "out")]) == EXIT_OK
    assert main(["report", str(tmp_path / "out")]) == EXIT_OK
    assert main(["validate", str(tmp_path / "missing.toml")]) == EXIT_CONFIG
    leaky = tmp_path / "leaky.toml"
    cfg = small_config(skin=0.4, absorption=1.0)
    cfg.initial.k0 = [8.0]
    cfg.stepper = StepperSpec(dt=0.005, t_final=4.0)
    cfg.save(leaky)
    assert main(["run", str(leaky), "--out", str(tmp_path / "leak")]) == EXIT_AUDIT
    capsys.readouterr()


def test_cli_modes_and_fock(tmp_path, capsys):
    lat = tmp_path / "chain.toml"
    lat.write_text('[lattice]\nkind = "chain"\nn = 3\n')
    assert main(["modes", str(lat)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    omegas = [float(line.split(",")[1]) for line in lines[1:]]
    np.testing.assert_allclose(omegas, [1.0, math.sqrt(3)], atol=1e-12)
    assert main(["fock-check", "--modes", "2", "--max-n", "2", "--trials", "5"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["passed"]


def test_fringe_analysis_on_synthetic_pattern():
    w = np.linspace(-20, 20, 401)
    spacing = 6.0
    p = np.cos(np.pi * w / spacing) ** 2 * np.exp(-w ** 2 / 400) + 0.01
    out = fringe_analysis(w, p)
    assert out["w_max"] == pytest.approx(0.0, abs=1e-12)
    assert out["spacing"] == pytest.approx(spacing, rel=1e-2)
    assert out["contrast"] > 0.9
    flat = fringe_analysis(w, np.exp(-w ** 2 / 400))
    assert math.isnan(flat["contrast"])
