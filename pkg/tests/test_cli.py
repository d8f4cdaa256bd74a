"""Command-line surface: exit codes, byte-stable outputs, metadata sidecars,
and flag/config-file/environment precedence."""

import json
import subprocess

import numpy as np
import pytest

from extremctl import fileio
from extremctl.cli import _parse_etas, _parse_reference, main
from extremctl.mapping import CalibrationProfile, LinkSet, RobotModel, calibrate, map_frame
from extremctl.plant import GainSchedule, make_sinusoid, plant_from_dict, run_episode
from extremctl.se3 import Pose, Rotation


def make_robot():
    return RobotModel(
        pelvis_height=0.75,
        pelvis_to_torso=(0.05, 0.0, 0.25),
        shoulder_offset={"left": (0.02, 0.18, 0.05), "right": (0.02, -0.18, 0.05)},
        arm_length={"left": 0.45, "right": 0.45},
        neutral_foot={"left": (0.0, 0.12, 0.03), "right": (0.0, -0.12, 0.03)},
    )


def make_human():
    ident = Rotation.identity()
    pelvis = Pose(ident, np.array([0.0, 0.0, 1.0]))
    return LinkSet(
        pelvis=pelvis,
        torso=pelvis,
        left_hand=Pose(ident, np.array([0.6, 0.2, 1.3])),
        right_hand=Pose(ident, np.array([0.6, -0.2, 1.3])),
        left_foot=Pose(ident, np.array([0.0, 0.1, 0.02])),
        right_foot=Pose(ident, np.array([0.0, -0.1, 0.02])),
    )


def write_mapping_inputs(d):
    """robot.json, neutral.json, and a 3-frame capture with ns timestamps."""
    robot, human = make_robot(), make_human()
    fileio.dump_json(str(d / "robot.json"), robot.to_dict())
    fileio.dump_json(str(d / "neutral.json"), human.to_dict())
    ident = Rotation.identity()
    frames = [
        (100_000_000 * k, human.with_pose("left_hand", Pose(ident, np.array([0.6, 0.2 + 0.01 * k, 1.3]))))
        for k in range(3)
    ]
    fileio.write_linkset_jsonl(str(d / "frames.jsonl"), frames)
    return robot, human, frames


def write_plant_inputs(d, inertia=(1.0, 2.0)):
    plant = {"kind": "decoupled_linear", "inertia_kg_m2": list(inertia), "physics_dt_s": 0.001}
    fileio.dump_json(str(d / "plant.json"), plant)
    gains = GainSchedule.from_impedance(np.array(inertia), omega_n=10.0, zeta=1.0)
    fileio.dump_json(str(d / "gains.json"), gains.to_dict())
    return plant, gains


# ---------------------------------------------------------------- exit codes


def test_usage_errors_exit_two(capsys):
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["delay-curve"]) == 2  # --out is required
    capsys.readouterr()


def test_operation_errors_exit_one_with_json_diagnostic(tmp_path, capsys):
    write_plant_inputs(tmp_path)
    out = tmp_path / "episode.csv"
    rc = main(["simulate", "--plant", str(tmp_path / "nope.json"),
               "--gains", str(tmp_path / "gains.json"), "--out", str(out)])
    assert rc == 1
    diag = json.loads(capsys.readouterr().err)
    assert diag["error"] == "FileNotFoundError"
    assert "nope.json" in diag["message"]
    assert not out.exists()

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = main(["delay-curve", "--config", str(bad), "--out", str(tmp_path / "c.csv")])
    assert rc == 1
    assert json.loads(capsys.readouterr().err)["error"] == "JSONDecodeError"


def test_console_script_is_installed():
    proc = subprocess.run(["extremctl", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "delay-curve" in proc.stdout


# ------------------------------------------------------------ flag parsing


def test_eta_range_parsing():
    assert _parse_etas("0:1:0.5") == [0.0, 0.5, 1.0]
    assert _parse_etas("0.1, 0.9") == [0.1, 0.9]
    # stop is inclusive up to float noise
    got = _parse_etas("0:0.9:0.3")
    np.testing.assert_allclose(got, [0.0, 0.3, 0.6, 0.9], atol=1e-12)
    with pytest.raises(ValueError):
        _parse_etas("0:1")
    with pytest.raises(ValueError):
        _parse_etas("0:1:0")


def test_reference_parsing():
    ref = _parse_reference("sin:0.3,3.14")
    want = make_sinusoid(0.3, 3.14)
    assert ref(0.37) == want(0.37)
    assert _parse_reference("const:0.4")(3.0) == (0.4, 0.0)
    assert _parse_reference("ramp:2.0")(1.5) == (3.0, 2.0)
    with pytest.raises(ValueError):
        _parse_reference("tri:1.0")
    with pytest.raises(ValueError):
        _parse_reference("sin:1.0")


# ------------------------------------------------------- mapping commands


def test_calibrate_map_matches_library(tmp_path):
    robot, human, _ = write_mapping_inputs(tmp_path)
    out = tmp_path / "profile.json"
    rc = main(["calibrate-map", "--neutral", str(tmp_path / "neutral.json"),
               "--robot", str(tmp_path / "robot.json"), "--out", str(out)])
    assert rc == 0
    assert fileio.load_json(str(out)) == calibrate(human, robot).to_dict()


def test_map_preserves_timestamps_and_matches_library(tmp_path):
    _, _, frames = write_mapping_inputs(tmp_path)
    profile_path = tmp_path / "profile.json"
    main(["calibrate-map", "--neutral", str(tmp_path / "neutral.json"),
          "--robot", str(tmp_path / "robot.json"), "--out", str(profile_path)])
    out = tmp_path / "mapped.jsonl"
    rc = main(["map", "--profile", str(profile_path),
               "--frames", str(tmp_path / "frames.jsonl"), "--out", str(out)])
    assert rc == 0
    mapped = fileio.read_linkset_jsonl(str(out))
    assert [ts for ts, _ in mapped] == [0, 100_000_000, 200_000_000]
    prof = CalibrationProfile.from_dict(fileio.load_json(str(profile_path)))
    for (_, got), (_, raw) in zip(mapped, frames):
        want = map_frame(prof, raw)
        for name in ("pelvis", "torso", "left_hand", "right_hand", "left_foot", "right_foot"):
            # repr-float JSON keeps the round trip bit exact
            assert np.array_equal(getattr(got, name).translation, getattr(want, name).translation)
            assert np.array_equal(getattr(got, name).rotation.q, getattr(want, name).rotation.q)


# ------------------------------------------------------- episode commands


def test_simulate_csv_is_byte_stable_and_exact(tmp_path):
    plant_dict, gains = write_plant_inputs(tmp_path)
    out = tmp_path / "episode.csv"
    argv = ["simulate", "--plant", str(tmp_path / "plant.json"),
            "--gains", str(tmp_path / "gains.json"),
            "--ref", "sin:0.3,3.14", "--duration", "1.0", "--out", str(out)]
    assert main(argv) == 0
    first = out.read_bytes()
    assert main(argv) == 0
    assert out.read_bytes() == first

    lines = first.decode().splitlines()
    assert lines[0] == "t_s,q_target_rad_j0,q_measured_rad_j0,q_target_rad_j1,q_measured_rad_j1"
    table = np.loadtxt(str(out), delimiter=",", skiprows=1)
    record = run_episode(
        plant_from_dict(plant_dict), gains, make_sinusoid(0.3, 3.14),
        duration=1.0, control_dt=0.02, filter_alpha=1.0,
    )
    assert table.shape == (1000, 5)
    assert np.array_equal(table[:, 0], record.t)
    for j in range(2):
        assert np.array_equal(table[:, 1 + 2 * j], record.q_target_held[:, j])
        assert np.array_equal(table[:, 2 + 2 * j], record.q[:, j])


def test_simulate_const_reference_settles(tmp_path):
    write_plant_inputs(tmp_path, inertia=(1.0,))
    out = tmp_path / "step.csv"
    main(["simulate", "--plant", str(tmp_path / "plant.json"),
          "--gains", str(tmp_path / "gains.json"),
          "--ref", "const:0.4", "--duration", "1.5", "--out", str(out)])
    table = np.loadtxt(str(out), delimiter=",", skiprows=1)
    assert abs(table[-1, 2] - 0.4) < 1e-3


def test_meta_sidecar_next_to_primary_output(tmp_path):
    write_plant_inputs(tmp_path)
    out = tmp_path / "episode.csv"
    main(["simulate", "--plant", str(tmp_path / "plant.json"),
          "--gains", str(tmp_path / "gains.json"), "--duration", "0.1", "--out", str(out)])
    meta = fileio.load_json(str(out) + ".meta.json")
    assert sorted(meta) == ["command", "created_unix_ns", "parameters"]
    assert meta["command"] == "simulate"
    assert meta["parameters"]["plant"] == str(tmp_path / "plant.json")
    assert meta["created_unix_ns"] > 1_500_000_000 * 10**9
    # wall clock stays out of the primary file
    assert str(meta["created_unix_ns"]) not in out.read_text()


def test_delay_curve_rows(tmp_path):
    out = tmp_path / "curve.csv"
    argv = ["delay-curve", "--etas", "0,0.9", "--duration", "4.0", "--out", str(out)]
    assert main(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "eta,theory_delay_ms,measured_delay_ms,confidence"
    rows = np.loadtxt(str(out), delimiter=",", skiprows=1)
    np.testing.assert_allclose(rows[:, 0], [0.0, 0.9], atol=0)
    np.testing.assert_allclose(rows[:, 1], [200.0, 20.0], atol=1e-9)
    assert abs(rows[0, 2] - 192.7) < 1.0
    assert abs(rows[1, 2] - 28.8) < 1.0
    assert (rows[:, 3] > 0.99).all()
    first = out.read_bytes()
    main(argv)
    assert out.read_bytes() == first


# --------------------------------------------------------------- latency


def test_latency_from_signal_csvs(tmp_path):
    from extremctl.latency import MotionSignal

    t = np.arange(200) / 100.0
    wave = np.sin(2 * np.pi * 1.1 * t) + 0.5 * np.sin(2 * np.pi * 2.7 * t)
    fileio.write_signal_csv(str(tmp_path / "a.csv"), MotionSignal(wave, 100.0))
    fileio.write_signal_csv(str(tmp_path / "b.csv"), MotionSignal(wave.copy(), 100.0, t0=0.07))
    out = tmp_path / "lag.json"
    rc = main(["latency", "--signal-a", str(tmp_path / "a.csv"),
               "--signal-b", str(tmp_path / "b.csv"), "--out", str(out)])
    assert rc == 0
    report = fileio.load_json(str(out))
    assert abs(report["lag_ms"] - 70.0) < 1e-9
    assert report["confidence"] > 0.999
    assert report["low_confidence"] is False
    # stored traces are the standardized overlap, not the raw capture
    assert abs(np.std(report["signal_a"]["values"]) - 1.0) < 1e-6


# -------------------------------------------------------------- pipeline


def test_pipeline_budget_and_signal_dump(tmp_path):
    out = tmp_path / "pipe.json"
    prefix = tmp_path / "pipe_sig"
    argv = ["pipeline", "--duration", "6", "--seed", "5", "--out", str(out),
            "--signals-out", str(prefix)]
    assert main(argv) == 0
    report = fileio.load_json(str(out))
    assert sorted(report) == ["budget", "config"]
    assert report["config"]["seed"] == 5
    budget = report["budget"]
    assert budget["hold_ms"] == 10.0
    assert 20.0 < budget["overall_ms"] < 70.0
    for name in ("_human", "_robot"):
        sig = fileio.read_signal_csv(str(prefix) + name + ".csv")
        assert sig.samples.size == 6000
        assert abs(sig.rate_hz - 1000.0) < 1e-6
    first = out.read_bytes()
    main(argv)
    assert out.read_bytes() == first


def test_pipeline_env_seed_matches_flag(tmp_path, monkeypatch):
    flag_out = tmp_path / "flag.json"
    env_out = tmp_path / "env.json"
    main(["pipeline", "--duration", "6", "--seed", "5", "--out", str(flag_out)])
    monkeypatch.setenv("EXTREMCTL_SEED", "5")
    main(["pipeline", "--duration", "6", "--out", str(env_out)])
    a = fileio.load_json(str(flag_out))
    b = fileio.load_json(str(env_out))
    assert b["config"]["seed"] == 5
    assert a["budget"] == b["budget"]


def test_pipeline_eta_sweep_fits_line(tmp_path):
    out = tmp_path / "sweep.json"
    rc = main(["pipeline", "--duration", "6", "--seed", "5",
               "--eta-sweep", "0,0.45,0.9", "--out", str(out)])
    assert rc == 0
    report = fileio.load_json(str(out))
    assert sorted(report) == ["budgets", "config", "fit"]
    assert [b["eta"] for b in report["budgets"]] == [0.0, 0.45, 0.9]
    control = [b["control_ms"] for b in report["budgets"]]
    assert control[0] > control[1] > control[2]
    assert report["fit"]["r_squared"] > 0.999
    assert 0.5 < report["fit"]["slope"] < 1.5


# ------------------------------------------------------------ config file


def test_config_file_fills_defaults_and_flags_win(tmp_path):
    cfg = tmp_path / "cfg.json"
    fileio.dump_json(str(cfg), {"duration": 4.0, "etas": "0.9"})
    out = tmp_path / "from_cfg.csv"
    assert main(["delay-curve", "--config", str(cfg), "--out", str(out)]) == 0
    rows = np.loadtxt(str(out), delimiter=",", skiprows=1, ndmin=2)
    assert rows.shape[0] == 1 and rows[0, 0] == 0.9

    out2 = tmp_path / "flag_wins.csv"
    main(["delay-curve", "--config", str(cfg), "--etas", "0", "--out", str(out2)])
    rows2 = np.loadtxt(str(out2), delimiter=",", skiprows=1, ndmin=2)
    assert rows2.shape[0] == 1 and rows2[0, 0] == 0.0


# ------------------------------------------------------- gain calibration


def test_calibrate_gains_single_joint(tmp_path):
    fileio.dump_json(str(tmp_path / "plant.json"),
                     {"kind": "decoupled_linear", "inertia_kg_m2": [1.3], "physics_dt_s": 0.002})
    out = tmp_path / "cal.json"
    argv = ["calibrate-gains", "--plant", str(tmp_path / "plant.json"),
            "--envs", "2", "--window", "5", "--sweeps", "1", "--seed", "7",
            "--out", str(out)]
    assert main(argv) == 0
    cal = fileio.load_json(str(out))
    assert sorted(cal) == ["converged", "gains", "history_kp_nm_per_rad", "joints", "sweeps_run"]
    assert cal["sweeps_run"] == 1
    # kp -> m_eff * omega_n^2 with m_eff ~ 1.3
    assert abs(cal["gains"]["kp_nm_per_rad"][0] - 130.0) < 0.02 * 130.0
    meta = fileio.load_json(str(out) + ".meta.json")
    assert meta["parameters"]["seed"] == 7
    first = out.read_bytes()
    main(argv)
    assert out.read_bytes() == first


def test_simulate_accepts_calibration_output_directly(tmp_path):
    """calibrate-gains output feeds simulate --gains without unwrapping."""
    fileio.dump_json(str(tmp_path / "plant.json"),
                     {"kind": "decoupled_linear", "inertia_kg_m2": [1.3], "physics_dt_s": 0.002})
    cal = tmp_path / "cal.json"
    assert main(["calibrate-gains", "--plant", str(tmp_path / "plant.json"),
                 "--envs", "2", "--window", "5", "--sweeps", "1", "--seed", "7",
                 "--out", str(cal)]) == 0
    ep_wrapped = tmp_path / "ep_wrapped.csv"
    assert main(["simulate", "--plant", str(tmp_path / "plant.json"),
                 "--gains", str(cal), "--ref", "const:0.4", "--duration", "2",
                 "--out", str(ep_wrapped)]) == 0
    # same episode from the bare schedule file
    fileio.dump_json(str(tmp_path / "sched.json"), fileio.load_json(str(cal))["gains"])
    ep_bare = tmp_path / "ep_bare.csv"
    assert main(["simulate", "--plant", str(tmp_path / "plant.json"),
                 "--gains", str(tmp_path / "sched.json"), "--ref", "const:0.4",
                 "--duration", "2", "--out", str(ep_bare)]) == 0
    assert ep_wrapped.read_bytes() == ep_bare.read_bytes()
