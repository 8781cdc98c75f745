import math
import os
from pathlib import Path

import numpy as np
import pytest

import flowservo as fsv

SCENARIOS = Path(os.environ.get("FLOWSERVO_SCENARIO_DIR", Path(__file__).resolve().parents[2] / "scenarios"))


def test_radial_field_values():
    r = fsv.radial_flow_field(480, 640, 10.0)
    assert r.shape == (480, 640, 2)
    np.testing.assert_allclose(r[0, 320], [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(r[240, 0], [0.0, -10.0], atol=1e-12)
    unit = fsv.radial_flow_field(192, 256, 1.0)
    mag = np.hypot(unit[..., 0], unit[..., 1])
    mag[96, 128] = 1.0
    np.testing.assert_allclose(mag, 1.0, atol=1e-12)


def test_desired_flow_is_zero_off_mask():
    r = fsv.radial_flow_field(48, 64)
    mask = np.zeros((48, 64), np.uint8)
    mask[:, :20] = 1
    d = fsv.desired_flow(r, mask)
    assert np.all(d[:, 20:] == 0)
    np.testing.assert_array_equal(d[:, :20], r[:, :20])


def test_render_and_analytic_flow():
    scene = fsv.Scene([fsv.Building(1, [20, -5, 0], [30, 5, 20])])
    pose = fsv.Pose([0, 0, 10], 0.0)
    depth, ids = fsv.render(scene, pose)
    assert depth.shape == (192, 256)
    assert depth[96, 128] == pytest.approx(20.0)
    assert ids[96, 128] == 1
    nxt = fsv.integrate_pose(pose, fsv.VelocityCommand(1.0), 0.1)
    flow, valid = fsv.analytic_flow(pose, nxt, depth)
    assert flow.shape == (192, 256, 2)
    assert valid[96, 128] == 1 and valid[0, 0] == 0


def test_predict_flow_matches_interaction_matrix():
    depth = np.full((192, 256), 12.0)
    cmd = fsv.VelocityCommand(0.0, 1.0, 0.0, 0.0)
    f = fsv.predict_flow(depth, [cmd])
    # moving left shifts the scene right by fx * dt / Z
    assert f[96, 128, 1] == pytest.approx(128 * 0.1 / 12.0)
    L = fsv.interaction_matrix(0.0, 0.0, 12.0)
    assert L.shape == (2, 6)


def test_cem_recovers_a_bowl_minimum():
    cfg = fsv.CemConfig()
    cfg.population, cfg.elites, cfg.iterations = 200, 20, 10
    cfg.init_std = fsv.VelocityCommand(2, 2, 1, 0.5)
    target = np.array([1.0, -0.5, 0.3, 0.2])
    res = fsv.cem_optimize(lambda seq: float(np.sum((np.array(seq[0].as_array()) - target) ** 2)), cfg)
    np.testing.assert_allclose(res.best_sequence[0].as_array(), target, atol=0.05)
    assert all(b <= a for a, b in zip(res.trace, res.trace[1:]))


def test_left_mask_steers_right():
    mask = np.zeros((192, 256), np.uint8)
    mask[:, :128] = 1
    res = fsv.servo_command(np.full((192, 256), 20.0), mask)
    assert res.best_sequence[0].v_left < 0


def test_flo_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    f = rng.normal(size=(5, 7, 2))
    fsv.write_flo(f, tmp_path / "a.flo")
    np.testing.assert_array_equal(fsv.read_flo(tmp_path / "a.flo"), f.astype(np.float32).astype(np.float64))


def test_scenario_round_trip_and_errors():
    sc = fsv.load_scenario(SCENARIOS / "01_head_on.json")
    assert fsv.parse_scenario(sc.to_json()) == sc
    with pytest.raises(fsv.ConfigError, match="unknown key"):
        fsv.parse_scenario('{"start": {"position": [0,0,10]}, "goal": [1,0,10], "bogus": 1}')


def test_episode_reaches_goal_in_empty_scene():
    sc = fsv.load_scenario(SCENARIOS / "07_empty.json")
    r = fsv.run_episode(sc, "ours")
    assert r.outcome == "Success"
    traj = r.trajectory()
    assert traj["position"].shape == (r.steps, 3)
    assert math.isinf(r.min_dist)
    assert r.traj_length == pytest.approx(np.sum(np.linalg.norm(np.diff(traj["position"], axis=0), axis=1)))


def test_run_suite_tallies(tmp_path):
    paths = [SCENARIOS / "07_empty.json", SCENARIOS / "08_distant.json"]
    s = fsv.run_suite(paths, ["radial-fb"], tmp_path, write_files=False)
    assert s["successes"] == {"radial-fb": 2}
    assert [e["scenario"] for e in s["episodes"]] == ["07_empty", "08_distant"]
