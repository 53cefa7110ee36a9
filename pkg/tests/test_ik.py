import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaitkin import body_model as bm
from gaitkin import ik, synth
from gaitkin.errors import UnconstrainedError
from gaitkin.io_formats import MarkerTrajectorySet


_SHORT = synth.generate_gait(synth.GaitRecipe(n_strides=1))


@pytest.fixture(scope="module")
def frame(scene):
    f = 137
    return scene.poses[f], scene.markers.positions[f]


def test_cost_zero_at_exact_fit(model, frame):
    q, obs = frame
    assert ik.ik_cost(model, q, obs) == pytest.approx(0.0, abs=1e-24)


def test_cost_single_offset(model, frame):
    q, obs = frame
    obs = obs.copy()
    obs[3] += [0.0, 0.01, 0.0]
    assert ik.ik_cost(model, q, obs) == pytest.approx(1e-4, rel=1e-9)


def test_cost_linear_in_weights(model, frame, rng):
    q, obs = frame
    obs = obs + rng.normal(0, 0.01, obs.shape)
    w = rng.uniform(0.5, 2.0, len(model.marker_names))
    assert ik.ik_cost(model, q, obs, 2 * w) == pytest.approx(2 * ik.ik_cost(model, q, obs, w), rel=1e-12)


def test_cost_accepts_named_markers(model, frame):
    q, obs = frame
    named = dict(zip(model.marker_names, obs))
    named["RTOE"] = named["RTOE"] + [0.02, 0.0, 0.0]
    assert ik.ik_cost(model, q, named) == pytest.approx(4e-4, rel=1e-9)


def test_cost_all_gapped(model, frame):
    q, obs = frame
    with pytest.raises(UnconstrainedError):
        ik.ik_cost(model, q, np.full_like(obs, np.nan))


def test_jacobian_shape(model, frame):
    q, _ = frame
    assert ik.marker_jacobian(model, q).shape == (36, 16)


def test_fixed_point(model, frame):
    q, obs = frame
    res = ik.solve_frame(model, obs, initial_pose=q)
    assert res.converged
    assert res.rms_error < 1e-9
    assert res.iterations <= 1
    np.testing.assert_allclose(res.pose.values, q, atol=1e-9)


def test_perturbed_start_recovers_pose(model, frame):
    q, obs = frame
    start = q + np.where(model.rotational, 5.0, 0.0)
    res = ik.solve_frame(model, obs, initial_pose=start)
    assert res.converged
    assert np.abs(res.pose.values - q)[model.rotational].max() < 0.01


def test_warm_start_independence(model, frame):
    q, obs = frame
    a = ik.solve_frame(model, obs)  # neutral start
    b = ik.solve_frame(model, obs, initial_pose=q + np.where(model.rotational, -4.0, 0.02))
    assert a.converged and b.converged
    assert np.abs(a.pose.values - b.pose.values).max() < 1e-4


def test_three_markers_unconstrained(model, frame):
    _, obs = frame
    obs = obs.copy()
    obs[3:] = np.nan
    with pytest.raises(UnconstrainedError):
        ik.solve_frame(model, obs)


def test_gapped_markers_excluded(model, frame):
    q, obs = frame
    obs = obs.copy()
    obs[[4, 9]] = np.nan
    res = ik.solve_frame(model, obs, initial_pose=q + 1.0)
    assert np.isnan(res.per_marker_residuals[[4, 9]]).all()
    assert np.abs(res.pose.values - q).max() < 1e-6


@given(st.integers(0, 2**31 - 1))
def test_rms_consistent_with_residuals(seed):
    rng = np.random.default_rng(seed)
    model = bm.default_model()
    q = np.zeros(16)
    q[1] = 0.95
    obs = bm.forward_kinematics_array(model, q)[0] + rng.normal(0, 0.005, (12, 3))
    obs[rng.random(12) < 0.2] = np.nan
    if np.isfinite(obs).all(axis=1).sum() < ik.MIN_MARKERS:
        return
    res = ik.solve_frame(model, obs, initial_pose=q)
    r = res.per_marker_residuals
    used = np.isfinite(r)
    assert res.rms_error >= 0
    assert abs(res.rms_error - np.sqrt(np.mean(r[used] ** 2))) < 1e-12


def test_cost_non_increasing_over_iterations(model, frame, rng):
    q, obs = frame
    obs = obs + rng.normal(0, 0.004, obs.shape)
    start = q + np.where(model.rotational, 8.0, 0.05)
    costs = [ik.solve_frame(model, obs, settings=ik.IkSettings(max_iterations=k),
                            initial_pose=start).cost for k in range(1, 25)]
    assert np.all(np.diff(costs) <= 0)


def test_weights_override(model, frame):
    q, obs = frame
    obs = obs.copy()
    obs[0] += [0.05, 0.0, 0.0]  # corrupt RASIS, then give it zero weight
    res = ik.solve_frame(model, obs, settings=ik.IkSettings(weights={"RASIS": 0.0}),
                         initial_pose=q)
    assert np.isnan(res.per_marker_residuals[0])
    assert np.abs(res.pose.values - q).max() < 1e-6


@given(st.integers(0, 2**31 - 1))
def test_rigid_transform_leaves_joint_angles(seed):
    scene = _SHORT
    model = scene.model
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    R, t = Q * np.sign(np.linalg.det(Q)), rng.uniform(-5, 5, 3)
    frames = scene.markers.slice_frames(0, 3)
    a = ik.solve_trajectory(model, frames)
    b = ik.solve_trajectory(model, frames.replace(positions=frames.positions @ R.T + t))
    qb = ik.poses_array(b, model)
    obl = model.coordinate_names.index("pelvis_obliquity")
    if np.abs(qb[:, obl]).max() > 85:  # near the root-angle singularity
        return
    assert all(r.converged for r in a + b)
    joints = [i for i, n in enumerate(model.coordinate_names) if not n.startswith("pelvis")]
    assert np.abs(ik.poses_array(a, model)[:, joints] - qb[:, joints]).max() < 1e-6


def test_settings_validation():
    with pytest.raises(ValueError):
        ik.IkSettings(max_iterations=0)
    with pytest.raises(ValueError):
        ik.IkSettings(cost_tolerance=0.0)


# -- trajectories ----------------------------------------------------------------

def test_constant_markers_give_identical_poses(model, frame):
    _, obs = frame
    traj = MarkerTrajectorySet(100.0, model.marker_names, np.repeat(obs[None], 10, axis=0))
    poses = ik.poses_array(ik.solve_trajectory(model, traj), model)
    assert np.abs(poses - poses[0]).max() < 1e-9


def test_failed_frames_recorded_not_raised(model, scene):
    traj = scene.markers.slice_frames(0, 20)
    pos = traj.positions.copy()
    pos[5, 2:] = np.nan
    results = ik.solve_trajectory(model, traj.replace(positions=pos))
    assert len(results) == 20
    assert results[5].pose is None and not results[5].converged
    assert all(r.converged for i, r in enumerate(results) if i != 5)
    assert np.isnan(ik.poses_array(results, model)[5]).all()


def test_experimental_labels_through_correspondence(model, scene):
    traj = scene.markers.slice_frames(0, 5)
    renamed = traj.replace(labels=tuple(f"exp_{n}" for n in traj.labels))
    corr = bm.MarkerCorrespondence(tuple((n, f"exp_{n}", 1.0) for n in model.marker_names))
    results = ik.solve_trajectory(model, renamed, corr)
    np.testing.assert_allclose(ik.poses_array(results, model), scene.poses[:5], atol=1e-6)


def test_noisy_oracle_knee_regression(model, scene):
    # regression bound: knee RMS deviation under 3 mm marker noise (measured ~0.8 deg)
    rng = np.random.default_rng(0)
    noisy = scene.markers.replace(
        positions=scene.markers.positions + rng.normal(0, 0.003, scene.markers.positions.shape))
    poses = ik.poses_array(ik.solve_trajectory(model, noisy), model)
    for c in ("knee_angle_r", "knee_angle_l"):
        i = model.coordinate_names.index(c)
        assert np.sqrt(np.mean((poses[:, i] - scene.poses[:, i]) ** 2)) < 2.0
