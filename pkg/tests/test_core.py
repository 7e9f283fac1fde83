"""Skeleton types: exact moments, discretization, validation, serialization."""

import numpy as np
import pytest

from conftest import make_tent_trajectory
from zzgibbs import (
    Dataset,
    RateEnvelope,
    Trajectory,
    read_skeleton_csv,
    trajectory_discretize,
    trajectory_time_average,
    validate_trajectory,
    write_skeleton_csv,
)


def ramp_trajectory():
    # single segment theta(t) = t on [0, 2]
    return Trajectory(
        times=np.array([0.0]),
        positions=np.array([[0.0]]),
        velocities=np.array([[1.0]]),
        event_kinds=["initial"],
        total_time=2.0,
    )


class TestTimeAverage:
    def test_tent_mean(self):
        assert trajectory_time_average(make_tent_trajectory(), 0, 1, 0.0) == pytest.approx(0.5)

    def test_tent_second_moment(self):
        # int_0^1 t^2 dt + int_0^1 (1-t)^2 dt over T = 2
        got = trajectory_time_average(make_tent_trajectory(), 0, 2, 0.0)
        assert got == pytest.approx(1.0 / 3.0, abs=1e-15)

    def test_linear_ramp_mean(self):
        assert trajectory_time_average(ramp_trajectory(), 0, 1, 0.0) == pytest.approx(1.0)

    def test_burnin_window(self):
        # burn-in half of the ramp: average of t over [1, 2] is 1.5
        assert trajectory_time_average(ramp_trajectory(), 0, 1, 0.5) == pytest.approx(1.5)

    def test_invalid_power(self):
        with pytest.raises(ValueError):
            trajectory_time_average(make_tent_trajectory(), 0, 3, 0.0)

    def test_empty_trajectory_rejected(self):
        empty = Trajectory(
            times=np.array([]),
            positions=np.zeros((0, 1)),
            velocities=np.zeros((0, 1)),
            event_kinds=[],
            total_time=0.0,
        )
        with pytest.raises(ValueError, match="insufficient skeleton"):
            trajectory_time_average(empty, 0, 1, 0.0)

    def test_variance_nonnegative_on_random_skeletons(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            traj = _random_skeleton(rng, dim=2)
            for j in range(2):
                m1 = trajectory_time_average(traj, j, 1, 0.1)
                m2 = trajectory_time_average(traj, j, 2, 0.1)
                assert m2 - m1 * m1 >= -1e-12

    def test_matches_fine_discretization(self):
        rng = np.random.default_rng(3)
        for _ in range(3):
            traj = _random_skeleton(rng, dim=1)
            exact = trajectory_time_average(traj, 0, 1, 0.0)
            samples = trajectory_discretize(traj, traj.total_time * 1e-6)[:, 0]
            assert abs(exact - samples.mean()) < 1e-6


class TestDiscretize:
    def test_tent_half_steps(self):
        got = trajectory_discretize(make_tent_trajectory(), 0.5)[:, 0]
        np.testing.assert_allclose(got, [0.0, 0.5, 1.0, 0.5, 0.0], atol=1e-12)

    def test_single_sample_at_full_step(self):
        traj = make_tent_trajectory()
        got = trajectory_discretize(traj, traj.total_time + 1.0)
        assert got.shape == (1, 1)
        assert got[0, 0] == pytest.approx(0.0)

    def test_quarter_steps_on_ramp(self):
        got = trajectory_discretize(ramp_trajectory(), 0.25)[:, 0]
        np.testing.assert_allclose(got, np.arange(0.0, 2.0 + 1e-9, 0.25), atol=1e-12)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            trajectory_discretize(make_tent_trajectory(), 0.0)


class TestValidate:
    def test_tent_is_valid(self):
        assert validate_trajectory(make_tent_trajectory()).count == 0

    def test_zero_velocity_flagged(self):
        traj = make_tent_trajectory()
        traj.velocities[1, 0] = 0.0
        report = validate_trajectory(traj)
        assert report.count >= 1
        assert any("velocity" in v for v in report.violations)

    def test_decreasing_times_flagged(self):
        traj = make_tent_trajectory()
        bad = Trajectory(
            times=np.array([0.0, 1.0, 0.5]),
            positions=np.vstack([traj.positions, [[0.5]]]),
            velocities=np.vstack([traj.velocities, [[1.0]]]),
            event_kinds=traj.event_kinds + ["refresh"],
            total_time=2.0,
        )
        report = validate_trajectory(bad)
        assert any("decrease" in v for v in report.violations)

    def test_flip_must_change_one_component(self):
        traj = make_tent_trajectory()
        traj.velocities[1] = traj.velocities[0]  # labeled flip, nothing changed
        assert validate_trajectory(traj).count >= 1


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(11)
        traj = _random_skeleton(rng, dim=3)
        path = tmp_path / "skeleton.csv"
        write_skeleton_csv(traj, path)
        back = read_skeleton_csv(path, total_time=traj.total_time)
        np.testing.assert_array_equal(back.times, traj.times)
        np.testing.assert_array_equal(back.positions, traj.positions)
        np.testing.assert_array_equal(back.velocities, traj.velocities)
        assert back.event_kinds == traj.event_kinds

    def test_header_layout(self, tmp_path):
        path = tmp_path / "skeleton.csv"
        write_skeleton_csv(make_tent_trajectory(), path)
        header = path.read_text().splitlines()[0]
        assert header == "k,t,event,theta_1,nu_1"


class TestEnvelopeAndDataset:
    def test_envelope_rejects_negative(self):
        with pytest.raises(ValueError, match="invalid envelope"):
            RateEnvelope(intercepts=np.array([-1.0]), slopes=np.array([0.0]), horizon=1.0)

    def test_dataset_shape_check(self):
        with pytest.raises(ValueError):
            Dataset(responses=np.arange(3), covariates=np.zeros((2, 2)))

    def test_dataset_needs_data(self):
        with pytest.raises(ValueError):
            Dataset(responses=np.array([]))


def _random_skeleton(rng, dim):
    k = int(rng.integers(3, 30))
    gaps = rng.exponential(0.5, size=k)
    times = np.concatenate([[0.0], np.cumsum(gaps)])
    nu = rng.choice([-1.0, 1.0], size=dim)
    pos = [rng.normal(size=dim)]
    vel = [nu.copy()]
    kinds = ["initial"]
    for i in range(k):
        pos.append(pos[-1] + vel[-1] * gaps[i])
        nu = vel[-1].copy()
        j = int(rng.integers(dim))
        nu[j] = -nu[j]
        vel.append(nu)
        kinds.append("flip")
    return Trajectory(
        times=times,
        positions=np.asarray(pos),
        velocities=np.asarray(vel),
        event_kinds=kinds,
        total_time=float(times[-1] + rng.exponential(0.5)),
    )
