import math

import numpy as np
import pytest

from nddeosc.errors import BlowupError, RMinError, ValidationError
from nddeosc.simulate import (
    Evidence, History, classify, detect_zeros, integrate_ndde, write_trajectory, y_transform,
)

from support import load_example, problem_from

SIN = ({"t0": 0, "positive": [{"P": "1", "tau": "pi/2"}]}, "sin(t)", np.sin)
DECAY = ({"t0": 0, "positive": [{"P": "0.5*exp(-0.5)", "tau": "1"}]}, "exp(-t/2)", lambda t: np.exp(-t / 2))
NEUTRAL = ({"t0": 0, "neutral": [{"R": "0.2", "r": "log(2)"}], "positive": [{"P": "0.4", "tau": "log(2)"}],
            "negative": [{"Q": "0.2", "delta": "0"}]}, "exp(-t)", lambda t: np.exp(-t))


def run(fixture, t_end=10.0, dt=1e-3):
    spec, history, _ = fixture
    problem = problem_from(spec, horizon=t_end)
    return problem, integrate_ndde(problem, History.parse(history), t_end, dt)


def max_error(fixture, dt, t_end=10.0):
    _, traj = run(fixture, t_end, dt)
    return float(np.max(np.abs(traj.x - fixture[2](traj.grid))))


@pytest.mark.parametrize("fixture", [SIN, DECAY, NEUTRAL], ids=["sin", "decay", "neutral"])
def test_analytic_solutions(fixture):
    assert max_error(fixture, 1e-3) <= 1e-6


@pytest.mark.parametrize("fixture", [SIN, DECAY, NEUTRAL], ids=["sin", "decay", "neutral"])
def test_fourth_order_convergence(fixture):
    # geometric mean of three successive halvings; see the decisions ledger for why not dt = 1e-3
    e_coarse = max_error(fixture, 0.04)
    e_fine = max_error(fixture, 0.005)
    rate = (e_coarse / e_fine) ** (1 / 3)
    assert 12 <= rate <= 20


def test_grid_and_shapes():
    _, traj = run(SIN, t_end=2.0, dt=0.01)
    assert traj.grid.size == traj.x.size == traj.z.size == 201
    assert traj.grid[0] == 0.0 and traj.grid[-1] == pytest.approx(2.0)


def test_reconstruction_identity_at_nodes():
    problem, traj = run(NEUTRAL, t_end=10.0, dt=0.01)
    lag = math.log(2)
    residual = traj.x - traj.z - 0.2 * traj.x_at(traj.grid - lag)
    assert np.max(np.abs(residual)) < 1e-12


def test_x_at_uses_history_before_start():
    _, traj = run(SIN, t_end=2.0, dt=0.01)
    assert traj.x_at(-1.0) == pytest.approx(math.sin(-1.0), abs=0)
    assert traj.x_at(1.005) == pytest.approx(math.sin(1.005), abs=1e-9)
    with pytest.raises(ValueError):
        traj.x_at(3.0)


def test_zeros_of_sine():
    _, traj = run(SIN, t_end=20.0, dt=0.01)
    zeros = detect_zeros(traj)
    assert zeros[0] == 0.0
    np.testing.assert_allclose(zeros[1:], np.pi * np.arange(1, 7), atol=0.01)
    assert list(traj.zeros) == zeros


def test_zero_detection_is_sign_symmetric():
    _, traj = run(SIN, t_end=20.0, dt=0.01)
    flipped = type(traj)(traj.grid, -traj.x, -traj.z, (), traj.history, traj.dt)
    assert detect_zeros(flipped) == detect_zeros(traj)


def test_no_zeros_for_decay():
    _, traj = run(DECAY, t_end=20.0, dt=0.01)
    assert detect_zeros(traj) == []


def test_example5_simulation_oscillates():
    problem, cfg = load_example(5)
    traj = integrate_ndde(problem, History.parse("1"), 60.0, 0.01)
    zeros = np.array(detect_zeros(traj))
    assert zeros.size >= 6
    gaps = np.diff(zeros[-6:])
    assert gaps.max() / gaps.min() < 3


def test_y_transform_reduces_to_x():
    problem, traj = run(SIN, t_end=5.0, dt=0.01)
    np.testing.assert_array_equal(y_transform(problem, traj), traj.x)


def test_y_transform_of_neutral_fixture():
    problem, traj = run(NEUTRAL, t_end=10.0, dt=1e-3)
    y = y_transform(problem, traj)
    np.testing.assert_allclose(y, 0.4 * np.exp(-traj.grid), atol=1e-4)
    assert np.all(y > 0)
    assert np.all(np.diff(y) <= 0)


def test_classify():
    _, traj = run(SIN, t_end=20.0, dt=0.01)
    assert classify(traj, 10.0).label is Evidence.OSCILLATING
    _, traj = run(DECAY, t_end=20.0, dt=0.01)
    assert classify(traj, 10.0).label is Evidence.NONOSCILLATING
    spec = {"positive": [{"P": "1", "tau": "1"}]}
    damped = integrate_ndde(problem_from(spec, 40), History.parse("1"), 40.0, 0.01)
    result = classify(damped, 20.0)
    assert result.label is Evidence.OSCILLATING
    assert result.sign_changes >= 2


def test_neutral_delay_must_leave_room():
    problem = problem_from({"neutral": [{"R": "0.2", "r": "0.01"}], "positive": [{"P": "1", "tau": "1"}]})
    with pytest.raises(RMinError):
        integrate_ndde(problem, History.parse("1"), 1.0, 0.01)
    with pytest.raises(RMinError):
        integrate_ndde(problem, History.parse("1"), 1.0, 0.001, r_min=0.05)


def test_blowup_guard():
    problem = problem_from({"positive": [{"P": "1", "tau": "1"}], "negative": [{"Q": "400", "delta": "0"}]}, 30)
    with pytest.raises(BlowupError):
        integrate_ndde(problem, History.parse("1"), 30.0, 0.01)


def test_history_validation():
    problem = problem_from(SIN[0], 5)
    with pytest.raises(ValidationError):
        History.parse("log(t)").check(problem, 0.01)


def test_trajectory_export(tmp_path):
    _, traj = run(SIN, t_end=1.0, dt=0.1)
    path = tmp_path / "traj.txt"
    write_trajectory(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t x z"
    assert len(lines) == traj.grid.size + 1
    t, x, z = map(float, lines[5].split(" "))
    assert (t, x) == (pytest.approx(traj.grid[4]), pytest.approx(traj.x[4], rel=1e-11))
