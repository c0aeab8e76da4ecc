"""Testmodul für den RK4-Integrator und die Rollouts."""
import numpy as np
import pytest

from Reachability.dynamics_operations import dubins3d, failure_predicate
from Reachability.reach_errors import ControllerError, SimError
from Service.controller_service import zero_controller
from Service.sim_service import energy_trace, integrate_error, rk4_step, rollout


def never_fails(_: np.ndarray) -> bool:
    return False


def no_control(_: np.ndarray, __: float) -> tuple[np.ndarray, bool]:
    return np.zeros(1), False


# region ↓ Integrator ↓

def test_rk4_keeps_resting_state():
    def resting(x, u):
        return np.zeros_like(x)

    x0 = np.array([0.3, -0.2])
    np.testing.assert_array_equal(rk4_step(resting, x0, np.zeros(1), 0.1), x0)


def test_rk4_energy_drift_is_small(undamped_pendulum):
    """Ungedämpftes Pendel, u = 0, θ0 = 1, 10 s mit dt = 1e-3: relative Drift < 1e-6."""
    drift = integrate_error(undamped_pendulum, dt=1e-3, duration=10.0)
    assert drift < 1e-6, f"Relative Energiedrift {drift} zu groß"


def test_energy_drift_is_absolute_for_zero_initial_energy(undamped_pendulum):
    """θ0 = π/2 in Ruhe hat Energie 0: die Drift wird absolut gemessen und bleibt endlich."""
    x0 = np.array([np.pi / 2.0, 0.0])
    assert abs(float(undamped_pendulum.energy(x0))) < 1e-12

    drift = integrate_error(undamped_pendulum, dt=1e-3, duration=1.0, x0=x0)

    assert np.isfinite(drift)
    assert drift < 1e-6


def test_rk4_is_fourth_order(undamped_pendulum):
    """Halbierung von dt reduziert die Energiedrift etwa um den Faktor 16."""
    coarse = integrate_error(undamped_pendulum, dt=0.02, duration=10.0)
    fine = integrate_error(undamped_pendulum, dt=0.01, duration=10.0)

    order = np.log2(coarse / fine)

    assert order >= 3.5, f"Beobachtete Ordnung {order} < 3.5"


def test_damped_energy_does_not_increase(pendulum):
    energies = energy_trace(pendulum, dt=0.01, duration=5.0, x0=np.array([1.0, 0.0]))

    assert energies.shape == (501,)
    assert np.all(np.diff(energies) <= 1e-7)
    assert energies[-1] < energies[0]


def test_energy_trace_requires_conserved_quantity():
    with pytest.raises(SimError) as error:
        energy_trace(dubins3d(0.3), dt=0.01, duration=1.0, x0=np.zeros(3))
    assert error.value.code == "sim.conserved"


# endregion

# region ↓ Rollouts ↓

def test_dubins_drives_straight_without_turning():
    """u = 0, θ = 0: nach 10 s mit v = 0.3 liegt das Fahrzeug bei x = 3."""
    trajectory = rollout(dubins3d(0.3), no_control, np.zeros(3), dt=0.01, steps=1000, in_failure=never_fails)

    np.testing.assert_allclose(trajectory.states[-1], [3.0, 0.0, 0.0], atol=1e-9)
    assert trajectory.times[-1] == pytest.approx(10.0)
    assert trajectory.steps == 1000
    assert not trajectory.exited_failure


def test_rollout_marks_first_failure_and_continues():
    in_failure = failure_predicate([0, 1], [1.0, 1.0])

    trajectory = rollout(dubins3d(0.3), no_control, np.array([0.95, 0.0, 0.0]), 0.01, 50, in_failure)

    # 0.05 / 0.3 s bis zum Rand, erster Zustand außerhalb bei t = 0.17
    assert trajectory.first_failure_time == pytest.approx(0.17)
    assert trajectory.states.shape == (51, 3)
    assert trajectory.truncation_reason is None


def test_rollout_stops_at_failure_when_requested():
    in_failure = failure_predicate([0, 1], [1.0, 1.0])

    trajectory = rollout(
        dubins3d(0.3), no_control, np.array([0.95, 0.0, 0.0]), 0.01, 50, in_failure, stop_at_failure=True,
    )

    assert trajectory.truncation_reason == "failure"
    assert trajectory.states.shape == (18, 3)
    assert trajectory.failed[-1]


def test_rollout_records_controller_errors_as_truncation(mocker):
    policy = mocker.Mock(side_effect=[
        (np.zeros(1), True),
        ControllerError("controller.out_of_domain", "außerhalb"),
    ])

    trajectory = rollout(dubins3d(0.3), policy, np.zeros(3), 0.01, 10, never_fails)

    assert trajectory.truncation_reason == "controller.out_of_domain"
    assert trajectory.steps == 1
    assert trajectory.intervened.tolist() == [True]


def test_rollout_wraps_periodic_coordinates():
    def wrap(x):
        x = np.array(x, dtype=float)
        x[2] = -np.pi + np.mod(x[2] + np.pi, 2.0 * np.pi)
        return x

    def turn(_, __):
        return np.array([1.0]), False

    trajectory = rollout(dubins3d(0.3), turn, np.array([0.0, 0.0, 3.0]), 0.1, 5, never_fails, wrap=wrap)

    assert np.all(trajectory.states[:, 2] >= -np.pi) and np.all(trajectory.states[:, 2] < np.pi)


@pytest.mark.parametrize("dt, steps, code", [(0.0, 10, "sim.dt"), (0.1, -1, "sim.steps")])
def test_rollout_rejects_invalid_arguments(dt, steps, code):
    with pytest.raises(SimError) as error:
        rollout(dubins3d(0.3), no_control, np.zeros(3), dt, steps, never_fails)
    assert error.value.code == code


def test_zero_controller_never_intervenes():
    controller = zero_controller(2)
    np.testing.assert_array_equal(controller(np.zeros(3), 0.0), np.zeros(2))

# endregion
