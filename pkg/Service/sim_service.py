"""Service-Modul für Rollouts der wahren Dynamik.

Es stellt den RK4-Integrator, den Rollout unter beliebigen Reglern mit
Fehlererkennung und die Energieprüfung des Integrators bereit.
"""
import math
from typing import Callable

import numpy as np

from Config.logging_config import get_logger
from Reachability.reach_errors import ReachabilityError, SimError
from Service.service_models import Trajectory

logger = get_logger(__name__)

# Regler: (Zustand, Zeit) -> (Steuerung, eingegriffen)
Policy = Callable[[np.ndarray, float], tuple[np.ndarray, bool]]
VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Unterhalb dieser Anfangsenergie wird die Drift absolut gemessen
ENERGY_ATOL = 1e-9


def rk4_step(dynamics: VectorField, x: np.ndarray, u: np.ndarray, dt: float) -> np.ndarray:
    """Ein klassischer Runge-Kutta-Schritt vierter Ordnung mit gehaltener Steuerung.

    Über führende Achsen gebatcht.
    """
    k1 = dynamics(x, u)
    k2 = dynamics(x + 0.5 * dt * k1, u)
    k3 = dynamics(x + 0.5 * dt * k2, u)
    k4 = dynamics(x + dt * k3, u)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rollout(
        truth: VectorField,
        policy: Policy,
        x0: np.ndarray,
        dt: float,
        steps: int,
        in_failure: Callable[[np.ndarray], bool],
        stop_at_failure: bool = False,
        wrap: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Trajectory:
    """Simuliert die wahre Dynamik unter einem Regler (Zero-Order-Hold je Schritt).

    Die Fehlermenge wird an jedem Zustand geprüft. Ohne ``stop_at_failure``
    läuft die Trajektorie bis zum Ende weiter und markiert nur den ersten
    Fehlerzeitpunkt. Wirft der Regler einen fachlichen Fehler (z.B. Zustand
    außerhalb des Gitters), endet die Trajektorie mit dem Grund.

    Args:
        truth (VectorField): ẋ = f(x, u).
        policy (Policy): Der Regler.
        x0 (np.ndarray): Startzustand.
        dt (float): Schrittweite (> 0).
        steps (int): Anzahl der Schritte.
        in_failure (Callable): Prädikat der Fehlermenge.
        stop_at_failure (bool): Abbruch beim ersten Fehlerzustand.
        wrap (Callable | None): Abbildung periodischer Koordinaten.

    Raises:
        SimError: Bei ``dt <= 0`` oder negativer Schrittzahl.

    Returns:
        Trajectory: Die aufgezeichnete Trajektorie.
    """
    if dt <= 0.0:
        raise SimError("sim.dt", f"dt muss positiv sein, erhalten {dt}")
    if steps < 0:
        raise SimError("sim.steps", f"steps darf nicht negativ sein, erhalten {steps}")
    x = np.asarray(x0, dtype=float)
    if wrap is not None:
        x = wrap(x)
    states = [x]
    controls: list[np.ndarray] = []
    intervened: list[bool] = []
    failed = [in_failure(x)]
    reason = None
    for k in range(steps):
        if stop_at_failure and failed[-1]:
            reason = "failure"
            break
        t = k * dt
        try:
            u, flag = policy(x, t)
        except ReachabilityError as error:
            reason = error.code
            logger.debug(f"Rollout bei t = {t:.3f} abgebrochen: {error}")
            break
        x = rk4_step(truth, x, np.asarray(u, dtype=float), dt)
        if wrap is not None:
            x = wrap(x)
        controls.append(np.asarray(u, dtype=float))
        intervened.append(bool(flag))
        states.append(x)
        failed.append(in_failure(x))

    failed_array = np.asarray(failed, dtype=bool)
    first = int(np.argmax(failed_array)) if failed_array.any() else None
    control_dim = controls[0].shape[0] if controls else 0
    return Trajectory(
        times=dt * np.arange(len(states)),
        states=np.asarray(states),
        controls=np.asarray(controls).reshape(len(controls), control_dim),
        intervened=np.asarray(intervened, dtype=bool),
        failed=failed_array,
        first_failure_time=None if first is None else first * dt,
        truncation_reason=reason,
    )


def energy_trace(truth, dt: float, duration: float, x0: np.ndarray) -> np.ndarray:
    """Energieverlauf der ungesteuerten Dynamik (u = 0).

    Args:
        truth: Dynamik mit einer Methode ``energy(x)`` (z.B. das Pendel).
        dt (float): Schrittweite.
        duration (float): Simulationsdauer in Sekunden.
        x0 (np.ndarray): Startzustand.

    Raises:
        SimError: Wenn die Dynamik keine Energie definiert.

    Returns:
        np.ndarray: Energie an jedem Zeitpunkt, Länge ``round(duration/dt) + 1``.
    """
    if not hasattr(truth, "energy"):
        raise SimError("sim.conserved", f"{type(truth).__name__} definiert keine Erhaltungsgröße")
    if dt <= 0.0:
        raise SimError("sim.dt", f"dt muss positiv sein, erhalten {dt}")
    steps = int(round(duration / dt))
    x = np.asarray(x0, dtype=float)
    u = np.zeros(truth.control_dim)
    energies = [float(truth.energy(x))]
    for _ in range(steps):
        x = rk4_step(truth, x, u, dt)
        energies.append(float(truth.energy(x)))
    return np.asarray(energies)


def integrate_error(truth, dt: float, duration: float = 10.0, x0: np.ndarray | None = None) -> float:
    """Maximale relative Drift der Erhaltungsgröße über ``duration`` Sekunden.

    Sinnvoll nur für konservative Systeme (ungedämpftes Pendel mit u = 0).
    Bei Anfangsenergie (nahe) null wird die absolute Drift zurückgegeben.
    """
    x0 = np.array([1.0, 0.0]) if x0 is None else x0
    energies = energy_trace(truth, dt, duration, x0)
    drift = float(np.max(np.abs(energies - energies[0])))
    reference = abs(float(energies[0]))
    if math.isclose(reference, 0.0, abs_tol=ENERGY_ATOL):
        return drift
    return drift / reference
