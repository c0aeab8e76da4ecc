"""Service-Modul für den robusten Sicherheitsregler und den Safety-Filter.

Der Regler interpoliert zentrale Differenzen der Wertfunktion multilinear am
Zustand und wertet dort die geschlossene Lösung des Maximin-Spiels aus. Der
Filter gibt die nominelle Steuerung durch, solange V(x) > ε gilt, und
übergibt sonst an den Sicherheitsregler.
"""
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from Reachability.grid_operations import central_gradients, interpolate, interpolate_vector
from Reachability.hamiltonian_operations import optimal_control
from Reachability.reach_errors import ControllerError, GridError
from Reachability.reach_models import ControlBox, ScalarField, SolveResult, UncertainAffineModel, ValueField
from Service.sim_service import Policy

NominalController = Callable[[np.ndarray, float], np.ndarray]


# region ↓ Regler ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class SafetyController:
    """Robuster optimaler Sicherheitsregler zu einer gelösten Wertfunktion.

    ``fields`` ist nach τ aufsteigend sortiert. Bei genau einem Feld ist der
    Regler stationär, sonst wird zur Uhrzeit t das Feld mit τ am nächsten an
    der Restzeit ``horizon − t`` verwendet.
    """
    fields: tuple[ValueField, ...]
    gradients: tuple[np.ndarray, ...]
    model: UncertainAffineModel
    horizon: float

    @property
    def control_box(self) -> ControlBox:
        """Zulässige Steuerungen des Modells."""
        return self.model.control_box

    def field_at(self, t: float = 0.0) -> int:
        """Index des Feldes, das zur Uhrzeit ``t`` gilt."""
        if len(self.fields) == 1:
            return 0
        remaining = max(self.horizon - t, 0.0)
        return int(np.argmin([abs(value.tau - remaining) for value in self.fields]))


def build_safety_controller(result: SolveResult, model: UncertainAffineModel) -> SafetyController:
    """Erstellt den Regler aus einem Solver-Ergebnis.

    Konvergierte Lösungen mit unendlichem Horizont ergeben einen stationären
    Regler, endliche Horizonte nutzen zusätzlich alle Snapshots.
    """
    values = {value.tau: value for value in result.snapshots}
    values[result.final.tau] = result.final
    fields = tuple(values[tau] for tau in sorted(values))
    return SafetyController(
        fields=fields,
        gradients=tuple(central_gradients(value.field) for value in fields),
        model=model,
        horizon=result.final.tau,
    )


def value_at(controller: SafetyController, x: np.ndarray, t: float = 0.0) -> float:
    """Interpolierte Wertfunktion am Zustand ``x``.

    Raises:
        ControllerError: Wenn ``x`` außerhalb des Gitters liegt.
    """
    field = controller.fields[controller.field_at(t)].field
    try:
        return interpolate(field, x)
    except GridError as error:
        raise ControllerError("controller.out_of_domain", error.detail) from error


def safety_control(controller: SafetyController, x: np.ndarray, t: float = 0.0) -> np.ndarray:
    """Optimale Sicherheitssteuerung u* am Zustand ``x``.

    Raises:
        ControllerError: Wenn ``x`` außerhalb des Gitters liegt.

    Returns:
        np.ndarray: u*, stets in der Steuerbox.
    """
    index = controller.field_at(t)
    grid = controller.fields[index].field.grid
    x = np.asarray(x, dtype=float)
    try:
        p = interpolate_vector(grid, controller.gradients[index], x)
    except GridError as error:
        raise ControllerError("controller.out_of_domain", error.detail) from error
    evaluation = controller.model.nominal(x)
    bounds = controller.model.bounds(x)
    return optimal_control(p, evaluation.f2, bounds.d2_lo, bounds.d2_hi, controller.control_box)


def default_threshold(field: ScalarField) -> float:
    """Schaltschwelle ε = max Δx_i · Median der Gradientennorm über alle Knoten."""
    norms = np.linalg.norm(central_gradients(field), axis=-1)
    return float(np.max(field.grid.spacing) * np.median(norms))


# endregion

# region ↓ Filter ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class FilterPolicy:
    """Least-restrictive Filter um einen nominellen Regler."""
    nominal: NominalController
    controller: SafetyController
    threshold: float

    def __post_init__(self):
        if math.isnan(self.threshold) or self.threshold < 0.0:
            raise ControllerError("controller.threshold", f"Schwelle muss >= 0 sein, erhalten {self.threshold}")


def filtered_control(policy: FilterPolicy, x: np.ndarray, t: float = 0.0) -> tuple[np.ndarray, bool]:
    """Nominelle Steuerung bei V(x) > ε, sonst Sicherheitssteuerung.

    Returns:
        tuple[np.ndarray, bool]: Die Steuerung und ob eingegriffen wurde.
    """
    if value_at(policy.controller, x, t) > policy.threshold:
        return np.asarray(policy.nominal(x, t), dtype=float), False
    return safety_control(policy.controller, x, t), True


# endregion

# region ↓ Regler für Rollouts ↓

def safety_policy(controller: SafetyController) -> Policy:
    """Reiner Sicherheitsregler, jeder Schritt gilt als Eingriff."""
    return lambda x, t: (safety_control(controller, x, t), True)


def filter_policy(policy: FilterPolicy) -> Policy:
    """Gefilterter Regler für `rollout`."""
    return lambda x, t: filtered_control(policy, x, t)


def zero_controller(control_dim: int) -> NominalController:
    """Nomineller Regler π(x) = 0."""
    zero = np.zeros(control_dim)
    return lambda x, t: zero


def constant_controller(u: np.ndarray) -> NominalController:
    """Nomineller Regler mit konstanter Steuerung."""
    u = np.asarray(u, dtype=float)
    return lambda x, t: u


def random_controller(box: ControlBox, seed: int) -> NominalController:
    """Nomineller Regler mit gleichverteilter Zufallssteuerung je Aufruf."""
    rng = np.random.default_rng(seed)
    return lambda x, t: rng.uniform(box.lo, box.hi)

# endregion
