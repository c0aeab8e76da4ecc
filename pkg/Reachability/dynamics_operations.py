"""Modul für die analytischen Systeme und das unsichere steuerungsaffine Modell.

Es enthält:
- Die Abstraktion `ControlAffineDynamics` für Systeme ẋ = f1(x) + f2(x)·u.
- Das inverse Pendel, das Dubins3D-Fahrzeug und ein gestörtes Dubins3D-Fahrzeug,
  das in der Filter-Demo als "wahres" Fahrzeug dient.
- Konstruktoren für unsichere Modelle: das Nullunsicherheits-Modell der
  wahren Dynamik, die Partial-Game-Aufweitung und konstante Schranken.
"""
from abc import ABC, abstractmethod
from typing import Callable, Sequence

import numpy as np
from pydantic import BaseModel

from Reachability.hamiltonian_operations import partial_game_bounds
from Reachability.reach_errors import ModelError
from Reachability.reach_models import (
    AffineEval,
    ControlBox,
    UncertainAffineModel,
    UncertaintyBoundsEval,
)


# region ↓ Abstraktion ↓

class ControlAffineDynamics(ABC):
    """Basisklasse für steuerungsaffine Systeme ẋ = f1(x) + f2(x)·u.

    Alle Methoden sind über führende Achsen gebatcht.
    """
    state_dim: int
    control_dim: int

    @abstractmethod
    def drift(self, x: np.ndarray) -> np.ndarray:
        """Berechnet f1(x), Form ``(..., n)``."""

    @abstractmethod
    def actuation(self, x: np.ndarray) -> np.ndarray:
        """Berechnet f2(x), Form ``(..., n, m)``."""

    def evaluate(self, x: np.ndarray) -> AffineEval:
        """Gibt f1(x) und f2(x) als `AffineEval` zurück."""
        x = np.asarray(x, dtype=float)
        return AffineEval(f1=self.drift(x), f2=self.actuation(x))

    def __call__(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Berechnet ẋ = f1(x) + f2(x)·u."""
        return self.evaluate(x).apply(np.asarray(u, dtype=float))


# endregion

# region ↓ Inverses Pendel ↓

# pylint: disable=too-few-public-methods
class PendulumParams(BaseModel):
    """Physikalische Parameter des inversen Pendels."""
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 9.81
    friction: float = 0.1


class PendulumDynamics(ControlAffineDynamics):
    """Inverses Pendel mit Zustand [θ, θ̇] und Drehmoment u.

    θ̈ = (−b·θ̇ + ½·m·g·l·sinθ − u) / (m·l²/3)
    """
    state_dim = 2
    control_dim = 1

    def __init__(self, params: PendulumParams):
        self.params = params
        self.inertia = params.mass * params.length ** 2 / 3.0

    def drift(self, x: np.ndarray) -> np.ndarray:
        theta, theta_dot = x[..., 0], x[..., 1]
        p = self.params
        theta_ddot = (-p.friction * theta_dot + 0.5 * p.mass * p.gravity * p.length * np.sin(theta)) / self.inertia
        return np.stack([theta_dot, theta_ddot], axis=-1)

    def actuation(self, x: np.ndarray) -> np.ndarray:
        column = np.array([[0.0], [-1.0 / self.inertia]])
        return np.broadcast_to(column, x.shape[:-1] + (2, 1)).copy()

    def energy(self, x: np.ndarray) -> np.ndarray:
        """Mechanische Energie ½·I·θ̇² + ½·m·g·l·cosθ (bei b = 0, u = 0 erhalten)."""
        p = self.params
        return 0.5 * self.inertia * x[..., 1] ** 2 + 0.5 * p.mass * p.gravity * p.length * np.cos(x[..., 0])


def pendulum_truth(params: PendulumParams) -> PendulumDynamics:
    """Erstellt die analytische Pendeldynamik.

    Args:
        params (PendulumParams): Masse, Länge, Erdbeschleunigung und Reibung.

    Raises:
        ModelError: Bei nicht-positiver Masse oder Länge oder negativer Reibung.

    Returns:
        PendulumDynamics: Die steuerungsaffine Dynamik.
    """
    if params.mass <= 0.0 or params.length <= 0.0:
        raise ModelError("pendulum.params", f"Masse und Länge müssen positiv sein: m={params.mass}, l={params.length}")
    if params.friction < 0.0:
        raise ModelError("pendulum.params", f"Reibung darf nicht negativ sein: b={params.friction}")
    return PendulumDynamics(params)


# endregion

# region ↓ Dubins-Fahrzeug ↓

class DubinsDynamics(ControlAffineDynamics):
    """Dubins3D mit Zustand [p_x, p_y, θ], konstanter Geschwindigkeit und Drehrate u.

    Die gestörte Variante skaliert die Drehrate mit ``gain`` und addiert
    eine konstante Drift auf alle drei Komponenten.
    """
    state_dim = 3
    control_dim = 1

    def __init__(self, speed: float, gain: float = 1.0, drift_offset: Sequence[float] = (0.0, 0.0, 0.0)):
        self.speed = speed
        self.gain = gain
        self.drift_offset = np.asarray(drift_offset, dtype=float)

    def drift(self, x: np.ndarray) -> np.ndarray:
        theta = x[..., 2]
        nominal = np.stack(
            [self.speed * np.cos(theta), self.speed * np.sin(theta), np.zeros_like(theta)],
            axis=-1,
        )
        return nominal + self.drift_offset

    def actuation(self, x: np.ndarray) -> np.ndarray:
        column = np.array([[0.0], [0.0], [self.gain]])
        return np.broadcast_to(column, x.shape[:-1] + (3, 1)).copy()


def dubins3d(speed: float) -> DubinsDynamics:
    """Erstellt das nominelle Dubins3D-Modell.

    Raises:
        ModelError: Wenn die Geschwindigkeit nicht positiv ist.
    """
    if speed <= 0.0:
        raise ModelError("dubins.speed", f"Geschwindigkeit muss positiv sein, erhalten {speed}")
    return DubinsDynamics(speed)


def perturbed_dubins3d(speed: float, gain: float, drift: Sequence[float]) -> DubinsDynamics:
    """Erstellt das gestörte Dubins3D-Fahrzeug (simulierte Zuladung).

    Args:
        speed (float): Vorwärtsgeschwindigkeit.
        gain (float): Skalierung der Drehrate (> 0).
        drift (Sequence[float]): Konstante additive Drift [x, y, θ].

    Raises:
        ModelError: Bei nicht-positivem ``gain`` oder falscher Driftlänge.

    Returns:
        DubinsDynamics: Die gestörte Dynamik.
    """
    if gain <= 0.0:
        raise ModelError("dubins.gain", f"gain muss positiv sein, erhalten {gain}")
    if len(drift) != 3:
        raise ModelError("dubins.drift", f"drift benötigt 3 Komponenten, erhalten {len(drift)}")
    if speed <= 0.0:
        raise ModelError("dubins.speed", f"Geschwindigkeit muss positiv sein, erhalten {speed}")
    return DubinsDynamics(speed, gain=gain, drift_offset=drift)


# endregion

# region ↓ Unsichere Modelle ↓

def control_box(lo: Sequence[float], hi: Sequence[float]) -> ControlBox:
    """Erstellt eine Steuerbox aus Listen (prüft, dass der Ursprung enthalten ist)."""
    return ControlBox(lo=np.asarray(lo, dtype=float), hi=np.asarray(hi, dtype=float))


def check_bounds(bounds: UncertaintyBoundsEval) -> UncertaintyBoundsEval:
    """Prüft, dass alle Unsicherheitsintervalle den Ursprung enthalten.

    Raises:
        ModelError: Wenn ein Intervall den Ursprung nicht enthält (kein Clamping).

    Returns:
        UncertaintyBoundsEval: Die unveränderten Schranken.
    """
    for name, lower, upper in (("d1", bounds.d1_lo, bounds.d1_hi), ("d2", bounds.d2_lo, bounds.d2_hi)):
        if np.any(lower > 0.0) or np.any(upper < 0.0) or not np.all(np.isfinite(lower) & np.isfinite(upper)):
            raise ModelError("model.bounds", f"Schranken für {name} enthalten den Ursprung nicht oder sind nicht endlich")
    return bounds


def truth_as_uncertain(truth: ControlAffineDynamics, box: ControlBox) -> UncertainAffineModel:
    """Verpackt eine bekannte Dynamik als unsicheres Modell ohne Unsicherheit.

    Args:
        truth (ControlAffineDynamics): Die analytische Dynamik.
        box (ControlBox): Zulässige Steuerungen.

    Returns:
        UncertainAffineModel: Nominal = truth, alle Schranken null.
    """

    def zero_bounds(x: np.ndarray) -> UncertaintyBoundsEval:
        evaluation = truth.evaluate(x)
        return UncertaintyBoundsEval.zeros(evaluation.f1, evaluation.f2)

    return UncertainAffineModel(nominal=truth.evaluate, bounds=zero_bounds, control_box=box, name="truth")


def with_partial_game(model: UncertainAffineModel) -> UncertainAffineModel:
    """Ersetzt d2·u durch eine steuerungsunabhängige Störung d3 (Partial Game).

    Args:
        model (UncertainAffineModel): Das Ausgangsmodell.

    Returns:
        UncertainAffineModel: Modell mit aufgeweitetem D1 und D2 = 0.
    """

    def widened(x: np.ndarray) -> UncertaintyBoundsEval:
        return partial_game_bounds(model.bounds(x), model.control_box)

    return UncertainAffineModel(
        nominal=model.nominal,
        bounds=widened,
        control_box=model.control_box,
        name="partial_game",
    )


def with_constant_bounds(model: UncertainAffineModel, d1_radius: np.ndarray, name: str = "conformal") -> UncertainAffineModel:
    """Ersetzt die Schranken durch zustandsunabhängige Radien D1 = [−q, q], D2 = 0.

    Args:
        model (UncertainAffineModel): Modell, dessen Nominalteil übernommen wird.
        d1_radius (np.ndarray): Radius q je Zustandskomponente (>= 0).
        name (str): Name des resultierenden Modells.

    Raises:
        ModelError: Bei negativen Radien.

    Returns:
        UncertainAffineModel: Modell mit konstanten Schranken.
    """
    radius = np.asarray(d1_radius, dtype=float)
    if np.any(radius < 0.0):
        raise ModelError("model.radius", f"Radien müssen nicht negativ sein: {radius}")

    def constant(x: np.ndarray) -> UncertaintyBoundsEval:
        evaluation = model.nominal(x)
        hi = np.broadcast_to(radius, evaluation.f1.shape).copy()
        return UncertaintyBoundsEval(
            d1_lo=-hi,
            d1_hi=hi,
            d2_lo=np.zeros_like(evaluation.f2),
            d2_hi=np.zeros_like(evaluation.f2),
        )

    return UncertainAffineModel(nominal=model.nominal, bounds=constant, control_box=model.control_box, name=name)


def failure_predicate(dims: Sequence[int], half_widths: Sequence[float]) -> Callable[[np.ndarray], bool]:
    """Erstellt das Prädikat "x liegt in der Fehlermenge" für Streifen/Quader.

    Args:
        dims (Sequence[int]): Beschränkte Dimensionen.
        half_widths (Sequence[float]): Halbe Breiten je Dimension.

    Returns:
        Callable[[np.ndarray], bool]: True, wenn |x_d| > half_width für ein d.
    """
    dims_array = np.asarray(dims, dtype=int)
    widths = np.asarray(half_widths, dtype=float)

    def in_failure(x: np.ndarray) -> bool:
        return bool(np.any(np.abs(np.asarray(x)[dims_array]) > widths))

    return in_failure


def distance_to_failure(x: np.ndarray, dims: Sequence[int], half_widths: Sequence[float]) -> float:
    """Vorzeichenbehafteter Abstand eines Zustands zum Rand der Fehlermenge."""
    x = np.asarray(x, dtype=float)
    return float(np.min(np.asarray(half_widths, dtype=float) - np.abs(x[np.asarray(dims, dtype=int)])))

# endregion
