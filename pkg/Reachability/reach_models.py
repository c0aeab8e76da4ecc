"""Modul zur Definition der Datentypen des numerischen Kerns.

Definierte Modelle:
- `Grid`: Rechtwinkliges Berechnungsgitter mit Randbedingungen je Dimension.
- `ScalarField`: Ein Skalar pro Gitterknoten (z.B. l(x) oder V(x, t)).
- `GradientField`: Einseitige Differenzen (links/rechts) pro Knoten und Dimension.
- `ControlBox`: Hyperquader der zulässigen Steuerungen.
- `AffineEval`: Auswertung f1(x), f2(x) eines steuerungsaffinen Modells.
- `UncertaintyBoundsEval`: Intervallschranken für d1(x) und d2(x).
- `UncertainAffineModel`: Nominalmodell plus Unsicherheitsschranken.
- `ModelTable`: Auf dem Gitter vorberechnetes Modell (Cache für den Solver).
- `GamePoint` / `GameSolution`: Ein- und Ausgabe des Maximin-Spiels.
- `ValueField`, `StepRecord`, `SolveConfig`, `SolveResult`: Ein- und Ausgaben des Solvers.

Alle Arrays sind ``numpy``-Arrays. Auswertungen sind über führende Achsen
gebatcht: ein Zustand hat die Form ``(..., n)``, f2 die Form ``(..., n, m)``.
"""
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from Reachability.reach_errors import GridError, ModelError


# region ↓ Gitter und Felder ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class Grid:
    """Rechtwinkliges Gitter über dem Zustandsraum.

    Periodische Dimensionen decken ``[lo, hi)`` mit ``counts`` Knoten ab,
    der Knoten bei ``hi`` wird nicht dupliziert.
    """
    lo: np.ndarray
    hi: np.ndarray
    counts: tuple[int, ...]
    periodic: tuple[bool, ...]

    @property
    def ndim(self) -> int:
        """Anzahl der Zustandsdimensionen."""
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        """Form der Knotenarrays."""
        return tuple(self.counts)

    @property
    def num_nodes(self) -> int:
        """Gesamtzahl der Knoten."""
        return int(np.prod(self.counts))

    @cached_property
    def spacing(self) -> np.ndarray:
        """Gitterweite Δx je Dimension."""
        counts = np.asarray(self.counts, dtype=float)
        periodic = np.asarray(self.periodic, dtype=bool)
        return (self.hi - self.lo) / np.where(periodic, counts, counts - 1.0)

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        """Koordinaten der Knoten je Dimension."""
        return tuple(
            self.lo[i] + self.spacing[i] * np.arange(self.counts[i])
            for i in range(self.ndim)
        )

    @cached_property
    def states(self) -> np.ndarray:
        """Zustände aller Knoten als Array der Form ``(*counts, n)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def coordinate(self, index: tuple[int, ...]) -> np.ndarray:
        """Gibt die Koordinate des Knotens mit dem Multiindex ``index`` zurück."""
        return self.lo + self.spacing * np.asarray(index, dtype=float)


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class ScalarField:
    """Ein endlicher Skalar pro Gitterknoten."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridError(
                "field.shape",
                f"Feldform {self.values.shape} passt nicht zum Gitter {self.grid.shape}",
            )
        if not np.all(np.isfinite(self.values)):
            raise GridError("field.nonfinite", "Feld enthält NaN oder Inf")


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class GradientField:
    """Einseitige Differenzenquotienten, Form ``(*counts, n)``."""
    grid: Grid
    left: np.ndarray
    right: np.ndarray


# endregion

# region ↓ Modelle ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class ControlBox:
    """Hyperquader der zulässigen Steuerungen, enthält den Ursprung."""
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        if self.lo.shape != self.hi.shape:
            raise ModelError("control.shape", "Untere und obere Steuerschranke haben verschiedene Längen")
        if np.any(self.lo > 0.0) or np.any(self.hi < 0.0):
            raise ModelError(
                "control.origin",
                f"Steuerbox [{self.lo}, {self.hi}] enthält den Ursprung nicht",
            )

    @property
    def dim(self) -> int:
        """Anzahl der Steuerdimensionen."""
        return int(self.lo.shape[0])

    @property
    def magnitude(self) -> np.ndarray:
        """max(|u̲_j|, |ū_j|) je Steuerdimension."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, u: np.ndarray) -> bool:
        """Prüft die (abgeschlossene) Zugehörigkeit einer Steuerung."""
        return bool(np.all(u >= self.lo) and np.all(u <= self.hi))


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class AffineEval:
    """Auswertung f1(x) und f2(x) eines steuerungsaffinen Modells."""
    f1: np.ndarray
    f2: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Berechnet f1(x) + f2(x)·u."""
        return self.f1 + np.einsum("...ij,...j->...i", self.f2, u)


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class UncertaintyBoundsEval:
    """Intervallschranken [d̲1, d̄1] und [d̲2, d̄2] an einem oder mehreren Zuständen."""
    d1_lo: np.ndarray
    d1_hi: np.ndarray
    d2_lo: np.ndarray
    d2_hi: np.ndarray

    @classmethod
    def zeros(cls, f1: np.ndarray, f2: np.ndarray) -> "UncertaintyBoundsEval":
        """Erzeugt Nullschranken in der Form einer gegebenen Auswertung."""
        return cls(
            d1_lo=np.zeros_like(f1),
            d1_hi=np.zeros_like(f1),
            d2_lo=np.zeros_like(f2),
            d2_hi=np.zeros_like(f2),
        )


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class UncertainAffineModel:
    """Das unsichere Modell f̂(x, u, d1, d2) = f̄1 + d1 + (f̄2 + d2)·u.

    ``nominal`` und ``bounds`` sind über führende Achsen gebatcht.
    """
    nominal: Callable[[np.ndarray], AffineEval]
    bounds: Callable[[np.ndarray], UncertaintyBoundsEval]
    control_box: ControlBox
    name: str = "model"


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class ModelTable:
    """Auf allen Gitterknoten vorberechnetes unsicheres Modell."""
    grid: Grid
    nominal: AffineEval
    bounds: UncertaintyBoundsEval
    control_box: ControlBox
    dissipation: np.ndarray
    name: str = "model"


# endregion

# region ↓ Spiel ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class GamePoint:
    """Ein Punkt des Maximin-Spiels: Zustand, Kostate und Modellauswertung."""
    x: np.ndarray
    p: np.ndarray
    nominal: AffineEval
    bounds: UncertaintyBoundsEval
    control_box: ControlBox


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class GameSolution:
    """Lösung (u*, d1*, d2*) des Spiels und der zugehörige Hamiltonwert."""
    u_star: np.ndarray
    d1_star: np.ndarray
    d2_star: np.ndarray
    h_value: np.ndarray


# endregion

# region ↓ Solver ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class ValueField:
    """Wertfunktion V zur Rückwärtszeit τ (Sekunden ab Endbedingung)."""
    field: ScalarField
    tau: float


# pylint: disable=too-few-public-methods
class StepRecord(BaseModel):
    """Ein Eintrag des Schrittprotokolls."""
    tau: float
    dt: float
    residual: float


# pylint: disable=too-few-public-methods
class SolveConfig(BaseModel):
    """Einstellungen für die Lösung der HJI-Variationsungleichung.

    ``horizon`` darf ``math.inf`` sein (Lösen bis zur Konvergenz).
    """
    model_config = ConfigDict(extra="forbid")

    horizon: float = 0.7
    cfl: float = 0.5
    convergence_tol: float = 1e-3
    max_steps: int = 20000
    snapshot_times: list[float] = []

    @field_validator("cfl")
    @classmethod
    def check_cfl(cls, value: float) -> float:
        """Die CFL-Zahl muss in (0, 1] liegen."""
        if not 0.0 < value <= 1.0:
            raise ValueError("cfl muss in (0, 1] liegen")
        return value

    @field_validator("horizon")
    @classmethod
    def check_horizon(cls, value: float) -> float:
        """Der Horizont ist nicht negativ."""
        if math.isnan(value) or value < 0.0:
            raise ValueError("horizon muss >= 0 sein")
        return value

    @model_validator(mode="after")
    def check_tolerance(self) -> "SolveConfig":
        """Für einen unendlichen Horizont wird eine positive Toleranz benötigt."""
        if math.isinf(self.horizon) and self.convergence_tol <= 0.0:
            raise ValueError("convergence_tol muss > 0 sein, wenn horizon unendlich ist")
        return self


# pylint: disable=too-few-public-methods
@dataclass(eq=False)
class SolveResult:
    """Ergebnis eines Solver-Laufs."""
    final: ValueField
    snapshots: list[ValueField] = field(default_factory=list)
    step_log: list[StepRecord] = field(default_factory=list)
    converged: bool = False

# endregion
