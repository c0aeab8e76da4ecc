"""Modul zur Definition der Datentypen der Service-Schicht.

Definierte Modelle:
- `Dataset`: Zeilen (x, u, ẋ) mit Split-Markierung.
- `Trajectory`: Ergebnis eines Rollouts.
- `ConformalBound`: Zustandsunabhängige Radien der Conformal-Baseline.
- `MemberLosses`: Abschließende Verluste eines Ensemble-Mitglieds.
- `SafeSetReport`: Kennzahlen einer sicheren Menge gegenüber der Ground Truth.
- `FilterDemoReport`: Zusammenfassung der Filter-Demo.
"""
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel

# Gültige Split-Markierungen eines Datensatzes
SPLITS = ("train", "validation", "calibration")


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class Dataset:
    """Beobachtete Übergänge, eine Zeile je besuchtem (x, u).

    ``trajectory`` ordnet jede Zeile ihrem Rollout zu; ohne Zuordnung gilt
    jede Zeile als eigene Trajektorie.
    """
    x: np.ndarray
    u: np.ndarray
    xdot: np.ndarray
    split: np.ndarray
    trajectory: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @property
    def trajectory_ids(self) -> np.ndarray:
        """Trajektorien-Nummer je Zeile."""
        if self.trajectory is None:
            return np.arange(len(self))
        return np.asarray(self.trajectory, dtype=int)

    def take(self, rows: np.ndarray, split: np.ndarray | None = None) -> "Dataset":
        """Gibt die Zeilen ``rows`` zurück, optional mit neuen Split-Markierungen."""
        return Dataset(
            x=self.x[rows],
            u=self.u[rows],
            xdot=self.xdot[rows],
            split=self.split[rows] if split is None else split,
            trajectory=None if self.trajectory is None else self.trajectory[rows],
        )

    @property
    def state_dim(self) -> int:
        """Anzahl der Zustandsdimensionen."""
        return int(self.x.shape[1])

    @property
    def control_dim(self) -> int:
        """Anzahl der Steuerdimensionen."""
        return int(self.u.shape[1])

    def subset(self, split: str) -> "Dataset":
        """Gibt nur die Zeilen mit der Markierung ``split`` zurück."""
        return self.take(self.split == split)


# pylint: disable=too-few-public-methods
@dataclass(eq=False)
class Trajectory:
    """Zustände zu festen Zeitpunkten und die dazwischen gehaltenen Steuerungen.

    ``states`` und ``failed`` haben eine Zeile mehr als ``controls`` und
    ``intervened``: die Steuerung k wirkt zwischen ``times[k]`` und ``times[k+1]``.
    """
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    intervened: np.ndarray
    failed: np.ndarray
    first_failure_time: float | None = None
    truncation_reason: str | None = None

    @property
    def exited_failure(self) -> bool:
        """True, wenn irgendein besuchter Zustand in der Fehlermenge lag."""
        return self.first_failure_time is not None

    @property
    def steps(self) -> int:
        """Anzahl der ausgeführten Schritte."""
        return int(self.controls.shape[0])


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class ConformalBound:
    """Radien q_i ≥ 0 der Conformal-Baseline: D1 = [−q, q], D2 = 0."""
    radius: np.ndarray
    coverage: float
    n_calibration: int = 0


# pylint: disable=too-few-public-methods
class MemberLosses(BaseModel):
    """Abschließende mittlere quadratische Fehler eines Mitglieds (normierte Einheiten)."""
    member: int
    seed: int
    train_loss: float
    validation_loss: float | None = None


# pylint: disable=too-few-public-methods
class SafeSetReport(BaseModel):
    """Kennzahlen einer sicheren Menge. Alle Anteile liegen in [0, 1]."""
    method: str
    seed: int
    n_train: int
    volume_fraction: float
    recovered_fraction: float
    containment_violation: float
    fingerprint: str = ""


# pylint: disable=too-few-public-methods
class FilterRun(BaseModel):
    """Auswertung einer gefilterten Fahrt."""
    model: str
    threshold: float
    exited: bool
    first_failure_time: float | None = None
    min_distance: float
    interventions: int
    # Kleinster Abstand zum Rand von A unter allen Eingriffszuständen
    min_intervention_distance: float | None = None
    truncation_reason: str | None = None


# pylint: disable=too-few-public-methods
class FilterDemoReport(BaseModel):
    """Vergleich von analytischem und gelerntem Filter vom selben Startzustand."""
    x0: list[float]
    duration: float
    analytic: FilterRun
    learned: FilterRun
    fingerprint: str = ""


# pylint: disable=too-few-public-methods
@dataclass(eq=False)
class StudyCell:
    """Alle Masken und Berichte eines Seeds der Pendelstudie."""
    seed: int
    reports: list[SafeSetReport] = field(default_factory=list)
    masks: dict[str, np.ndarray] = field(default_factory=dict)
