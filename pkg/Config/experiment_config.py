"""Konfigurationsschema und Ladefunktionen für alle Experimente.

Dieses Modul definiert das vollständige, validierte Konfigurationsschema
(`ExperimentConfig`) als pydantic-Modelle. Unbekannte Schlüssel werden in jedem
Abschnitt abgelehnt. Die Konfiguration wird in dieser Reihenfolge aufgebaut:

1. Standardwerte der Modelle,
2. YAML-Datei (``--config``),
3. Overrides der Form ``abschnitt.schlüssel=wert`` (``--set``),
4. dedizierte Flags der Kommandozeile (``--out``, ``--seed``, ``--threads``).

Jeder Lauf schreibt die vollständig aufgelöste Konfiguration neben seine
Artefakte (`dump_config`) und referenziert sie über einen Fingerabdruck.
"""
import copy
import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Any

import yaml
from pydantic import BaseModel, ConfigDict

from Reachability.dynamics_operations import PendulumParams
from Reachability.reach_errors import ConfigError
from Reachability.reach_models import SolveConfig


# region ↓ Abschnitte ↓

# pylint: disable=too-few-public-methods
class Section(BaseModel):
    """Basis aller Abschnitte: unbekannte Schlüssel sind verboten."""
    model_config = ConfigDict(extra="forbid")


# pylint: disable=too-few-public-methods
class PendulumParamsSection(PendulumParams):
    """Pendelparameter als Konfigurationsabschnitt."""
    model_config = ConfigDict(extra="forbid")


# pylint: disable=too-few-public-methods
class GridSection(Section):
    """Gitterausdehnung, Auflösung und Periodizität."""
    lo: list[float]
    hi: list[float]
    counts: list[int]
    periodic: list[bool]


# pylint: disable=too-few-public-methods
class FailureSection(Section):
    """Fehlermenge als Vereinigung von Streifen |x_d| > half_width."""
    dims: list[int]
    half_widths: list[float]


# pylint: disable=too-few-public-methods
class ControlSection(Section):
    """Hyperquader der zulässigen Steuerungen."""
    lo: list[float]
    hi: list[float]


# pylint: disable=too-few-public-methods
class DataSection(Section):
    """Erzeugung der Trainingsdaten aus Rollouts mit Zufallssteuerungen."""
    n_trajectories: int
    steps: int
    dt: float
    initial_lo: list[float]
    initial_hi: list[float]
    n_validation: int = 200
    n_calibration: int = 0
    # Beim Verlassen dieses Bereichs wird eine Trajektorie abgeschnitten
    validity_lo: list[float] | None = None
    validity_hi: list[float] | None = None


# pylint: disable=too-few-public-methods
class PendulumSection(Section):
    """Alles, was das inverse Pendel betrifft."""
    params: PendulumParamsSection = PendulumParamsSection()
    control: ControlSection = ControlSection(lo=[-2.0], hi=[2.0])
    grid: GridSection = GridSection(
        lo=[-math.pi, -2.0 * math.pi],
        hi=[math.pi, 2.0 * math.pi],
        counts=[101, 101],
        periodic=[False, False],
    )
    failure: FailureSection = FailureSection(dims=[0], half_widths=[0.6 * math.pi])
    horizon: float = 0.7
    rollout_dt: float = 0.01
    data: DataSection = DataSection(
        n_trajectories=1000,
        steps=25,
        dt=0.02,
        initial_lo=[-math.pi, -2.0 * math.pi],
        initial_hi=[math.pi, 2.0 * math.pi],
        n_validation=200,
        n_calibration=5000,
    )


# pylint: disable=too-few-public-methods
class DemoSection(Section):
    """Least-restrictive Filter-Demo."""
    x0: list[float] = [0.0, 0.0, 0.0]
    duration: float = 30.0
    dt: float = 0.01
    threshold: float | None = None


# pylint: disable=too-few-public-methods
class DubinsSection(Section):
    """Alles, was das Dubins-Fahrzeug und sein gestörtes Gegenstück betrifft."""
    speed: float = 0.3
    gain: float = 0.6
    drift: list[float] = [0.0, 0.0, 0.1]
    control: ControlSection = ControlSection(lo=[-1.0], hi=[1.0])
    grid: GridSection = GridSection(
        lo=[-1.2, -1.2, -math.pi],
        hi=[1.2, 1.2, math.pi],
        counts=[49, 49, 40],
        periodic=[False, False, True],
    )
    failure: FailureSection = FailureSection(dims=[0, 1], half_widths=[1.0, 1.0])
    horizon: float = math.inf
    rollout_dt: float = 0.01
    data: DataSection = DataSection(
        n_trajectories=120,
        steps=100,
        dt=0.05,
        initial_lo=[-0.8, -0.8, -math.pi],
        initial_hi=[0.8, 0.8, math.pi],
        n_validation=500,
        n_calibration=0,
        validity_lo=[-1.2, -1.2, -math.inf],
        validity_hi=[1.2, 1.2, math.inf],
    )
    demo: DemoSection = DemoSection()


# pylint: disable=too-few-public-methods
class EnsembleSection(Section):
    """Architektur und Training des Ensembles."""
    members: int = 5
    hidden_layers: int = 3
    hidden_width: int = 256
    activation: Literal["tanh", "softplus", "elu", "relu"] = "tanh"
    epochs: int = 2000
    lr: float = 1e-3
    batch_size: int = 256


# pylint: disable=too-few-public-methods
class BoundsSection(Section):
    """Skalierung der Ensemble-Schranken und Abdeckung der Conformal-Baseline."""
    alpha: float = 3.0
    gamma: float = 3.0
    coverage: float = 0.95


# pylint: disable=too-few-public-methods
class SolverSection(Section):
    """Numerische Einstellungen des Solvers (der Horizont kommt aus dem System)."""
    cfl: float = 0.5
    convergence_tol: float = 1e-3
    max_steps: int = 20000
    snapshot_times: list[float] = []


# pylint: disable=too-few-public-methods
class StudySection(Section):
    """Einstellungen der Pendelstudie, der Ablation und der Zusatzexperimente."""
    n_train: int = 300
    seeds: int = 3
    ablation_sizes: list[int] = [100, 300, 1000, 3000, 10000]
    sweep_scales: list[float] = [0.0, 1.0, 3.0, 5.0]
    invariance_trials: int = 100


# pylint: disable=too-few-public-methods
class ExperimentConfig(Section):
    """Vollständige Konfiguration eines Laufs."""
    system: Literal["pendulum", "dubins"] = "pendulum"
    seed: int = 0
    threads: int | None = None
    log_level: str = "INFO"
    output_dir: str = "runs/default"
    pendulum: PendulumSection = PendulumSection()
    dubins: DubinsSection = DubinsSection()
    ensemble: EnsembleSection = EnsembleSection()
    bounds: BoundsSection = BoundsSection()
    solver: SolverSection = SolverSection()
    study: StudySection = StudySection()

    def system_section(self) -> PendulumSection | DubinsSection:
        """Gibt den Abschnitt des ausgewählten Systems zurück."""
        return self.pendulum if self.system == "pendulum" else self.dubins

    def solve_config(self, horizon: float | None = None) -> SolveConfig:
        """Baut die Solver-Einstellungen mit dem Horizont des ausgewählten Systems."""
        return SolveConfig(
            horizon=self.system_section().horizon if horizon is None else horizon,
            **self.solver.model_dump(),
        )


# endregion

# region ↓ Laden und Speichern ↓

def deep_merge(base: dict, update: dict) -> dict:
    """Überlagert ``base`` rekursiv mit ``update`` (Mappings werden zusammengeführt, alles andere ersetzt)."""
    result = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = deep_merge(result[key], value)
        else:
            result[key] = value
    return result


def apply_override(raw: dict, assignment: str) -> dict:
    """Setzt einen verschachtelten Schlüssel der Form ``a.b.c=wert``.

    Der Wert wird als YAML interpretiert (Zahlen, Listen, ``.inf``, ``null``).

    Args:
        raw (dict): Die rohe Konfiguration (wird nicht verändert).
        assignment (str): Die Zuweisung.

    Raises:
        ConfigError: Wenn die Zuweisung kein ``=`` enthält.

    Returns:
        dict: Eine Kopie mit gesetztem Wert.
    """
    if "=" not in assignment:
        raise ConfigError("config.override", f"Override '{assignment}' hat nicht die Form schlüssel=wert")
    key, text = assignment.split("=", 1)
    result = copy.deepcopy(raw)
    node = result
    parts = key.strip().split(".")
    for part in parts[:-1]:
        # Zwischenknoten werden angelegt, unbekannte Schlüssel meldet das Schema
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError("config.override", f"'{part}' in '{key}' ist kein Abschnitt")
    node[parts[-1]] = yaml.safe_load(text)
    return result


def load_config(path: Path | None = None, overrides: list[str] | None = None) -> ExperimentConfig:
    """Lädt und validiert eine Konfiguration.

    Args:
        path (Path | None): YAML-Datei, ohne Datei gelten die Standardwerte.
        overrides (list[str] | None): Zuweisungen ``a.b=wert``.

    Raises:
        ConfigError: Wenn die Datei fehlt oder kein Mapping enthält.
        pydantic.ValidationError: Bei Schemaverletzungen (alle Schlüssel werden gemeldet).

    Returns:
        ExperimentConfig: Die validierte Konfiguration.
    """
    # Teilabschnitte aus Datei und Overrides ergänzen die Standardwerte
    raw: dict[str, Any] = ExperimentConfig().model_dump(mode="python")
    if path is not None:
        if not path.exists():
            raise ConfigError("config.missing", f"Konfigurationsdatei '{path}' existiert nicht")
        loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        if loaded is not None and not isinstance(loaded, dict):
            raise ConfigError("config.format", f"'{path}' enthält kein Mapping auf oberster Ebene")
        raw = deep_merge(raw, loaded or {})
    for assignment in overrides or []:
        raw = apply_override(raw, assignment)
    return ExperimentConfig.model_validate(raw)


def dump_config(config: ExperimentConfig) -> str:
    """Serialisiert die vollständig aufgelöste Konfiguration als YAML."""
    return yaml.safe_dump(config.model_dump(mode="python"), sort_keys=True)


def config_fingerprint(config: ExperimentConfig) -> str:
    """SHA-256 über die kanonische JSON-Darstellung der Konfiguration.

    Returns:
        str: Die ersten 16 Hex-Zeichen des Hashes.
    """
    canonical = json.dumps(config.model_dump(mode="python"), sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

# endregion
