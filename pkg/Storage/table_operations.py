"""Modul für tabellarische Artefakte im CSV-Format (pandas).

- Datensatz: Spalten ``x0..``, ``u0..``, ``xdot0..``, ``split`` und, falls bekannt, ``trajectory``.
- Trajektorie: ``t``, ``x0..``, ``u0..``, ``intervened``, ``failed``.
- Schrittprotokoll: ``tau``, ``dt``, ``residual``.
- Berichte: eine Zeile je pydantic-Modell.
"""
import io
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel

from Reachability.reach_errors import StorageError
from Reachability.reach_models import StepRecord
from Service.service_models import SPLITS, Dataset, Trajectory
from Storage.storage import atomic_write, require_path


def frame_to_csv(frame: pd.DataFrame) -> str:
    """CSV-Text mit verlustfreier Gleitkommadarstellung."""
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format="%.17g")
    return buffer.getvalue()


def write_frame(path: Path, frame: pd.DataFrame) -> Path:
    """Schreibt einen DataFrame atomar als CSV."""
    return atomic_write(path, frame_to_csv(frame))


def _columns(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i}" for i in range(count)]


# region ↓ Datensatz ↓

def dataset_frame(dataset: Dataset) -> pd.DataFrame:
    """Datensatz als DataFrame."""
    frame = pd.DataFrame(
        np.hstack([dataset.x, dataset.u, dataset.xdot]),
        columns=_columns("x", dataset.state_dim) + _columns("u", dataset.control_dim) + _columns("xdot", dataset.state_dim),
    )
    frame["split"] = np.asarray(dataset.split, dtype=str)
    if dataset.trajectory is not None:
        frame["trajectory"] = np.asarray(dataset.trajectory, dtype=int)
    return frame


def write_dataset(path: Path, dataset: Dataset) -> Path:
    """Schreibt einen Datensatz als CSV."""
    return write_frame(path, dataset_frame(dataset))


def read_dataset(path: Path) -> Dataset:
    """Liest einen Datensatz.

    Raises:
        StorageError: Wenn die Datei fehlt, Spalten fehlen oder Werte nicht endlich sind.
    """
    frame = pd.read_csv(require_path(path), float_precision="round_trip")
    x_cols = [c for c in frame.columns if c.startswith("x") and not c.startswith("xdot")]
    u_cols = [c for c in frame.columns if c.startswith("u")]
    xdot_cols = [c for c in frame.columns if c.startswith("xdot")]
    if not x_cols or not u_cols or len(xdot_cols) != len(x_cols):
        raise StorageError("storage.columns", f"'{path}' hat keine gültigen Spalten x*, u*, xdot*")
    values = frame[x_cols + u_cols + xdot_cols].to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise StorageError("storage.nonfinite", f"'{path}' enthält nicht-endliche Werte")
    split = frame["split"].to_numpy(dtype=object) if "split" in frame else np.full(len(frame), "train", dtype=object)
    unknown = set(split) - set(SPLITS)
    if unknown:
        raise StorageError("storage.split", f"'{path}' enthält unbekannte Splits {sorted(unknown)}")
    trajectory = frame["trajectory"].to_numpy(dtype=int) if "trajectory" in frame else None
    n, m = len(x_cols), len(u_cols)
    return Dataset(
        x=values[:, :n], u=values[:, n:n + m], xdot=values[:, n + m:], split=split, trajectory=trajectory,
    )


# endregion

# region ↓ Trajektorien, Protokolle und Berichte ↓

def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    """Trajektorie als DataFrame, eine Zeile je Zustand.

    Die letzte Zeile trägt keine Steuerung (NaN) und ``intervened = False``.
    """
    rows = trajectory.states.shape[0]
    control_dim = trajectory.controls.shape[1]
    controls = np.full((rows, control_dim), np.nan)
    controls[:trajectory.steps] = trajectory.controls
    intervened = np.zeros(rows, dtype=bool)
    intervened[:trajectory.steps] = trajectory.intervened
    frame = pd.DataFrame({"t": trajectory.times})
    for i in range(trajectory.states.shape[1]):
        frame[f"x{i}"] = trajectory.states[:, i]
    for j in range(control_dim):
        frame[f"u{j}"] = controls[:, j]
    frame["intervened"] = intervened
    frame["failed"] = trajectory.failed
    return frame


def write_trajectory(path: Path, trajectory: Trajectory) -> Path:
    """Schreibt eine Trajektorie als CSV."""
    return write_frame(path, trajectory_frame(trajectory))


def write_step_log(path: Path, step_log: list[StepRecord]) -> Path:
    """Schreibt das Schrittprotokoll des Solvers."""
    frame = pd.DataFrame([record.model_dump() for record in step_log], columns=["tau", "dt", "residual"])
    return write_frame(path, frame)


def write_reports(path: Path, reports: list[BaseModel]) -> Path:
    """Schreibt eine Liste von Berichten, eine Zeile je Bericht."""
    return write_frame(path, pd.DataFrame([report.model_dump() for report in reports]))

# endregion
