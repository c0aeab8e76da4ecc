"""Modul für die SVG-Darstellung zweidimensionaler Schnitte.

Die Nullniveaulinie wird mit contourpy als Polylinien extrahiert und mit
matplotlib gezeichnet, zusammen mit dem Rand der Fehlermenge.
"""
import io
from pathlib import Path

import contourpy
import matplotlib

matplotlib.use("Agg")
# pylint: disable=wrong-import-position
import matplotlib.pyplot as plt
import numpy as np

from Reachability.grid_operations import slice_field
from Reachability.reach_models import ScalarField
from Storage.storage import atomic_write


def level_lines(values: np.ndarray, axis_a: np.ndarray, axis_b: np.ndarray, level: float = 0.0) -> list[np.ndarray]:
    """Extrahiert die Niveaulinie ``values == level`` als Polylinien.

    Args:
        values (np.ndarray): Werte der Form ``(len(axis_a), len(axis_b))``.
        axis_a (np.ndarray): Koordinaten der ersten Achse.
        axis_b (np.ndarray): Koordinaten der zweiten Achse.
        level (float): Das Niveau.

    Returns:
        list[np.ndarray]: Je Linie die Punkte ``(k, 2)`` in Koordinaten (a, b).
    """
    # contourpy erwartet z[j, i] zu (x[i], y[j])
    generator = contourpy.contour_generator(
        x=axis_a, y=axis_b, z=np.asarray(values, dtype=float).T, line_type=contourpy.LineType.Separate,
    )
    return [np.asarray(line) for line in generator.lines(level)]


def slice_filename(dims: tuple[int, int], at: dict[int, float]) -> str:
    """Dateiname ``slice_<dims>_<at>.svg`` mit den Schnittkoordinaten."""
    fixed = "_".join(f"{dim}={value:g}" for dim, value in sorted(at.items())) or "mid"
    return f"slice_{dims[0]}-{dims[1]}_{fixed}.svg"


def render_slice_svg(
        value: ScalarField,
        failure: ScalarField,
        dims: tuple[int, int],
        at: dict[int, float] | None = None,
        title: str = "",
) -> str:
    """Zeichnet V = 0 und den Rand der Fehlermenge eines Schnitts als SVG-Text."""
    at = at or {}
    values, axis_a, axis_b = slice_field(value, dims, at)
    failure_values, _, _ = slice_field(failure, dims, at)
    figure, axes = plt.subplots(figsize=(5, 4))
    try:
        for lines, color, label in (
                (level_lines(values, axis_a, axis_b), "tab:blue", "V = 0"),
                (level_lines(failure_values, axis_a, axis_b), "tab:red", "Fehlermenge"),
        ):
            for index, line in enumerate(lines):
                axes.plot(line[:, 0], line[:, 1], color=color, linewidth=1.2, label=label if index == 0 else None)
        axes.set_xlim(axis_a[0], axis_a[-1])
        axes.set_ylim(axis_b[0], axis_b[-1])
        axes.set_xlabel(f"x{dims[0]}")
        axes.set_ylabel(f"x{dims[1]}")
        axes.set_title(title)
        if axes.get_legend_handles_labels()[0]:
            axes.legend(loc="upper right")
        buffer = io.StringIO()
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    finally:
        plt.close(figure)
    return buffer.getvalue()


def write_slice_svg(
        directory: Path,
        value: ScalarField,
        failure: ScalarField,
        dims: tuple[int, int],
        at: dict[int, float] | None = None,
        title: str = "",
) -> Path:
    """Schreibt einen Schnitt nach ``directory/slice_<dims>_<at>.svg``."""
    at = at or {}
    return atomic_write(Path(directory) / slice_filename(dims, at), render_slice_svg(value, failure, dims, at, title))
