"""Modul für Operationen auf dem Berechnungsgitter.

Dieses Modul stellt den Aufbau des Gitters, die vorzeichenbehafteten
Abstandsfunktionen der Fehlermengen, die einseitigen (Upwind-)Gradienten
für den Level-Set-Solver sowie die multilineare Interpolation bereit.

Alle Funktionen sind rein bezüglich ihrer Eingaben und arbeiten
vektorisiert über alle Knoten.
"""
import itertools
from typing import Sequence

import numpy as np

from Reachability.reach_errors import GridError
from Reachability.reach_models import Grid, ScalarField, GradientField


# region ↓ Gitteraufbau ↓

def build_grid(
        lo: Sequence[float],
        hi: Sequence[float],
        counts: Sequence[int],
        periodic: Sequence[bool] | None = None,
) -> Grid:
    """Erstellt ein rechtwinkliges Gitter und prüft seine Invarianten.

    Args:
        lo (Sequence[float]): Untere Grenzen je Dimension.
        hi (Sequence[float]): Obere Grenzen je Dimension.
        counts (Sequence[int]): Knotenanzahl je Dimension (mindestens 3).
        periodic (Sequence[bool] | None): Periodizität je Dimension,
            standardmäßig keine periodische Dimension.

    Raises:
        GridError: Bei inkonsistenten Längen, ``counts < 3`` oder ``lo >= hi``.

    Returns:
        Grid: Das Gitter mit abgeleiteten Gitterweiten.
    """
    if periodic is None:
        periodic = [False] * len(counts)
    if not len(lo) == len(hi) == len(counts) == len(periodic):
        raise GridError(
            "grid.dims",
            f"Inkonsistente Dimensionen: lo={len(lo)}, hi={len(hi)}, "
            f"counts={len(counts)}, periodic={len(periodic)}",
        )
    if len(counts) == 0:
        raise GridError("grid.dims", "Gitter benötigt mindestens eine Dimension")
    if any(int(count) < 3 for count in counts):
        raise GridError("grid.counts", f"Jede Dimension benötigt mindestens 3 Knoten, erhalten {list(counts)}")
    lo_array = np.asarray(lo, dtype=float)
    hi_array = np.asarray(hi, dtype=float)
    if np.any(lo_array >= hi_array):
        raise GridError("grid.bounds", f"lo muss kleiner als hi sein: lo={lo_array}, hi={hi_array}")
    return Grid(
        lo=lo_array,
        hi=hi_array,
        counts=tuple(int(count) for count in counts),
        periodic=tuple(bool(flag) for flag in periodic),
    )


def wrap_state(grid: Grid, x: np.ndarray) -> np.ndarray:
    """Bildet periodische Koordinaten auf ``[lo, hi)`` ab.

    Args:
        grid (Grid): Das Gitter.
        x (np.ndarray): Zustand(e) der Form ``(..., n)``.

    Returns:
        np.ndarray: Zustände mit gewickelten periodischen Koordinaten.
    """
    x = np.array(x, dtype=float, copy=True)
    for i in range(grid.ndim):
        if grid.periodic[i]:
            period = grid.hi[i] - grid.lo[i]
            x[..., i] = grid.lo[i] + np.mod(x[..., i] - grid.lo[i], period)
    return x


# endregion

# region ↓ Fehlermengen ↓

def slab_signed_distance(grid: Grid, dim: int, half_width: float) -> ScalarField:
    """Vorzeichenbehafteter Abstand zu einer Streifen-Fehlermenge ``|x_dim| > half_width``.

    Positiv im sicheren Streifen, negativ in der Fehlermenge, gemessen in
    der Koordinate ``dim``.

    Args:
        grid (Grid): Das Gitter.
        dim (int): Die beschränkte Dimension.
        half_width (float): Halbe Breite des sicheren Streifens (> 0).

    Raises:
        GridError: Wenn ``dim`` ungültig oder ``half_width <= 0`` ist.

    Returns:
        ScalarField: l(x) = half_width - |x_dim|.
    """
    if not 0 <= dim < grid.ndim:
        raise GridError("failure.dim", f"Dimension {dim} existiert im Gitter nicht")
    if half_width <= 0.0:
        raise GridError("failure.half_width", f"half_width muss positiv sein, erhalten {half_width}")
    values = half_width - np.abs(grid.states[..., dim])
    return ScalarField(grid=grid, values=values)


def box_signed_distance(grid: Grid, dims: Sequence[int], half_widths: Sequence[float]) -> ScalarField:
    """Vorzeichenbehafteter Abstand zu einer Quader-Fehlermenge.

    Die Fehlermenge ist die Vereinigung der Streifen-Fehlermengen der
    angegebenen Dimensionen, der Abstand daher das punktweise Minimum.

    Args:
        grid (Grid): Das Gitter.
        dims (Sequence[int]): Beschränkte Dimensionen.
        half_widths (Sequence[float]): Halbe Breiten je Dimension.

    Raises:
        GridError: Bei leeren oder ungleich langen Listen.

    Returns:
        ScalarField: Punktweises Minimum der Streifenabstände.
    """
    if len(dims) == 0 or len(dims) != len(half_widths):
        raise GridError("failure.dims", f"dims ({len(dims)}) und half_widths ({len(half_widths)}) passen nicht")
    slabs = [slab_signed_distance(grid, dim, width).values for dim, width in zip(dims, half_widths)]
    return ScalarField(grid=grid, values=np.minimum.reduce(slabs))


# endregion

# region ↓ Gradienten ↓

def upwind_gradients(field: ScalarField) -> GradientField:
    """Berechnet einseitige Differenzen erster Ordnung in jeder Dimension.

    An nicht-periodischen Rändern wird die einseitige Differenz ins Gebiet
    hinein für beide Seiten verwendet (links = rechts am Randknoten),
    periodische Dimensionen werden gewickelt.

    Args:
        field (ScalarField): Das Feld.

    Returns:
        GradientField: Links- und rechtsseitige Differenzen, Form ``(*counts, n)``.
    """
    grid = field.grid
    values = field.values
    left = np.empty(grid.shape + (grid.ndim,))
    right = np.empty(grid.shape + (grid.ndim,))
    for i in range(grid.ndim):
        dx = grid.spacing[i]
        if grid.periodic[i]:
            left[..., i] = (values - np.roll(values, 1, axis=i)) / dx
            right[..., i] = (np.roll(values, -1, axis=i) - values) / dx
            continue
        diff = np.diff(values, axis=i) / dx
        head = np.take(diff, [0], axis=i)
        tail = np.take(diff, [-1], axis=i)
        # Fehlende Seite am Rand übernimmt die innere Differenz
        left[..., i] = np.concatenate([head, diff], axis=i)
        right[..., i] = np.concatenate([diff, tail], axis=i)
    return GradientField(grid=grid, left=left, right=right)


def central_gradients(field: ScalarField) -> np.ndarray:
    """Zentrale Differenzen je Knoten als Mittel der einseitigen Differenzen.

    Args:
        field (ScalarField): Das Feld.

    Returns:
        np.ndarray: Gradienten der Form ``(*counts, n)``.
    """
    gradients = upwind_gradients(field)
    return 0.5 * (gradients.left + gradients.right)


# endregion

# region ↓ Interpolation ↓

def _interpolation_stencil(grid: Grid, x: np.ndarray) -> list[tuple[tuple[int, ...], float]]:
    """Bestimmt die 2^n umschließenden Knoten und ihre multilinearen Gewichte.

    Raises:
        GridError: Wenn x in einer nicht-periodischen Dimension außerhalb liegt.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (grid.ndim,):
        raise GridError("interpolate.shape", f"Zustand der Form {x.shape} passt nicht zu {grid.ndim} Dimensionen")
    x = wrap_state(grid, x)
    lower: list[int] = []
    upper: list[int] = []
    fractions: list[float] = []
    for i in range(grid.ndim):
        if not grid.periodic[i] and not grid.lo[i] <= x[i] <= grid.hi[i]:
            raise GridError(
                "interpolate.out_of_bounds",
                f"Koordinate {i} = {x[i]} liegt außerhalb von [{grid.lo[i]}, {grid.hi[i]}]",
            )
        position = (x[i] - grid.lo[i]) / grid.spacing[i]
        count = grid.counts[i]
        if grid.periodic[i]:
            index = int(np.floor(position)) % count
            lower.append(index)
            upper.append((index + 1) % count)
            fractions.append(float(position - np.floor(position)))
        else:
            index = min(max(int(np.floor(position)), 0), count - 2)
            lower.append(index)
            upper.append(index + 1)
            fractions.append(float(position - index))
    stencil = []
    for corner in itertools.product((0, 1), repeat=grid.ndim):
        index = tuple(upper[i] if bit else lower[i] for i, bit in enumerate(corner))
        weight = float(np.prod([fractions[i] if bit else 1.0 - fractions[i] for i, bit in enumerate(corner)]))
        stencil.append((index, weight))
    return stencil


def interpolate(field: ScalarField, x: np.ndarray) -> float:
    """Multilineare Interpolation eines Skalarfeldes an einem Zustand.

    Args:
        field (ScalarField): Das Feld.
        x (np.ndarray): Der Zustand, periodische Dimensionen werden gewickelt.

    Raises:
        GridError: Wenn x außerhalb einer nicht-periodischen Dimension liegt.

    Returns:
        float: Der interpolierte Wert.
    """
    return float(sum(weight * field.values[index] for index, weight in _interpolation_stencil(field.grid, x)))


def interpolate_vector(grid: Grid, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Multilineare Interpolation eines Knotenarrays mit nachgestellten Komponenten.

    Args:
        grid (Grid): Das Gitter.
        values (np.ndarray): Array der Form ``(*counts, k)``.
        x (np.ndarray): Der Zustand.

    Returns:
        np.ndarray: Interpolierter Vektor der Länge k.
    """
    return sum(weight * values[index] for index, weight in _interpolation_stencil(grid, x))


# endregion

# region ↓ Schnitte und Masken ↓

def slice_field(
        field: ScalarField,
        keep_dims: tuple[int, int],
        at: dict[int, float] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Schneidet ein Feld auf zwei Dimensionen am nächstgelegenen Knoten.

    Args:
        field (ScalarField): Das Feld.
        keep_dims (tuple[int, int]): Die beiden beibehaltenen Dimensionen.
        at (dict[int, float] | None): Feste Koordinaten der übrigen Dimensionen,
            fehlende Dimensionen werden in der Mitte geschnitten.

    Raises:
        GridError: Bei ungültigen Dimensionen.

    Returns:
        tuple: (Werte der Form (n_a, n_b), Achse a, Achse b).
    """
    grid = field.grid
    at = at or {}
    if len(set(keep_dims)) != 2 or any(not 0 <= dim < grid.ndim for dim in keep_dims):
        raise GridError("slice.dims", f"Ungültige Schnittdimensionen {keep_dims}")
    index: list[int | slice] = []
    for i in range(grid.ndim):
        if i in keep_dims:
            index.append(slice(None))
            continue
        if i not in at:
            index.append(grid.counts[i] // 2)
            continue
        position = int(np.rint((at[i] - grid.lo[i]) / grid.spacing[i]))
        if grid.periodic[i]:
            index.append(position % grid.counts[i])
        else:
            index.append(min(max(position, 0), grid.counts[i] - 1))
    values = field.values[tuple(index)]
    if keep_dims[0] > keep_dims[1]:
        values = values.T
    return values, grid.axes[keep_dims[0]], grid.axes[keep_dims[1]]


def dilate_mask(grid: Grid, mask: np.ndarray) -> np.ndarray:
    """Dilatiert eine Knotenmaske um eine Zelle (Moore-Nachbarschaft).

    Periodische Dimensionen werden gewickelt, an nicht-periodischen Rändern
    wird nichts hinzugefügt.

    Args:
        grid (Grid): Das Gitter.
        mask (np.ndarray): Boolesche Maske der Form ``counts``.

    Returns:
        np.ndarray: Die dilatierte Maske.
    """
    padded = mask
    for i in range(grid.ndim):
        pad = [(0, 0)] * grid.ndim
        pad[i] = (1, 1)
        if grid.periodic[i]:
            padded = np.pad(padded, pad, mode="wrap")
        else:
            padded = np.pad(padded, pad, mode="constant", constant_values=False)
    result = np.zeros_like(mask, dtype=bool)
    for offset in itertools.product((0, 1, 2), repeat=grid.ndim):
        window = tuple(slice(o, o + grid.counts[i]) for i, o in enumerate(offset))
        result |= padded[window]
    return result

# endregion
