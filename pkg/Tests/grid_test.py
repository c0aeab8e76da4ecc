"""Testmodul für die Gitteroperationen.

Geprüft werden Gitteraufbau, Abstandsfunktionen der Fehlermengen,
Upwind-Gradienten, multilineare Interpolation, Schnitte und die
Dilatation von Masken.
"""
import numpy as np
import pytest

from Reachability.grid_operations import (
    build_grid, wrap_state, slab_signed_distance, box_signed_distance, upwind_gradients,
    central_gradients, interpolate, interpolate_vector, slice_field, dilate_mask,
)
from Reachability.reach_errors import GridError
from Reachability.reach_models import ScalarField


# region ↓ Gitteraufbau ↓

@pytest.mark.parametrize("lo, hi, counts, code", [
    ([0.0], [1.0, 2.0], [5], "grid.dims"),
    ([0.0, 0.0], [1.0, 1.0], [5, 2], "grid.counts"),
    ([1.0], [1.0], [5], "grid.bounds"),
    ([], [], [], "grid.dims"),
])
def test_build_grid_rejects_invalid_input(lo, hi, counts, code):
    """Ungültige Gitterbeschreibungen werden mit dem passenden Code abgelehnt."""
    with pytest.raises(GridError) as error:
        build_grid(lo, hi, counts)
    assert error.value.code == code


def test_spacing_respects_periodicity():
    """Periodische Dimensionen duplizieren den Knoten bei hi nicht.

    Erwartetes Ergebnis:
    - Nicht-periodisch: Δx = (hi - lo) / (N - 1).
    - Periodisch: Δx = (hi - lo) / N, der letzte Knoten liegt bei hi - Δx.
    """
    # GIVEN
    grid = build_grid([0.0, -np.pi], [1.0, np.pi], [5, 8], [False, True])

    # WHEN
    spacing = grid.spacing

    # THEN
    np.testing.assert_allclose(spacing, [0.25, 2.0 * np.pi / 8])
    assert grid.axes[0][-1] == pytest.approx(1.0)
    assert grid.axes[1][-1] == pytest.approx(np.pi - 2.0 * np.pi / 8)
    assert grid.states.shape == (5, 8, 2)


def test_wrap_state_maps_periodic_coordinates_only():
    grid = build_grid([-1.0, -np.pi], [1.0, np.pi], [5, 8], [False, True])

    wrapped = wrap_state(grid, np.array([[3.0, 3.0 * np.pi], [0.5, -np.pi - 0.1]]))

    np.testing.assert_allclose(wrapped[:, 0], [3.0, 0.5])
    np.testing.assert_allclose(wrapped[:, 1], [-np.pi, np.pi - 0.1], atol=1e-12)


# endregion

# region ↓ Fehlermengen ↓

def test_slab_signed_distance_sign_convention():
    """l ist positiv im Streifen, null am Rand und negativ außerhalb."""
    grid = build_grid([-2.0], [2.0], [5])

    field = slab_signed_distance(grid, 0, 1.0)

    np.testing.assert_allclose(field.values, [-1.0, 0.0, 1.0, 0.0, -1.0])


@pytest.mark.parametrize("dim, half_width, code", [(2, 1.0, "failure.dim"), (0, 0.0, "failure.half_width")])
def test_slab_signed_distance_rejects_invalid_arguments(dim, half_width, code):
    grid = build_grid([-1.0, -1.0], [1.0, 1.0], [3, 3])
    with pytest.raises(GridError) as error:
        slab_signed_distance(grid, dim, half_width)
    assert error.value.code == code


def test_box_signed_distance_is_minimum_of_slabs():
    grid = build_grid([-2.0, -2.0], [2.0, 2.0], [9, 9])

    field = box_signed_distance(grid, [0, 1], [1.0, 0.5])

    expected = np.minimum(1.0 - np.abs(grid.states[..., 0]), 0.5 - np.abs(grid.states[..., 1]))
    np.testing.assert_allclose(field.values, expected)


def test_box_signed_distance_rejects_mismatched_lists():
    grid = build_grid([-1.0], [1.0], [3])
    with pytest.raises(GridError) as error:
        box_signed_distance(grid, [0], [1.0, 2.0])
    assert error.value.code == "failure.dims"


def test_scalar_field_rejects_nonfinite_values():
    grid = build_grid([-1.0], [1.0], [3])
    with pytest.raises(GridError) as error:
        ScalarField(grid=grid, values=np.array([0.0, np.nan, 0.0]))
    assert error.value.code == "field.nonfinite"


# endregion

# region ↓ Gradienten ↓

def test_upwind_gradients_are_exact_for_linear_fields():
    """Für ein lineares Feld stimmen beide einseitigen Differenzen überall mit der Steigung überein,
    auch an den Rändern."""
    # GIVEN: V(x, y) = 2x - 3y
    grid = build_grid([-1.0, -1.0], [1.0, 1.0], [11, 7])
    field = ScalarField(grid=grid, values=2.0 * grid.states[..., 0] - 3.0 * grid.states[..., 1])

    # WHEN
    gradients = upwind_gradients(field)

    # THEN
    np.testing.assert_allclose(gradients.left[..., 0], 2.0, atol=1e-12)
    np.testing.assert_allclose(gradients.right[..., 0], 2.0, atol=1e-12)
    np.testing.assert_allclose(gradients.left[..., 1], -3.0, atol=1e-12)
    np.testing.assert_allclose(central_gradients(field)[..., 1], -3.0, atol=1e-12)


def test_upwind_gradients_wrap_periodic_dimensions():
    """Im periodischen Fall verwendet der erste Knoten den letzten als linken Nachbarn."""
    grid = build_grid([0.0], [4.0], [4], [True])
    field = ScalarField(grid=grid, values=np.array([0.0, 1.0, 0.0, -1.0]))

    gradients = upwind_gradients(field)

    np.testing.assert_allclose(gradients.left[:, 0], [1.0, 1.0, -1.0, -1.0])
    np.testing.assert_allclose(gradients.right[:, 0], [1.0, -1.0, -1.0, 1.0])


# endregion

# region ↓ Interpolation ↓

def test_interpolate_reproduces_bilinear_functions():
    """Multilineare Interpolation ist exakt für f(x, y) = 1 + x - 2y + xy."""
    grid = build_grid([-1.0, -1.0], [1.0, 1.0], [5, 9])
    x, y = grid.states[..., 0], grid.states[..., 1]
    field = ScalarField(grid=grid, values=1.0 + x - 2.0 * y + x * y)
    rng = np.random.default_rng(3)

    for point in rng.uniform(-1.0, 1.0, size=(20, 2)):
        expected = 1.0 + point[0] - 2.0 * point[1] + point[0] * point[1]
        assert interpolate(field, point) == pytest.approx(expected, abs=1e-12)


def test_interpolate_wraps_periodic_dimension():
    grid = build_grid([0.0], [4.0], [4], [True])
    field = ScalarField(grid=grid, values=np.array([0.0, 1.0, 2.0, 3.0]))

    # Zwischen dem letzten Knoten (x = 3) und dem gewickelten ersten (x = 4 ≡ 0)
    assert interpolate(field, np.array([3.5])) == pytest.approx(1.5)
    assert interpolate(field, np.array([-0.5])) == pytest.approx(1.5)


def test_interpolate_rejects_points_outside_non_periodic_bounds():
    grid = build_grid([-1.0, -1.0], [1.0, 1.0], [5, 5])
    field = ScalarField(grid=grid, values=np.zeros(grid.shape))

    with pytest.raises(GridError) as error:
        interpolate(field, np.array([0.0, 1.5]))
    assert error.value.code == "interpolate.out_of_bounds"


def test_interpolate_vector_interpolates_each_component():
    grid = build_grid([0.0, 0.0], [1.0, 1.0], [3, 3])
    values = np.stack([grid.states[..., 0], 2.0 * grid.states[..., 1]], axis=-1)

    result = interpolate_vector(grid, values, np.array([0.3, 0.7]))

    np.testing.assert_allclose(result, [0.3, 1.4], atol=1e-12)


# endregion

# region ↓ Schnitte und Masken ↓

def test_slice_field_selects_nearest_node_and_orders_axes():
    grid = build_grid([0.0, 0.0, 0.0], [1.0, 2.0, 4.0], [3, 5, 5])
    values = grid.states[..., 0] + 10.0 * grid.states[..., 1] + 100.0 * grid.states[..., 2]
    field = ScalarField(grid=grid, values=values)

    sliced, axis_a, axis_b = slice_field(field, (2, 0), {1: 1.1})

    assert sliced.shape == (5, 3)
    np.testing.assert_allclose(axis_a, grid.axes[2])
    np.testing.assert_allclose(axis_b, grid.axes[0])
    # x1 = 1.1 liegt am nächsten beim Knoten x1 = 1.0
    np.testing.assert_allclose(sliced[4, 2], 1.0 + 10.0 + 400.0)


def test_slice_field_rejects_duplicate_dims():
    grid = build_grid([0.0, 0.0], [1.0, 1.0], [3, 3])
    with pytest.raises(GridError):
        slice_field(ScalarField(grid=grid, values=np.zeros(grid.shape)), (0, 0))


def test_dilate_mask_grows_by_one_cell_and_wraps():
    """Ein einzelner Knoten wächst zum 3×3-Block, am periodischen Rand wird gewickelt."""
    grid = build_grid([0.0, 0.0], [1.0, 1.0], [5, 5], [False, True])
    mask = np.zeros(grid.shape, dtype=bool)
    mask[2, 0] = True

    dilated = dilate_mask(grid, mask)

    assert dilated.sum() == 9
    assert dilated[1, 4] and dilated[3, 1]
    assert not dilated[0, 0]

# endregion
