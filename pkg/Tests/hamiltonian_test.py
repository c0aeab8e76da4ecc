"""Testmodul für das Maximin-Spiel und den Hamiltonian.

Die geschlossene Lösung wird gegen das Brute-Force-Orakel aus `conftest`
geprüft. Da das innere Minimum separabel ist und das Maximum über u an
einer Ecke der Steuerbox oder bei 0 angenommen wird, muss der Vergleich
bis auf Rundungsfehler exakt sein.
"""
import numpy as np
import pytest

from Reachability.hamiltonian_operations import (
    hamiltonian, solve_game, solve_game_batch, partial_game_bounds, dissipation_bounds,
)
from Reachability.reach_models import AffineEval, ControlBox, GamePoint, UncertaintyBoundsEval
from Tests.conftest import batch_game_oracle, game_oracle, random_game_batch, random_game_point


# region ↓ Orakelvergleich ↓

@pytest.mark.parametrize("n, m", [(2, 1), (3, 1), (2, 2)])
def test_closed_form_matches_brute_force_oracle(n, m):
    """Für zufällige Punkte stimmt der geschlossene Hamiltonian mit dem Orakel überein.

    Szenario:
    - Zufällige Kostaten, nominelle Modelle und ursprungshaltige Boxen.
    Erwartetes Ergebnis:
    - |H_closed − H_oracle| ≤ 1e-9 an allen Punkten.
    - Die Lösung liegt in der Steuerbox und in den Störungsboxen.
    """
    rng = np.random.default_rng(100 * n + m)
    for _ in range(25):
        # GIVEN
        p, nominal, bounds, box = random_game_point(rng, n, m)

        # WHEN
        solution = solve_game(GamePoint(x=np.zeros(n), p=p, nominal=nominal, bounds=bounds, control_box=box))

        # THEN
        expected = game_oracle(p, nominal, bounds, box)
        assert float(solution.h_value) == pytest.approx(expected, abs=1e-9), \
            f"Hamiltonian {float(solution.h_value)} weicht vom Orakel {expected} ab"
        assert box.contains(solution.u_star)
        assert np.all(solution.d1_star >= bounds.d1_lo) and np.all(solution.d1_star <= bounds.d1_hi)
        assert np.all(solution.d2_star >= bounds.d2_lo) and np.all(solution.d2_star <= bounds.d2_hi)


@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_closed_form_matches_vectorized_oracle(n, m):
    """1700 Punkte je (n, m), zusammen über 10⁴, gegen das Orakel mit 21 Steuerungen je Dimension."""
    rng = np.random.default_rng(1000 + 10 * n + m)
    for _ in range(17):
        p, nominal, bounds, box = random_game_batch(rng, 100, n, m)

        closed = hamiltonian(p, nominal, bounds, box)

        np.testing.assert_allclose(closed, batch_game_oracle(p, nominal, bounds, box), rtol=0.0, atol=1e-9)


def test_hamiltonian_is_positively_homogeneous_in_costate():
    rng = np.random.default_rng(21)
    p, nominal, bounds, box = random_game_batch(rng, 500, 3, 2)
    scale = rng.uniform(0.1, 10.0, size=(500, 1))

    scaled = hamiltonian(scale * p, nominal, bounds, box)

    np.testing.assert_allclose(scaled, scale[:, 0] * hamiltonian(p, nominal, bounds, box), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("widen_d1, widen_d2", [(True, False), (False, True), (True, True)])
def test_larger_disturbance_boxes_never_increase_hamiltonian(widen_d1, widen_d2):
    """Größere Boxen D1 oder D2 geben dem Gegenspieler mehr Möglichkeiten: H fällt oder bleibt gleich."""
    rng = np.random.default_rng(22)
    p, nominal, bounds, box = random_game_batch(rng, 500, 3, 2)
    grow1 = rng.uniform(0.0, 0.5, size=(500, 3)) if widen_d1 else np.zeros((500, 3))
    grow2 = rng.uniform(0.0, 0.5, size=(500, 3, 2)) if widen_d2 else np.zeros((500, 3, 2))
    wider = UncertaintyBoundsEval(
        d1_lo=bounds.d1_lo - grow1,
        d1_hi=bounds.d1_hi + grow1,
        d2_lo=bounds.d2_lo - grow2,
        d2_hi=bounds.d2_hi + grow2,
    )

    original = hamiltonian(p, nominal, bounds, box)
    widened = hamiltonian(p, nominal, wider, box)

    assert np.all(widened <= original + 1e-12)
    assert np.any(widened < original - 1e-6)


def test_batch_matches_single_point_evaluation():
    rng = np.random.default_rng(7)
    points = [random_game_point(rng, 2, 1) for _ in range(6)]
    box = points[0][3]
    p = np.stack([point[0] for point in points])
    nominal = AffineEval(f1=np.stack([pt[1].f1 for pt in points]), f2=np.stack([pt[1].f2 for pt in points]))
    bounds = UncertaintyBoundsEval(
        d1_lo=np.stack([pt[2].d1_lo for pt in points]),
        d1_hi=np.stack([pt[2].d1_hi for pt in points]),
        d2_lo=np.stack([pt[2].d2_lo for pt in points]),
        d2_hi=np.stack([pt[2].d2_hi for pt in points]),
    )

    batch = hamiltonian(p, nominal, bounds, box)

    for k, (pk, nominal_k, bounds_k, _) in enumerate(points):
        single = solve_game_batch(pk, nominal_k, bounds_k, box)
        assert batch[k] == pytest.approx(float(single.h_value), abs=1e-12)


# endregion

# region ↓ Sonderfälle ↓

def test_zero_costate_yields_zero_control_and_value():
    """Bei p = 0 gilt der "sonst"-Zweig: u* = 0 und H = 0."""
    nominal = AffineEval(f1=np.array([1.0, 2.0]), f2=np.array([[1.0], [1.0]]))
    bounds = UncertaintyBoundsEval.zeros(nominal.f1, nominal.f2)
    box = ControlBox(lo=np.array([-1.0]), hi=np.array([2.0]))

    solution = solve_game_batch(np.zeros(2), nominal, bounds, box)

    np.testing.assert_array_equal(solution.u_star, [0.0])
    assert float(solution.h_value) == 0.0


def test_ambiguous_actuation_selects_zero_control():
    """Wenn die Störung das Vorzeichen von pᵀf2 umkehren kann, ist u* = 0."""
    p = np.array([1.0])
    nominal = AffineEval(f1=np.array([0.0]), f2=np.array([[0.1]]))
    bounds = UncertaintyBoundsEval(
        d1_lo=np.zeros(1), d1_hi=np.zeros(1), d2_lo=np.array([[-0.5]]), d2_hi=np.array([[0.5]]),
    )
    box = ControlBox(lo=np.array([-1.0]), hi=np.array([1.0]))

    solution = solve_game_batch(p, nominal, bounds, box)

    np.testing.assert_array_equal(solution.u_star, [0.0])
    assert float(solution.h_value) == pytest.approx(0.0)


# endregion

# region ↓ Partial Game und Dissipation ↓

def test_partial_game_is_dominated_by_full_game():
    """Das aufgeweitete Spiel ist für die Steuerung nie günstiger: H_partial ≤ H."""
    rng = np.random.default_rng(11)
    for _ in range(200):
        p, nominal, bounds, box = random_game_point(rng, 3, 2)

        full = float(hamiltonian(p, nominal, bounds, box))
        partial = float(hamiltonian(p, nominal, partial_game_bounds(bounds, box), box))

        assert partial <= full + 1e-12


def test_dissipation_bounds_dominate_hamiltonian_slope():
    """α_i ist eine obere Schranke der Lipschitz-Konstante von H in p_i."""
    rng = np.random.default_rng(5)
    for _ in range(100):
        p, nominal, bounds, box = random_game_point(rng, 2, 1)
        alpha = dissipation_bounds(nominal, bounds, box)
        for i in range(2):
            shifted = p.copy()
            shifted[i] += rng.normal()
            change = abs(float(hamiltonian(shifted, nominal, bounds, box) - hamiltonian(p, nominal, bounds, box)))
            assert change <= alpha[i] * abs(shifted[i] - p[i]) + 1e-12


def test_dissipation_bounds_formula():
    nominal = AffineEval(f1=np.array([1.0, -2.0]), f2=np.array([[0.0], [-3.0]]))
    bounds = UncertaintyBoundsEval(
        d1_lo=np.array([-0.1, -0.3]), d1_hi=np.array([0.2, 0.1]),
        d2_lo=np.array([[0.0], [-0.5]]), d2_hi=np.array([[0.0], [0.4]]),
    )
    box = ControlBox(lo=np.array([-2.0]), hi=np.array([1.0]))

    alpha = dissipation_bounds(nominal, bounds, box)

    np.testing.assert_allclose(alpha, [1.0 + 0.2, 2.0 + 0.3 + (3.0 + 0.5) * 2.0])

# endregion
