"""Modul für die geschlossene Lösung des Maximin-Spiels und den Hamiltonian.

Unter der Annahme, dass D1(x), D2(x) und U Hyperquader mit dem Ursprung sind,
lassen sich die optimale Steuerung u* sowie die optimalen Störungen d1* und
d2* komponentenweise über Vorzeichenregeln bestimmen. Bei exakten Nullen gilt
immer der Zweig "≥ 0"; der "sonst"-Fall der Steuerung liefert u_j = 0.

Alle Funktionen sind rein und über führende Achsen gebatcht, sodass der
Solver sie für alle Gitterknoten gleichzeitig auswerten kann.
"""
import numpy as np

from Reachability.reach_models import (
    AffineEval,
    ControlBox,
    GamePoint,
    GameSolution,
    UncertaintyBoundsEval,
)


# region ↓ Optimale Spieler ↓

def optimal_d1(p: np.ndarray, d1_lo: np.ndarray, d1_hi: np.ndarray) -> np.ndarray:
    """Optimale additive Störung d1*: obere Schranke bei p_i < 0, sonst untere.

    Args:
        p (np.ndarray): Kostate ∇V, Form ``(..., n)``.
        d1_lo (np.ndarray): Untere Schranken.
        d1_hi (np.ndarray): Obere Schranken.

    Returns:
        np.ndarray: d1*, Form ``(..., n)``.
    """
    return np.where(p < 0.0, d1_hi, d1_lo)


def optimal_control(
        p: np.ndarray,
        f2bar: np.ndarray,
        d2_lo: np.ndarray,
        d2_hi: np.ndarray,
        box: ControlBox,
) -> np.ndarray:
    """Optimale Steuerung u* des Maximin-Spiels.

    Für jede Spalte j werden die "Best-Effort"-Störungen d2j⁺ und d2j⁻
    gebildet; u*_j ist ū_j, wenn pᵀ(f̄2j + d2j⁺) > 0, u̲_j, wenn
    pᵀ(f̄2j + d2j⁻) < 0, und sonst 0.

    Args:
        p (np.ndarray): Kostate, Form ``(..., n)``.
        f2bar (np.ndarray): Nominelles f̄2, Form ``(..., n, m)``.
        d2_lo (np.ndarray): Untere Schranken von d2, Form ``(..., n, m)``.
        d2_hi (np.ndarray): Obere Schranken von d2, Form ``(..., n, m)``.
        box (ControlBox): Zulässige Steuerungen.

    Returns:
        np.ndarray: u*, Form ``(..., m)``.
    """
    negative = (p < 0.0)[..., :, None]
    d2_plus = np.where(negative, d2_hi, d2_lo)
    d2_minus = np.where(negative, d2_lo, d2_hi)
    score_plus = np.einsum("...i,...ij->...j", p, f2bar + d2_plus)
    score_minus = np.einsum("...i,...ij->...j", p, f2bar + d2_minus)
    return np.where(score_plus > 0.0, box.hi, np.where(score_minus < 0.0, box.lo, 0.0))


def optimal_d2(p: np.ndarray, u_star: np.ndarray, d2_lo: np.ndarray, d2_hi: np.ndarray) -> np.ndarray:
    """Optimale multiplikative Störung d2*: obere Schranke bei u*_j·p_i < 0, sonst untere.

    Args:
        p (np.ndarray): Kostate, Form ``(..., n)``.
        u_star (np.ndarray): Optimale Steuerung, Form ``(..., m)``.
        d2_lo (np.ndarray): Untere Schranken.
        d2_hi (np.ndarray): Obere Schranken.

    Returns:
        np.ndarray: d2*, Form ``(..., n, m)``.
    """
    product = p[..., :, None] * u_star[..., None, :]
    return np.where(product < 0.0, d2_hi, d2_lo)


# endregion

# region ↓ Spiel und Hamiltonian ↓

def solve_game_batch(
        p: np.ndarray,
        nominal: AffineEval,
        bounds: UncertaintyBoundsEval,
        box: ControlBox,
) -> GameSolution:
    """Löst das Maximin-Spiel für beliebig viele Punkte gleichzeitig.

    Args:
        p (np.ndarray): Kostaten, Form ``(..., n)``.
        nominal (AffineEval): f̄1, f̄2 an denselben Punkten.
        bounds (UncertaintyBoundsEval): D1, D2 an denselben Punkten.
        box (ControlBox): Zulässige Steuerungen.

    Returns:
        GameSolution: u*, d1*, d2* und der Hamiltonwert je Punkt.
    """
    d1_star = optimal_d1(p, bounds.d1_lo, bounds.d1_hi)
    u_star = optimal_control(p, nominal.f2, bounds.d2_lo, bounds.d2_hi, box)
    d2_star = optimal_d2(p, u_star, bounds.d2_lo, bounds.d2_hi)
    velocity = nominal.f1 + d1_star + np.einsum("...ij,...j->...i", nominal.f2 + d2_star, u_star)
    h_value = np.einsum("...i,...i->...", p, velocity)
    return GameSolution(u_star=u_star, d1_star=d1_star, d2_star=d2_star, h_value=h_value)


def solve_game(point: GamePoint) -> GameSolution:
    """Löst das Maximin-Spiel an einem einzelnen Punkt.

    Args:
        point (GamePoint): Zustand, Kostate und Modellauswertung.

    Returns:
        GameSolution: Die geschlossene Lösung mit skalarem ``h_value``.
    """
    return solve_game_batch(point.p, point.nominal, point.bounds, point.control_box)


def hamiltonian(p: np.ndarray, nominal: AffineEval, bounds: UncertaintyBoundsEval, box: ControlBox) -> np.ndarray:
    """Wert des Hamiltonians max_u min_d1 min_d2 ⟨p, f̂⟩ je Punkt."""
    return solve_game_batch(p, nominal, bounds, box).h_value


# endregion

# region ↓ Baseline und Dissipation ↓

def partial_game_bounds(bounds: UncertaintyBoundsEval, box: ControlBox) -> UncertaintyBoundsEval:
    """Faltet d2·u in eine steuerungsunabhängige Störung d3 ein.

    a_i(x) = Σ_j max(|u̲_j|, |ū_j|) · max(|d̲2ij|, |d̄2ij|), D1' = D1 ⊕ [−a, a], D2' = 0.

    Args:
        bounds (UncertaintyBoundsEval): Die ursprünglichen Schranken.
        box (ControlBox): Zulässige Steuerungen.

    Returns:
        UncertaintyBoundsEval: Die aufgeweiteten Schranken.
    """
    d2_magnitude = np.maximum(np.abs(bounds.d2_lo), np.abs(bounds.d2_hi))
    widening = np.einsum("...ij,j->...i", d2_magnitude, box.magnitude)
    return UncertaintyBoundsEval(
        d1_lo=bounds.d1_lo - widening,
        d1_hi=bounds.d1_hi + widening,
        d2_lo=np.zeros_like(bounds.d2_lo),
        d2_hi=np.zeros_like(bounds.d2_hi),
    )


def dissipation_bounds(nominal: AffineEval, bounds: UncertaintyBoundsEval, box: ControlBox) -> np.ndarray:
    """Lax-Friedrichs-Koeffizienten α_i ≥ |∂H/∂p_i| je Punkt.

    α_i = |f̄1i| + max(|d̲1i|, |d̄1i|) + Σ_j (|f̄2ij| + max(|d̲2ij|, |d̄2ij|))·max(|u̲_j|, |ū_j|)

    Args:
        nominal (AffineEval): f̄1, f̄2.
        bounds (UncertaintyBoundsEval): D1, D2.
        box (ControlBox): Zulässige Steuerungen.

    Returns:
        np.ndarray: α, Form ``(..., n)``.
    """
    d1_magnitude = np.maximum(np.abs(bounds.d1_lo), np.abs(bounds.d1_hi))
    d2_magnitude = np.maximum(np.abs(bounds.d2_lo), np.abs(bounds.d2_hi))
    control_part = np.einsum("...ij,j->...i", np.abs(nominal.f2) + d2_magnitude, box.magnitude)
    return np.abs(nominal.f1) + d1_magnitude + control_part

# endregion
