"""Gemeinsame Fixtures und Hilfsfunktionen der Testsuite.

Es enthält:
- Kleine Konfigurationen (grobe Gitter, winzige Netze), damit Studien in
  Sekunden laufen.
- Ein Brute-Force-Orakel für das Maximin-Spiel, einzeln und vektorisiert:
  Maximum über ein Gitter von Steuerungen (inklusive Ecken und Null),
  Minimum über die Ecken der Störungsboxen.
- Ein `StubEnsemble`, das dieselbe Schnittstelle wie ein trainiertes Ensemble
  bietet, dessen Mitglieder aber eine analytische Dynamik plus bekannte
  Abweichungen ausgeben, und ein `BiasedEnsemble` mit zustandsabhängig
  verschobenem Mittelwert.
"""
import itertools

import numpy as np
import pytest

from Config.experiment_config import ExperimentConfig, load_config
from Reachability.dynamics_operations import ControlAffineDynamics, PendulumParams, pendulum_truth
from Reachability.reach_models import AffineEval, ControlBox, UncertaintyBoundsEval


# region ↓ Orakel ↓

def game_oracle(
        p: np.ndarray,
        nominal: AffineEval,
        bounds: UncertaintyBoundsEval,
        box: ControlBox,
        resolution: int = 21,
) -> float:
    """max_u min_{d1, d2} ⟨p, f̄1 + d1 + (f̄2 + d2)·u⟩ durch Aufzählung.

    Die Steuerungen laufen über ein Gitter je Dimension, ergänzt um 0. Für
    jede Steuerung wird das Minimum über alle Ecken von D1 und D2 gebildet.
    """
    axes = [np.union1d(np.linspace(box.lo[j], box.hi[j], resolution), [0.0]) for j in range(box.dim)]
    n = p.shape[0]
    d1_corners = [np.array(c) for c in itertools.product(*[(bounds.d1_lo[i], bounds.d1_hi[i]) for i in range(n)])]
    entries = list(itertools.product(range(n), range(box.dim)))
    d2_corners = []
    for choice in itertools.product((0, 1), repeat=len(entries)):
        d2 = np.empty_like(nominal.f2)
        for (i, j), bit in zip(entries, choice):
            d2[i, j] = bounds.d2_hi[i, j] if bit else bounds.d2_lo[i, j]
        d2_corners.append(d2)
    best = -np.inf
    for u in itertools.product(*axes):
        u = np.asarray(u)
        worst = min(
            float(p @ (nominal.f1 + d1 + (nominal.f2 + d2) @ u))
            for d1 in d1_corners
            for d2 in d2_corners
        )
        best = max(best, worst)
    return best


def random_game_point(rng: np.random.Generator, n: int, m: int) -> tuple:
    """Zufälliger Spielpunkt mit ursprungshaltigen Boxen (p, Nominal, Schranken, Steuerbox)."""
    p = rng.normal(size=n)
    nominal = AffineEval(f1=rng.normal(size=n), f2=rng.normal(size=(n, m)))
    bounds = UncertaintyBoundsEval(
        d1_lo=-rng.uniform(0.0, 1.0, size=n),
        d1_hi=rng.uniform(0.0, 1.0, size=n),
        d2_lo=-rng.uniform(0.0, 0.5, size=(n, m)),
        d2_hi=rng.uniform(0.0, 0.5, size=(n, m)),
    )
    box = ControlBox(lo=-rng.uniform(0.1, 2.0, size=m), hi=rng.uniform(0.1, 2.0, size=m))
    return p, nominal, bounds, box


def batch_game_oracle(
        p: np.ndarray,
        nominal: AffineEval,
        bounds: UncertaintyBoundsEval,
        box: ControlBox,
        resolution: int = 21,
) -> np.ndarray:
    """Vektorisierte Fassung von `game_oracle` für Punkte ``(B, n)`` mit gemeinsamer Steuerbox.

    Das innere Minimum über die Boxen ist separabel und wird je Koordinate
    gebildet; das Maximum läuft über dasselbe Steuerungsgitter.
    """
    axes = [np.union1d(np.linspace(box.lo[j], box.hi[j], resolution), [0.0]) for j in range(box.dim)]
    controls = np.array(list(itertools.product(*axes)))
    drift = np.sum(p * nominal.f1, axis=-1) + np.sum(np.minimum(p * bounds.d1_lo, p * bounds.d1_hi), axis=-1)
    drive = np.einsum("bi,bij,kj->bk", p, nominal.f2, controls)
    weights = p[:, None, :, None] * controls[None, :, None, :]
    worst = np.sum(
        np.minimum(weights * bounds.d2_lo[:, None], weights * bounds.d2_hi[:, None]), axis=(-2, -1),
    )
    return np.max(drift[:, None] + drive + worst, axis=1)


def random_game_batch(rng: np.random.Generator, size: int, n: int, m: int) -> tuple:
    """``size`` zufällige Spielpunkte mit gemeinsamer Steuerbox (p, Nominal, Schranken, Steuerbox)."""
    p = rng.normal(size=(size, n))
    nominal = AffineEval(f1=rng.normal(size=(size, n)), f2=rng.normal(size=(size, n, m)))
    bounds = UncertaintyBoundsEval(
        d1_lo=-rng.uniform(0.0, 1.0, size=(size, n)),
        d1_hi=rng.uniform(0.0, 1.0, size=(size, n)),
        d2_lo=-rng.uniform(0.0, 0.5, size=(size, n, m)),
        d2_hi=rng.uniform(0.0, 0.5, size=(size, n, m)),
    )
    box = ControlBox(lo=-rng.uniform(0.1, 2.0, size=m), hi=rng.uniform(0.1, 2.0, size=m))
    return p, nominal, bounds, box


# endregion

# region ↓ Stub-Ensemble ↓

class StubEnsemble:
    """Ensemble-Ersatz: Mitglied k gibt f1 + s_k·offset und f2 + s_k·actuation_offset aus, s_k = k − (N−1)/2."""

    def __init__(self, dynamics: ControlAffineDynamics, members: int = 5, offset: float = 0.0, actuation_offset: float = 0.0):
        self.dynamics = dynamics
        shifts = np.arange(members) - (members - 1) / 2.0
        self.offsets = shifts * offset
        self.actuation_offsets = shifts * actuation_offset

    def member_outputs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        evaluation = self.dynamics.evaluate(np.asarray(x, dtype=float))
        f1 = np.stack([evaluation.f1 + shift for shift in self.offsets])
        f2 = np.stack([evaluation.f2 + shift for shift in self.actuation_offsets])
        return f1, f2


class BiasedEnsemble:
    """Ensemble-Ersatz mit Verzerrung b(x) ≥ 0 in θ̈ und Schranken α·σ = b.

    b(x) = base + bump·clip(|θ̇| − 3, 0, 1): schnelle Zustände sind stärker
    verzerrt. Der Mittelwert liegt um b neben der Wahrheit, die Schranken
    α·σ = b enthalten sie gerade noch. f2 ist exakt, σ2 = 0.
    """

    def __init__(self, dynamics: ControlAffineDynamics, alpha: float, members: int = 5, base: float = 4.0, bump: float = 11.0):
        self.dynamics = dynamics
        self.alpha = alpha
        self.base = base
        self.bump = bump
        self.shifts = np.arange(members) - (members - 1) / 2.0

    def bias(self, x: np.ndarray) -> np.ndarray:
        return self.base + self.bump * np.clip(np.abs(x[..., 1]) - 3.0, 0.0, 1.0)

    def member_outputs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        evaluation = self.dynamics.evaluate(x)
        bias = self.bias(x)
        spread = bias / (self.alpha * np.std(self.shifts, ddof=1))
        f1 = np.stack([evaluation.f1 for _ in self.shifts])
        f1[..., 1] += bias + self.shifts.reshape((-1,) + (1,) * bias.ndim) * spread
        f2 = np.stack([evaluation.f2 for _ in self.shifts])
        return f1, f2


# endregion

# region ↓ Fixtures ↓

@pytest.fixture
def pendulum():
    """Pendel mit den Standardparametern."""
    return pendulum_truth(PendulumParams())


@pytest.fixture
def undamped_pendulum():
    """Pendel ohne Reibung (Energie bleibt bei u = 0 erhalten)."""
    return pendulum_truth(PendulumParams(friction=0.0))


@pytest.fixture
def small_config(tmp_path) -> ExperimentConfig:
    """Konfiguration mit groben Gittern, kleinen Datensätzen und winzigen Netzen."""
    return load_config(None, [
        f"output_dir={tmp_path / 'run'}",
        "pendulum.grid.counts=[41, 41]",
        "pendulum.data.n_trajectories=60",
        "pendulum.data.n_validation=40",
        "pendulum.data.n_calibration=100",
        "dubins.grid.counts=[21, 21, 12]",
        "dubins.data.n_trajectories=5",
        "dubins.data.steps=10",
        "dubins.data.n_validation=5",
        "dubins.demo.duration=1.0",
        "ensemble.members=2",
        "ensemble.hidden_layers=1",
        "ensemble.hidden_width=8",
        "ensemble.epochs=3",
        "ensemble.batch_size=64",
        "solver.max_steps=2000",
        "study.n_train=100",
        "study.seeds=1",
        "study.ablation_sizes=[50, 100]",
    ])

# endregion
