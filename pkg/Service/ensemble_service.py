"""Service-Modul für das gelernte, steuerungsaffine Ensemble-Modell.

Es enthält:
- Die Datengenerierung aus RK4-Rollouts mit Zufallssteuerungen.
- Das Netz `AffineNet` (NN1(x) + NN2(x)·u) und das `Ensemble` aus N_m Netzen.
- Das Training je Mitglied (Adam, MSE, eigener Seed je Mitglied).
- Nominalmodell (Mittelwert), Streuungsschranken (±α·σ, ±γ·σ) und die
  Conformal-Baseline mit zustandsunabhängigen Radien.
- Einen Gitter-Zwischenspeicher, damit mehrere Methoden dasselbe Ensemble
  nur einmal an allen Knoten auswerten.

Zustände werden am Netzeingang normiert, Ausgaben als
ẋ = μ_y + s_y ⊙ (NN1(x) + NN2(x)·u) zurückgerechnet. Steuerungen gehen
unnormiert ein, damit die affine Struktur exakt erhalten bleibt.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from Config.logging_config import get_logger
from Reachability.dynamics_operations import ControlAffineDynamics
from Reachability.reach_errors import EnsembleError
from Reachability.reach_models import (
    AffineEval,
    ControlBox,
    Grid,
    UncertainAffineModel,
    UncertaintyBoundsEval,
)
from Service.service_models import ConformalBound, Dataset, MemberLosses
from Service.sim_service import rk4_step

logger = get_logger(__name__)

ACTIVATIONS: dict[str, Callable[[], nn.Module]] = {
    "tanh": nn.Tanh,
    "softplus": nn.Softplus,
    "elu": nn.ELU,
    "relu": nn.ReLU,
}

# Inferenz in Blöcken, um den Speicher bei 3D-Gittern zu begrenzen
EVAL_CHUNK = 65536


# region ↓ Datensatz ↓

def generate_dataset(
        truth: ControlAffineDynamics,
        box: ControlBox,
        n_trajectories: int,
        steps: int,
        dt: float,
        initial_lo: Sequence[float],
        initial_hi: Sequence[float],
        seed: int,
        validity_lo: Sequence[float] | None = None,
        validity_hi: Sequence[float] | None = None,
        wrap: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Dataset:
    """Erzeugt Trainingsdaten aus Rollouts mit stückweise konstanten Zufallssteuerungen.

    Alle Trajektorien werden gemeinsam integriert. Eine Trajektorie, die den
    Gültigkeitsbereich verlässt, wird abgeschnitten; ihre bisherigen Zeilen
    bleiben erhalten. Die Labels sind exakt ẋ = f1(x) + f2(x)·u.

    Args:
        truth (ControlAffineDynamics): Die wahre Dynamik.
        box (ControlBox): Verteilung der Zufallssteuerungen (gleichverteilt).
        n_trajectories (int): Anzahl der Trajektorien.
        steps (int): Schritte je Trajektorie.
        dt (float): Schrittweite (> 0).
        initial_lo (Sequence[float]): Untere Ecke der Startzustände.
        initial_hi (Sequence[float]): Obere Ecke der Startzustände.
        seed (int): Seed des Zufallsgenerators.
        validity_lo (Sequence[float] | None): Untere Ecke des Gültigkeitsbereichs.
        validity_hi (Sequence[float] | None): Obere Ecke des Gültigkeitsbereichs.
        wrap (Callable | None): Abbildung periodischer Koordinaten.

    Raises:
        EnsembleError: Bei ``dt <= 0``.

    Returns:
        Dataset: Alle Zeilen mit der Markierung ``train`` und der Trajektorien-Nummer.
    """
    if dt <= 0.0:
        raise EnsembleError("ensemble.dt", f"dt muss positiv sein, erhalten {dt}")
    rng = np.random.default_rng(seed)
    lower = np.asarray(initial_lo, dtype=float)
    upper = np.asarray(initial_hi, dtype=float)
    x = rng.uniform(lower, upper, size=(n_trajectories, lower.shape[0]))
    if wrap is not None:
        x = wrap(x)
    active = np.ones(n_trajectories, dtype=bool)
    ids = np.arange(n_trajectories)
    xs, us, xdots, owners = [], [], [], []
    for _ in range(steps):
        u = rng.uniform(box.lo, box.hi, size=(n_trajectories, box.dim))
        owners.append(ids[active])
        xs.append(x[active])
        us.append(u[active])
        xdots.append(truth(x[active], u[active]))
        x = rk4_step(truth, x, u, dt)
        if wrap is not None:
            x = wrap(x)
        if validity_lo is not None and validity_hi is not None:
            inside = np.all((x >= np.asarray(validity_lo)) & (x <= np.asarray(validity_hi)), axis=-1)
            active &= inside
        if not active.any():
            break

    x_rows = np.concatenate(xs) if xs else np.empty((0, lower.shape[0]))
    u_rows = np.concatenate(us) if us else np.empty((0, box.dim))
    xdot_rows = np.concatenate(xdots) if xdots else np.empty((0, lower.shape[0]))
    trajectory = np.concatenate(owners) if owners else np.empty(0, dtype=int)
    logger.info(f"Datensatz erzeugt: {x_rows.shape[0]} Zeilen aus {n_trajectories} Trajektorien (Seed {seed})")
    return Dataset(
        x=x_rows,
        u=u_rows,
        xdot=xdot_rows,
        split=np.full(x_rows.shape[0], "train", dtype=object),
        trajectory=trajectory,
    )


def split_dataset(
        dataset: Dataset,
        n_train: int | None,
        n_validation: int,
        n_calibration: int,
        seed: int,
) -> Dataset:
    """Teilt den Datensatz trajektorienweise in Training, Validierung und Kalibrierung.

    Die Trajektorien werden mit ``seed`` gemischt. Das Training erhält die
    ersten ``n_train`` Zeilen in dieser Reihenfolge, also ganze Rollouts
    (nur der letzte kann angeschnitten sein). Validierung und Kalibrierung
    werden zufällig aus den Zeilen der übrigen Trajektorien gezogen und
    teilen mit dem Training keine Trajektorie.

    Args:
        dataset (Dataset): Der vollständige Datensatz.
        n_train (int | None): Trainingszeilen, ``None`` für alle Trajektorien
            außer den für Validierung und Kalibrierung benötigten.
        n_validation (int): Validierungszeilen.
        n_calibration (int): Kalibrierungszeilen.
        seed (int): Seed der Mischung.

    Raises:
        EnsembleError: Wenn der Datensatz zu klein ist.

    Returns:
        Dataset: Nur die gezogenen Zeilen, markiert nach Split.
    """
    held_out = n_validation + n_calibration
    _, inverse = np.unique(dataset.trajectory_ids, return_inverse=True)
    n_trajectories = int(inverse.max()) + 1 if len(dataset) else 0
    rng = np.random.default_rng(seed)
    rank = np.empty(n_trajectories, dtype=int)
    rank[rng.permutation(n_trajectories)] = np.arange(n_trajectories)
    row_rank = rank[inverse]
    # Trajektorien in gezogener Reihenfolge, Zeilen innerhalb zeitlich geordnet
    ordered = np.lexsort((np.arange(len(dataset)), row_rank))
    ordered_rank = row_rank[ordered]

    if n_train is None:
        from_back = np.cumsum(np.bincount(row_rank, minlength=n_trajectories)[::-1])
        reserved = 0 if held_out == 0 else int(np.searchsorted(from_back, held_out)) + 1
        boundary = n_trajectories - min(reserved, n_trajectories)
        train = ordered[ordered_rank < boundary]
        rest = ordered[ordered_rank >= boundary]
    elif 0 < n_train <= len(dataset):
        train = ordered[:n_train]
        rest = ordered[ordered_rank > ordered_rank[n_train - 1]]
    else:
        train = rest = np.empty(0, dtype=int)
    if len(train) == 0 or len(rest) < held_out:
        raise EnsembleError(
            "ensemble.dataset_size",
            f"{len(dataset)} Zeilen aus {n_trajectories} Trajektorien reichen nicht für {n_train} Training, "
            f"{n_validation} Validierung und {n_calibration} Kalibrierung aus getrennten Trajektorien",
        )
    rest = rng.permutation(rest)
    validation = rest[:n_validation]
    calibration = rest[n_validation:held_out]
    logger.debug(
        f"Split mit Seed {seed}: {len(train)} Trainingszeilen aus "
        f"{len(np.unique(inverse[train]))} Trajektorien, {len(rest)} Zeilen zurückgehalten"
    )
    rows = np.concatenate([train, validation, calibration])
    split = np.array(
        ["train"] * len(train) + ["validation"] * n_validation + ["calibration"] * n_calibration, dtype=object,
    )
    return dataset.take(rows, split)


# endregion

# region ↓ Netze ↓

def _mlp(inputs: int, outputs: int, hidden_layers: int, hidden_width: int, activation: str) -> nn.Sequential:
    layers: list[nn.Module] = []
    width = inputs
    for _ in range(hidden_layers):
        layers += [nn.Linear(width, hidden_width), ACTIVATIONS[activation]()]
        width = hidden_width
    layers.append(nn.Linear(width, outputs))
    return nn.Sequential(*layers)


class AffineNet(nn.Module):
    """Steuerungsaffines Netz: prediction(x, u) = NN1(x) + NN2(x)·u (normierte Einheiten)."""

    def __init__(
            self,
            state_dim: int,
            control_dim: int,
            hidden_layers: int = 3,
            hidden_width: int = 256,
            activation: str = "tanh",
    ):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise EnsembleError("ensemble.activation", f"Unbekannte Aktivierung '{activation}'")
        self.state_dim = state_dim
        self.control_dim = control_dim
        self.net1 = _mlp(state_dim, state_dim, hidden_layers, hidden_width, activation)
        self.net2 = _mlp(state_dim, state_dim * control_dim, hidden_layers, hidden_width, activation)

    def affine_parts(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Gibt NN1(x) der Form ``(B, n)`` und NN2(x) der Form ``(B, n, m)`` zurück."""
        return self.net1(x), self.net2(x).reshape(-1, self.state_dim, self.control_dim)

    def forward(self, x: torch.Tensor, u: torch.Tensor) -> torch.Tensor:
        f1, f2 = self.affine_parts(x)
        return f1 + torch.einsum("bij,bj->bi", f2, u)


# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class Normalizer:
    """Verschiebung und Skalierung je Dimension (Skalen > 0)."""
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "Normalizer":
        """Mittelwert und Standardabweichung der Spalten; konstante Spalten erhalten Skala 1."""
        scale = np.std(data, axis=0)
        return cls(mean=np.mean(data, axis=0), scale=np.where(scale > 1e-8, scale, 1.0))

    def normalize(self, data: np.ndarray) -> np.ndarray:
        """Bildet auf Mittelwert 0 und Varianz 1 ab."""
        return (data - self.mean) / self.scale


@dataclass(eq=False)
class Ensemble:
    """N_m gleich aufgebaute AffineNets, die sich nur in der Initialisierung unterscheiden."""
    members: list[AffineNet]
    input_normalizer: Normalizer
    output_normalizer: Normalizer
    seed: int
    hidden_layers: int
    hidden_width: int
    activation: str
    losses: list[MemberLosses] = field(default_factory=list)

    @property
    def state_dim(self) -> int:
        """Anzahl der Zustandsdimensionen."""
        return self.members[0].state_dim

    @property
    def control_dim(self) -> int:
        """Anzahl der Steuerdimensionen."""
        return self.members[0].control_dim

    def member_outputs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Zurückgerechnete Teilnetz-Ausgaben aller Mitglieder.

        f1^k = μ_y + s_y ⊙ NN1^k(x), f2^k = s_y ⊙ NN2^k(x).

        Args:
            x (np.ndarray): Zustände der Form ``(..., n)``.

        Returns:
            tuple: f1 der Form ``(N_m, ..., n)`` und f2 der Form ``(N_m, ..., n, m)``.
        """
        x = np.asarray(x, dtype=float)
        batch_shape = x.shape[:-1]
        flat = self.input_normalizer.normalize(x.reshape(-1, self.state_dim))
        f1_chunks, f2_chunks = [], []
        with torch.no_grad():
            for start in range(0, flat.shape[0], EVAL_CHUNK):
                inputs = torch.as_tensor(flat[start:start + EVAL_CHUNK], dtype=torch.float32)
                parts = [member.affine_parts(inputs) for member in self.members]
                f1_chunks.append(np.stack([p[0].numpy() for p in parts]).astype(float))
                f2_chunks.append(np.stack([p[1].numpy() for p in parts]).astype(float))
        scale = self.output_normalizer.scale
        f1 = self.output_normalizer.mean + scale * np.concatenate(f1_chunks, axis=1)
        f2 = scale[:, None] * np.concatenate(f2_chunks, axis=1)
        members = len(self.members)
        return (
            f1.reshape((members,) + batch_shape + (self.state_dim,)),
            f2.reshape((members,) + batch_shape + (self.state_dim, self.control_dim)),
        )

    def predict(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Vorhersagen ẋ aller Mitglieder, Form ``(N_m, ..., n)``."""
        f1, f2 = self.member_outputs(x)
        return f1 + np.einsum("k...ij,...j->k...i", f2, np.asarray(u, dtype=float))


# endregion

# region ↓ Training ↓

def _train_member(
        net: AffineNet,
        x: torch.Tensor,
        u: torch.Tensor,
        y: torch.Tensor,
        validation: tuple[torch.Tensor, torch.Tensor, torch.Tensor] | None,
        epochs: int,
        lr: float,
        batch_size: int,
        seed: int,
) -> tuple[float, float | None]:
    optimizer = torch.optim.Adam(net.parameters(), lr=lr)
    loss_fn = nn.MSELoss()
    generator = torch.Generator().manual_seed(seed)
    rows = x.shape[0]
    train_loss = math.nan
    for epoch in range(epochs):
        order = torch.randperm(rows, generator=generator)
        total = 0.0
        for start in range(0, rows, batch_size):
            batch = order[start:start + batch_size]
            optimizer.zero_grad()
            loss = loss_fn(net(x[batch], u[batch]), y[batch])
            if not torch.isfinite(loss):
                raise EnsembleError(
                    "ensemble.nonfinite_loss",
                    f"Nicht-endlicher Verlust in Epoche {epoch} (Seed {seed}), "
                    f"Lernrate {lr} verkleinern (z.B. auf {lr / 10:g})",
                )
            loss.backward()
            optimizer.step()
            total += loss.item() * batch.shape[0]
        train_loss = total / rows
    validation_loss = None
    if validation is not None:
        with torch.no_grad():
            validation_loss = loss_fn(net(validation[0], validation[1]), validation[2]).item()
    return train_loss, validation_loss


def train_ensemble(
        dataset: Dataset,
        members: int = 5,
        hidden_layers: int = 3,
        hidden_width: int = 256,
        activation: str = "tanh",
        epochs: int = 2000,
        lr: float = 1e-3,
        batch_size: int = 256,
        seed: int = 0,
) -> Ensemble:
    """Trainiert N_m Mitglieder unabhängig auf denselben Trainingszeilen.

    Mitglied k verwendet den Seed ``seed + k`` für Initialisierung und
    Mischreihenfolge. Normierer werden auf dem Trainings-Split bestimmt.

    Args:
        dataset (Dataset): Datensatz mit Split-Markierungen.
        members (int): N_m (mindestens 2).
        hidden_layers (int): Verdeckte Schichten je Teilnetz.
        hidden_width (int): Neuronen je verdeckter Schicht.
        activation (str): Name der Aktivierung.
        epochs (int): Epochen je Mitglied.
        lr (float): Lernrate von Adam.
        batch_size (int): Minibatch-Größe.
        seed (int): Basis-Seed.

    Raises:
        EnsembleError: Bei N_m < 2, leerem Trainings-Split oder nicht-endlichem Verlust.

    Returns:
        Ensemble: Das trainierte Ensemble mit den Verlusten je Mitglied.
    """
    if members < 2:
        raise EnsembleError("ensemble.members", f"Ein Ensemble benötigt mindestens 2 Mitglieder, erhalten {members}")
    train = dataset.subset("train")
    if len(train) == 0:
        raise EnsembleError("ensemble.empty", "Der Trainings-Split ist leer")
    input_normalizer = Normalizer.fit(train.x)
    output_normalizer = Normalizer.fit(train.xdot)

    def tensors(part: Dataset) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        return (
            torch.as_tensor(input_normalizer.normalize(part.x), dtype=torch.float32),
            torch.as_tensor(part.u, dtype=torch.float32),
            torch.as_tensor(output_normalizer.normalize(part.xdot), dtype=torch.float32),
        )

    x, u, y = tensors(train)
    validation_part = dataset.subset("validation")
    validation = tensors(validation_part) if len(validation_part) > 0 else None

    nets, losses = [], []
    for k in range(members):
        member_seed = seed + k
        torch.manual_seed(member_seed)
        net = AffineNet(dataset.state_dim, dataset.control_dim, hidden_layers, hidden_width, activation)
        train_loss, validation_loss = _train_member(net, x, u, y, validation, epochs, lr, batch_size, member_seed)
        net.eval()
        nets.append(net)
        losses.append(MemberLosses(member=k, seed=member_seed, train_loss=train_loss, validation_loss=validation_loss))
        logger.info(f"Mitglied {k} (Seed {member_seed}): Trainingsverlust {train_loss:.3e}, Validierung {validation_loss}")
    return Ensemble(
        members=nets,
        input_normalizer=input_normalizer,
        output_normalizer=output_normalizer,
        seed=seed,
        hidden_layers=hidden_layers,
        hidden_width=hidden_width,
        activation=activation,
        losses=losses,
    )


# endregion

# region ↓ Modell und Schranken ↓

def nominal(ensemble: Ensemble, x: np.ndarray) -> AffineEval:
    """Mittelwert der zurückgerechneten Teilnetz-Ausgaben über alle Mitglieder."""
    f1, f2 = ensemble.member_outputs(x)
    return AffineEval(f1=np.mean(f1, axis=0), f2=np.mean(f2, axis=0))


def spread_bounds(ensemble: Ensemble, x: np.ndarray, alpha: float, gamma: float) -> UncertaintyBoundsEval:
    """Symmetrische Schranken D1 = [−α·σ1, α·σ1], D2 = [−γ·σ2, γ·σ2].

    σ ist die Stichproben-Standardabweichung (Divisor N_m − 1) über die
    Mitglieder, für f2 elementweise.

    Raises:
        EnsembleError: Bei negativem α oder γ.
    """
    if alpha < 0.0 or gamma < 0.0:
        raise EnsembleError("ensemble.scale", f"alpha und gamma dürfen nicht negativ sein: {alpha}, {gamma}")
    f1, f2 = ensemble.member_outputs(x)
    sigma1 = np.std(f1, axis=0, ddof=1)
    sigma2 = np.std(f2, axis=0, ddof=1)
    return UncertaintyBoundsEval(d1_lo=-alpha * sigma1, d1_hi=alpha * sigma1, d2_lo=-gamma * sigma2, d2_hi=gamma * sigma2)


def ensemble_model(ensemble: Ensemble, box: ControlBox, alpha: float, gamma: float, name: str = "ours") -> UncertainAffineModel:
    """Verpackt das Ensemble als unsicheres Modell (α = γ = 0 ergibt das Mittelwertmodell)."""
    return UncertainAffineModel(
        nominal=lambda x: nominal(ensemble, x),
        bounds=lambda x: spread_bounds(ensemble, x, alpha, gamma),
        control_box=box,
        name=name,
    )


# pylint: disable=too-few-public-methods
@dataclass(eq=False)
class GridCachedEnsemble:
    """Ensemble, dessen Mitgliedsausgaben an den Gitterknoten nur einmal berechnet werden.

    Alle Methoden einer Studie tabulieren dasselbe Ensemble auf demselben
    Gitter; Abfragen an anderen Zuständen (Regler, Kalibrierung) werden
    durchgereicht.
    """
    ensemble: Ensemble
    grid: Grid
    _cache: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def member_outputs(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Wie `Ensemble.member_outputs`, für ``grid.states`` aus dem Zwischenspeicher."""
        if x is not self.grid.states:
            return self.ensemble.member_outputs(x)
        if self._cache is None:
            self._cache = self.ensemble.member_outputs(x)
        return self._cache


def tabulate_model(ensemble: Ensemble, grid: Grid) -> GridCachedEnsemble:
    """Zwischenspeicher der Mitgliedsausgaben an allen Knoten von ``grid``.

    Nominalmodell und Schranken für beliebige α, γ werden daraus berechnet
    und stimmen mit der direkten Auswertung überein.
    """
    return GridCachedEnsemble(ensemble=ensemble, grid=grid)


def conformal_bounds(ensemble: Ensemble, dataset: Dataset, coverage: float = 0.95) -> ConformalBound:
    """Split-Conformal-Radien aus dem Kalibrierungs-Split mit gemeinsamer Abdeckung.

    Jede Dimension wird mit dem mittleren Residuenbetrag s_i skaliert, der
    Score einer Zeile ist max_i |r_i| / s_i. Mit q als k-kleinstem Score,
    k = ⌈(n_cal + 1)·coverage⌉, sind die Radien q·s_i; eine neue Zeile liegt
    dann mit Wahrscheinlichkeit ≥ coverage in allen Dimensionen zugleich
    innerhalb. Dimensionen ohne Residuen erhalten Radius 0.

    Raises:
        EnsembleError: Bei ``coverage`` außerhalb von (0, 1) oder k > n_cal.
    """
    if not 0.0 < coverage < 1.0:
        raise EnsembleError("ensemble.coverage", f"coverage muss in (0, 1) liegen, erhalten {coverage}")
    calibration = dataset.subset("calibration")
    n_cal = len(calibration)
    # Runden entfernt Gleitkommarauschen, z.B. 20·0.95
    rank = math.ceil(round((n_cal + 1) * coverage, 9))
    if rank > n_cal:
        raise EnsembleError(
            "ensemble.calibration_size",
            f"{n_cal} Kalibrierungszeilen reichen nicht für coverage {coverage} (benötigter Rang {rank})",
        )
    residuals = np.abs(calibration.xdot - nominal(ensemble, calibration.x).apply(calibration.u))
    scale = np.mean(residuals, axis=0)
    active = scale > 0.0
    scores = np.max(residuals[:, active] / scale[active], axis=1) if active.any() else np.zeros(n_cal)
    quantile = float(np.sort(scores)[rank - 1])
    radius = quantile * scale
    logger.info(f"Conformal-Radien bei coverage {coverage} (Score-Quantil {quantile:.4f}): {np.round(radius, 4).tolist()}")
    return ConformalBound(radius=radius, coverage=coverage, n_calibration=n_cal)


# endregion

# region ↓ Gütemaße ↓

def r2_scores(ensemble: Ensemble, dataset: Dataset, split: str = "validation") -> np.ndarray:
    """Bestimmtheitsmaß je Ausgabedimension der Mittelwertvorhersage."""
    part = dataset.subset(split)
    if len(part) == 0:
        raise EnsembleError("ensemble.empty", f"Split '{split}' ist leer")
    prediction = nominal(ensemble, part.x).apply(part.u)
    residual = np.sum((part.xdot - prediction) ** 2, axis=0)
    total = np.sum((part.xdot - np.mean(part.xdot, axis=0)) ** 2, axis=0)
    return 1.0 - residual / np.where(total > 0.0, total, 1.0)


def empirical_coverage(ensemble: Ensemble, bound: ConformalBound, dataset: Dataset, split: str = "validation") -> float:
    """Anteil der Zeilen, deren Residuen in allen Dimensionen innerhalb der Radien liegen."""
    part = dataset.subset(split)
    if len(part) == 0:
        raise EnsembleError("ensemble.empty", f"Split '{split}' ist leer")
    residuals = np.abs(part.xdot - nominal(ensemble, part.x).apply(part.u))
    return float(np.mean(np.all(residuals <= bound.radius, axis=1)))

# endregion
