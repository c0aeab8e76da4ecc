"""Modul zur Lösung der HJI-Variationsungleichung auf dem Gitter.

Die Wertfunktion wird in Rückwärtszeit τ integriert: explizites Euler-Verfahren
mit lokalem Lax-Friedrichs-Hamiltonian auf Upwind-Gradienten erster Ordnung,
gefolgt vom punktweisen Minimum mit l(x). Jeder Schritt liest das alte Feld
und schreibt ein neues (keine In-place-Updates).
"""
import math

import numpy as np

from Config.logging_config import get_logger
from Reachability.dynamics_operations import check_bounds
from Reachability.grid_operations import upwind_gradients
from Reachability.hamiltonian_operations import dissipation_bounds, hamiltonian
from Reachability.reach_errors import SolverError
from Reachability.reach_models import (
    Grid,
    ModelTable,
    ScalarField,
    SolveConfig,
    SolveResult,
    StepRecord,
    UncertainAffineModel,
    ValueField,
)

logger = get_logger(__name__)

# Relativer Spielraum für Rundungsfehler bei Zeitvergleichen
TIME_EPS = 1e-12


# region ↓ Modelltabelle ↓

def tabulate(model: UncertainAffineModel, grid: Grid) -> ModelTable:
    """Wertet ein unsicheres Modell an allen Gitterknoten aus.

    Args:
        model (UncertainAffineModel): Das Modell.
        grid (Grid): Das Gitter.

    Raises:
        ModelError: Wenn Schranken an einem Knoten den Ursprung nicht enthalten.

    Returns:
        ModelTable: Nominalmodell, Schranken und Dissipationskoeffizienten je Knoten.
    """
    states = grid.states
    nominal = model.nominal(states)
    bounds = check_bounds(model.bounds(states))
    dissipation = dissipation_bounds(nominal, bounds, model.control_box)
    return ModelTable(
        grid=grid,
        nominal=nominal,
        bounds=bounds,
        control_box=model.control_box,
        dissipation=dissipation,
        name=model.name,
    )


def max_stable_dt(table: ModelTable, cfl: float = 1.0) -> float:
    """Größter CFL-zulässiger Zeitschritt cfl / Σ_i (max α_i / Δx_i).

    Returns:
        float: Der Zeitschritt, ``math.inf`` für ein ruhendes System.
    """
    axes = tuple(range(table.grid.ndim))
    rate = float(np.sum(np.max(table.dissipation, axis=axes) / table.grid.spacing))
    if rate == 0.0:
        return math.inf
    return cfl / rate


# endregion

# region ↓ Zeitschritt ↓

def hji_step(value: ValueField, table: ModelTable, failure: ScalarField, dt: float, cfl: float = 1.0) -> ValueField:
    """Ein expliziter Rückwärtszeitschritt der HJI-Variationsungleichung.

    Ĥ = H(p̄) + Σ_i α_i·(p⁺_i − p⁻_i)/2 mit p̄ = (p⁻ + p⁺)/2,
    V' = V + dt·Ĥ, anschließend V'' = min(V', l).

    Args:
        value (ValueField): Wertfunktion zur Zeit τ.
        table (ModelTable): Vorberechnetes Modell auf dem Gitter.
        failure (ScalarField): l(x).
        dt (float): Zeitschritt (> 0).
        cfl (float): CFL-Anteil, gegen den ``dt`` geprüft wird.

    Raises:
        SolverError: Bei CFL-Verletzung oder nicht-endlichen Werten.

    Returns:
        ValueField: Wertfunktion zur Zeit τ + dt.
    """
    limit = max_stable_dt(table, cfl)
    if dt <= 0.0 or dt > limit * (1.0 + TIME_EPS):
        raise SolverError("solver.cfl", f"Zeitschritt {dt} verletzt die CFL-Schranke {limit}")
    gradients = upwind_gradients(value.field)
    p_mean = 0.5 * (gradients.left + gradients.right)
    h_value = hamiltonian(p_mean, table.nominal, table.bounds, table.control_box)
    dissipation = 0.5 * np.sum(table.dissipation * (gradients.right - gradients.left), axis=-1)
    updated = value.field.values + dt * (h_value + dissipation)
    if not np.all(np.isfinite(updated)):
        index = tuple(int(i) for i in np.argwhere(~np.isfinite(updated))[0])
        coordinate = table.grid.coordinate(index)
        raise SolverError(
            "solver.nonfinite",
            f"Nicht-endlicher Wert an Knoten {index} (x = {coordinate.tolist()}) bei τ = {value.tau}",
        )
    clamped = np.minimum(updated, failure.values)
    return ValueField(field=ScalarField(grid=table.grid, values=clamped), tau=value.tau + dt)


# endregion

# region ↓ Lösung ↓

def solve(
        failure: ScalarField,
        model: UncertainAffineModel | ModelTable,
        grid: Grid,
        config: SolveConfig,
) -> SolveResult:
    """Integriert die Variationsungleichung bis zum Horizont oder bis zur Konvergenz.

    Der Zeitschritt ist der größte CFL-zulässige, wird aber so gekürzt, dass
    Snapshot-Zeiten und der Horizont exakt getroffen werden. Bei unendlichem
    Horizont endet die Lösung, sobald max |ΔV|/Δt < ``convergence_tol`` ist.

    Args:
        failure (ScalarField): l(x), zugleich die Endbedingung V(·, τ=0).
        model (UncertainAffineModel | ModelTable): Das Modell, ggf. vorberechnet.
        grid (Grid): Das Gitter.
        config (SolveConfig): Horizont, CFL, Toleranz, Snapshot-Zeiten.

    Raises:
        SolverError: Bei Divergenz, nicht-endlichen Werten oder wenn ein endlicher
            Horizont innerhalb von ``max_steps`` nicht erreicht wird.

    Returns:
        SolveResult: Endfeld, Snapshots, Schrittprotokoll und Konvergenz-Flag.
    """
    table = model if isinstance(model, ModelTable) else tabulate(model, grid)
    value = ValueField(field=failure, tau=0.0)
    result = SolveResult(final=value)
    if config.horizon == 0.0:
        result.converged = True
        result.snapshots = [value for t in config.snapshot_times if t == 0.0]
        return result

    initial_scale = max(float(np.ptp(failure.values)), float(np.max(np.abs(failure.values))))
    divergence_limit = 10.0 * initial_scale if initial_scale > 0.0 else math.inf
    dt_cfl = max_stable_dt(table, config.cfl)
    infinite = math.isinf(config.horizon)
    targets = sorted({t for t in config.snapshot_times if 0.0 < t < config.horizon})
    if 0.0 in config.snapshot_times:
        result.snapshots.append(value)
    if not infinite:
        targets.append(config.horizon)

    steps = 0
    while steps < config.max_steps:
        next_target = targets[0] if targets else math.inf
        dt = min(dt_cfl, next_target - value.tau)
        if math.isinf(dt):
            # Ruhendes System ohne Zielzeit: ein Schritt genügt zur Konvergenzprüfung
            dt = 1.0
        previous = value
        value = hji_step(previous, table, failure, dt, cfl=1.0)
        steps += 1
        residual = float(np.max(np.abs(value.field.values - previous.field.values))) / dt
        result.step_log.append(StepRecord(tau=value.tau, dt=dt, residual=residual))
        if steps % 100 == 0:
            logger.debug(f"Schritt {steps}: τ = {value.tau:.4f}, Residuum = {residual:.3e}")

        if float(np.max(np.abs(value.field.values))) > divergence_limit:
            raise SolverError("solver.divergence", f"Wertfunktion divergiert bei τ = {value.tau} nach {steps} Schritten")

        if targets and value.tau >= next_target * (1.0 - TIME_EPS):
            # Zielzeit exakt übernehmen, um Rundungsdrift zu vermeiden
            value = ValueField(field=value.field, tau=next_target)
            targets.pop(0)
            if next_target in config.snapshot_times:
                result.snapshots.append(value)
            if not infinite and not targets:
                result.converged = True
                break
        if infinite and residual < config.convergence_tol:
            result.converged = True
            break

    if not result.converged and not infinite:
        raise SolverError(
            "solver.max_steps",
            f"Horizont {config.horizon} nach {config.max_steps} Schritten nicht erreicht (τ = {value.tau:.4f}), "
            "solver.max_steps erhöhen",
        )
    if not result.converged:
        logger.warning(f"Maximale Schrittzahl {config.max_steps} erreicht bei τ = {value.tau:.4f}")
    result.final = value
    logger.info(
        f"Lösung '{table.name}' beendet: {steps} Schritte, τ = {value.tau:.4f}, konvergiert = {result.converged}"
    )
    return result


def safe_set(value: ValueField, level: float = 0.0) -> tuple[np.ndarray, float]:
    """Bestimmt die sichere Menge {x | V(x) > level}.

    Args:
        value (ValueField): Die Wertfunktion.
        level (float): Schwellwert.

    Returns:
        tuple[np.ndarray, float]: Boolesche Maske und Volumenanteil.
    """
    mask = value.field.values > level
    return mask, float(np.count_nonzero(mask)) / mask.size

# endregion
