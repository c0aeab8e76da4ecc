"""Service-Modul für die Studien: Pendelstudie, Ablation, Robustheitsstudie
(α-Sweep, Invarianzversuche, Ensemble-Güte) und die Filter-Demo mit dem
Dubins-Fahrzeug.

Jede Methode wird über ihren Namen ausgewählt:

- ``truth``: analytische Dynamik ohne Unsicherheit (Ground Truth),
- ``ours``: Ensemble-Mittelwert mit Streuungsschranken (α, γ),
- ``mean``: Ensemble-Mittelwert ohne Schranken,
- ``conformal``: Ensemble-Mittelwert mit konstanten Conformal-Radien,
- ``partial``: Streuungsschranken mit in d1 eingefaltetem d2·u.
"""
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np
import pandas as pd
from pydantic import BaseModel

from Config.experiment_config import DataSection, ExperimentConfig
from Config.logging_config import get_logger
from Reachability.dynamics_operations import (
    ControlAffineDynamics,
    control_box,
    distance_to_failure,
    dubins3d,
    failure_predicate,
    pendulum_truth,
    perturbed_dubins3d,
    truth_as_uncertain,
    with_constant_bounds,
    with_partial_game,
)
from Reachability.grid_operations import box_signed_distance, build_grid, dilate_mask, wrap_state
from Reachability.reach_errors import EnsembleError, ExperimentError
from Reachability.reach_models import ControlBox, Grid, ScalarField, SolveConfig, SolveResult, UncertainAffineModel
from Reachability.solver_operations import safe_set, solve
from Service.controller_service import (
    FilterPolicy,
    SafetyController,
    build_safety_controller,
    default_threshold,
    filter_policy,
    safety_policy,
    value_at,
    zero_controller,
)
from Service.ensemble_service import (
    Ensemble,
    GridCachedEnsemble,
    tabulate_model,
    conformal_bounds,
    empirical_coverage,
    ensemble_model,
    generate_dataset,
    r2_scores,
    split_dataset,
    train_ensemble,
)
from Service.service_models import (
    ConformalBound,
    Dataset,
    FilterDemoReport,
    FilterRun,
    SafeSetReport,
    StudyCell,
    Trajectory,
)
from Service.sim_service import rollout

logger = get_logger(__name__)

METHODS = ("truth", "ours", "mean", "conformal", "partial")
LEARNED_METHODS = ("ours", "mean", "conformal", "partial")


# region ↓ Systemaufbau ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class SystemSetup:
    """Gitter, Fehlermenge, Steuerbox und Dynamiken eines konfigurierten Systems.

    ``truth`` erzeugt Daten und Rollouts, ``analytic`` ist das bekannte
    Modell ohne Unsicherheit (beim Pendel identisch mit ``truth``).
    """
    name: str
    grid: Grid
    failure: ScalarField
    box: ControlBox
    truth: ControlAffineDynamics
    analytic: ControlAffineDynamics
    in_failure: Callable[[np.ndarray], bool]
    distance: Callable[[np.ndarray], float]
    wrap: Callable[[np.ndarray], np.ndarray]


def system_setup(config: ExperimentConfig, system: str | None = None) -> SystemSetup:
    """Baut das ausgewählte System aus der Konfiguration."""
    name = system or config.system
    section = config.pendulum if name == "pendulum" else config.dubins
    grid = build_grid(section.grid.lo, section.grid.hi, section.grid.counts, section.grid.periodic)
    dims, widths = section.failure.dims, section.failure.half_widths
    if name == "pendulum":
        truth = pendulum_truth(config.pendulum.params)
        analytic = truth
    else:
        truth = perturbed_dubins3d(config.dubins.speed, config.dubins.gain, config.dubins.drift)
        analytic = dubins3d(config.dubins.speed)
    return SystemSetup(
        name=name,
        grid=grid,
        failure=box_signed_distance(grid, dims, widths),
        box=control_box(section.control.lo, section.control.hi),
        truth=truth,
        analytic=analytic,
        in_failure=failure_predicate(dims, widths),
        distance=partial(distance_to_failure, dims=dims, half_widths=widths),
        wrap=partial(wrap_state, grid),
    )


def pool_trajectories(data: DataSection, n_train: int | None = None) -> int:
    """Trajektorienzahl, die für ``n_train`` Trainingszeilen plus Validierung und Kalibrierung reicht.

    Training und Rückhalt teilen keine Trajektorie, daher wird je Teil auf
    ganze Rollouts aufgerundet. Abgeschnittene Trajektorien sind nicht
    eingerechnet.
    """
    if n_train is None:
        return data.n_trajectories
    required = math.ceil(n_train / data.steps) + math.ceil((data.n_validation + data.n_calibration) / data.steps)
    return max(data.n_trajectories, required)


def system_dataset(
        config: ExperimentConfig,
        setup: SystemSetup,
        seed: int | None = None,
        n_train: int | None = None,
) -> Dataset:
    """Erzeugt den Rohdatensatz des Systems mit den Einstellungen aus ``data``.

    Mit ``n_train`` wird die Trajektorienzahl bei Bedarf so erhöht, dass der
    Datensatz für diese Trainingsgröße reicht.
    """
    data = config.pendulum.data if setup.name == "pendulum" else config.dubins.data
    n_trajectories = pool_trajectories(data, n_train)
    if n_trajectories > data.n_trajectories:
        logger.info(f"Datensatz auf {n_trajectories} Trajektorien vergrößert (M = {n_train})")
    return generate_dataset(
        setup.truth,
        setup.box,
        n_trajectories=n_trajectories,
        steps=data.steps,
        dt=data.dt,
        initial_lo=data.initial_lo,
        initial_hi=data.initial_hi,
        seed=config.seed if seed is None else seed,
        validity_lo=data.validity_lo,
        validity_hi=data.validity_hi,
        wrap=setup.wrap,
    )


def fit_ensemble(config: ExperimentConfig, dataset: Dataset, seed: int) -> Ensemble:
    """Trainiert ein Ensemble mit den Einstellungen aus ``ensemble``."""
    settings = config.ensemble
    return train_ensemble(
        dataset,
        members=settings.members,
        hidden_layers=settings.hidden_layers,
        hidden_width=settings.hidden_width,
        activation=settings.activation,
        epochs=settings.epochs,
        lr=settings.lr,
        batch_size=settings.batch_size,
        seed=seed,
    )


def setup_solve_config(config: ExperimentConfig, setup: SystemSetup) -> SolveConfig:
    """Solver-Einstellungen mit dem Horizont des Systems ``setup``."""
    section = config.pendulum if setup.name == "pendulum" else config.dubins
    return config.solve_config(horizon=section.horizon)


# endregion

# region ↓ Methoden und Kennzahlen ↓

def method_model(
        method: str,
        setup: SystemSetup,
        config: ExperimentConfig,
        ensemble: Ensemble | GridCachedEnsemble | None = None,
        bound: ConformalBound | None = None,
) -> UncertainAffineModel:
    """Erstellt das unsichere Modell einer Methode.

    Raises:
        ExperimentError: Bei unbekannter Methode oder fehlendem Ensemble bzw. Radius.
    """
    if method not in METHODS:
        raise ExperimentError("experiment.method", f"Unbekannte Methode '{method}', erlaubt: {', '.join(METHODS)}")
    if method == "truth":
        return truth_as_uncertain(setup.analytic, setup.box)
    if ensemble is None:
        raise ExperimentError("experiment.ensemble", f"Methode '{method}' benötigt ein trainiertes Ensemble")
    alpha, gamma = config.bounds.alpha, config.bounds.gamma
    if method == "ours":
        return ensemble_model(ensemble, setup.box, alpha, gamma, name="ours")
    if method == "partial":
        return with_partial_game(ensemble_model(ensemble, setup.box, alpha, gamma, name="ours"))
    mean = ensemble_model(ensemble, setup.box, 0.0, 0.0, name="mean")
    if method == "mean":
        return mean
    if bound is None:
        raise ExperimentError("experiment.conformal", "Methode 'conformal' benötigt Conformal-Radien")
    return with_constant_bounds(mean, bound.radius, name="conformal")


def recovered_fraction(method_mask: np.ndarray, truth_mask: np.ndarray) -> float:
    """|Methode ∩ Ground Truth| / |Ground Truth| nach Knotenanzahl.

    Raises:
        ExperimentError: Wenn die Ground Truth leer ist.
    """
    truth_count = int(np.count_nonzero(truth_mask))
    if truth_count == 0:
        raise ExperimentError("experiment.empty_truth", "Die sichere Menge der Ground Truth ist leer")
    return float(np.count_nonzero(method_mask & truth_mask)) / truth_count


def containment_violation(grid: Grid, method_mask: np.ndarray, truth_mask: np.ndarray) -> float:
    """Anteil der Methodenknoten außerhalb der um eine Zelle dilatierten Ground Truth."""
    method_count = int(np.count_nonzero(method_mask))
    if method_count == 0:
        return 0.0
    outside = method_mask & ~dilate_mask(grid, truth_mask)
    return float(np.count_nonzero(outside)) / method_count


def safe_set_report(
        method: str,
        seed: int,
        n_train: int,
        grid: Grid,
        result: SolveResult,
        truth_mask: np.ndarray,
        fingerprint: str = "",
) -> tuple[SafeSetReport, np.ndarray]:
    """Berechnet die Kennzahlen einer gelösten sicheren Menge."""
    mask, volume = safe_set(result.final)
    report = SafeSetReport(
        method=method,
        seed=seed,
        n_train=n_train,
        volume_fraction=volume,
        recovered_fraction=recovered_fraction(mask, truth_mask),
        containment_violation=containment_violation(grid, mask, truth_mask),
        fingerprint=fingerprint,
    )
    return report, mask


# endregion

# region ↓ Pendelstudie und Ablation ↓

def ground_truth(config: ExperimentConfig, setup: SystemSetup) -> tuple[SolveResult, np.ndarray]:
    """Löst die Ground Truth mit der analytischen Dynamik.

    Raises:
        ExperimentError: Wenn die sichere Menge der Ground Truth leer ist.
    """
    result = solve(setup.failure, method_model("truth", setup, config), setup.grid, setup_solve_config(config, setup))
    mask, volume = safe_set(result.final)
    if volume == 0.0:
        raise ExperimentError("experiment.empty_truth", "Die sichere Menge der Ground Truth ist leer")
    return result, mask


def study_seed(
        config: ExperimentConfig,
        setup: SystemSetup,
        dataset: Dataset,
        n_train: int,
        seed: int,
        truth_mask: np.ndarray,
        fingerprint: str = "",
) -> StudyCell:
    """Trainiert ein Ensemble für einen Seed und löst alle gelernten Methoden.

    Raises:
        EnsembleError: Wenn das Training scheitert (Seed in der Meldung).
    """
    data = config.pendulum.data
    split = split_dataset(dataset, n_train, data.n_validation, data.n_calibration, seed)
    try:
        ensemble = fit_ensemble(config, split, seed)
        bound = conformal_bounds(ensemble, split, config.bounds.coverage)
    except EnsembleError as error:
        logger.error(f"Fehler beim Training mit Seed {seed}: {error}")
        raise EnsembleError(error.code, f"Seed {seed}: {error.detail}") from error

    cell = StudyCell(seed=seed)
    solve_config = setup_solve_config(config, setup)
    cached = tabulate_model(ensemble, setup.grid)
    for method in LEARNED_METHODS:
        model = method_model(method, setup, config, cached, bound)
        result = solve(setup.failure, model, setup.grid, solve_config)
        report, mask = safe_set_report(method, seed, n_train, setup.grid, result, truth_mask, fingerprint)
        cell.reports.append(report)
        cell.masks[method] = mask
        logger.info(
            f"Seed {seed}, M = {n_train}, {method}: Volumen {report.volume_fraction:.3f}, "
            f"wiedergefunden {report.recovered_fraction:.3f}, Verletzung {report.containment_violation:.4f}"
        )
    return cell


def pendulum_study(
        config: ExperimentConfig,
        n_train: int | None = None,
        seeds: int | None = None,
        fingerprint: str = "",
) -> tuple[SafeSetReport, list[StudyCell]]:
    """Vergleicht die vier gelernten Methoden mit der Ground Truth über mehrere Seeds.

    Args:
        config (ExperimentConfig): Die Konfiguration.
        n_train (int | None): Trainingszeilen M, standardmäßig ``study.n_train``.
        seeds (int | None): Anzahl der Seeds, standardmäßig ``study.seeds``.
        fingerprint (str): Fingerabdruck der Konfiguration für die Berichte.

    Returns:
        tuple: Bericht der Ground Truth und eine Zelle je Seed (4 Berichte je Zelle).
    """
    n_train = config.study.n_train if n_train is None else n_train
    seeds = config.study.seeds if seeds is None else seeds
    setup = system_setup(config, "pendulum")
    truth_result, truth_mask = ground_truth(config, setup)
    truth_report, _ = safe_set_report("truth", config.seed, 0, setup.grid, truth_result, truth_mask, fingerprint)
    dataset = system_dataset(config, setup, n_train=n_train)
    cells = [
        study_seed(config, setup, dataset, n_train, config.seed + offset, truth_mask, fingerprint)
        for offset in range(seeds)
    ]
    return truth_report, cells


def ablation(
        config: ExperimentConfig,
        sizes: list[int] | None = None,
        seeds: int | None = None,
        fingerprint: str = "",
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Wiedergefundener Anteil je Methode über die Trainingsgröße M.

    Returns:
        tuple[pd.DataFrame, pd.DataFrame]: Alle Einzelberichte und die über
        Seeds gemittelte Tabelle (Spalten ``n_train``, ``method``,
        ``recovered_fraction``, ``recovered_std``, ``seeds``).

    Raises:
        ExperimentError: Bei leerer Liste der Größen.
    """
    sizes = config.study.ablation_sizes if sizes is None else sizes
    seeds = config.study.seeds if seeds is None else seeds
    if not sizes:
        raise ExperimentError("experiment.ablation_sizes", "Die Liste der Trainingsgrößen ist leer")
    setup = system_setup(config, "pendulum")
    _, truth_mask = ground_truth(config, setup)
    dataset = system_dataset(config, setup, n_train=max(sizes))
    reports = []
    for size in sizes:
        for offset in range(seeds):
            cell = study_seed(config, setup, dataset, size, config.seed + offset, truth_mask, fingerprint)
            reports.extend(report.model_dump() for report in cell.reports)
    frame = pd.DataFrame(reports)
    summary = (
        frame.groupby(["n_train", "method"], sort=True)["recovered_fraction"]
        .agg(recovered_fraction="mean", recovered_std="std", seeds="count")
        .reset_index()
    )
    return frame, summary


def alpha_sweep(
        ensemble: Ensemble | GridCachedEnsemble,
        setup: SystemSetup,
        config: ExperimentConfig,
        scales: list[float] | None = None,
) -> list[tuple[float, np.ndarray]]:
    """Sichere Mengen für α = γ ∈ ``scales`` auf einem Ensemble, aufsteigend sortiert."""
    scales = sorted(config.study.sweep_scales if scales is None else scales)
    masks = []
    for scale in scales:
        model = ensemble_model(ensemble, setup.box, scale, scale, name=f"scale_{scale:g}")
        result = solve(setup.failure, model, setup.grid, setup_solve_config(config, setup))
        masks.append((scale, safe_set(result.final)[0]))
    return masks


def nested_violations(grid: Grid, sweep: list[tuple[float, np.ndarray]]) -> list[float]:
    """Verletzung der Inklusion jeder Menge in ihrer Vorgängerin (mit einer Zelle Toleranz)."""
    return [containment_violation(grid, current, previous) for (_, previous), (_, current) in zip(sweep, sweep[1:])]


# endregion

# region ↓ Invarianz ↓

# pylint: disable=too-few-public-methods
class InvarianceResult(BaseModel):
    """Ergebnis der Closed-Loop-Versuche."""
    trials: int
    safe_fraction: float
    failures: int
    truncated: int


def invariance_trials(
        controller: SafetyController,
        setup: SystemSetup,
        n_trials: int,
        horizon: float,
        dt: float,
        seed: int,
        margin: float | None = None,
        exclude: np.ndarray | None = None,
) -> InvarianceResult:
    """Rollouts unter dem Sicherheitsregler gegen die wahre Dynamik.

    Startzustände sind zufällige Knoten mit V ≥ ``margin`` (standardmäßig
    eine Zelle Wertänderung), optional ohne die Knoten in ``exclude``.
    Ein Versuch gilt als sicher, wenn er den Horizont ohne Fehlerzustand und
    ohne Abbruch erreicht.

    Raises:
        ExperimentError: Wenn kein zulässiger Startknoten existiert.
    """
    field = controller.fields[-1].field
    margin = default_threshold(field) if margin is None else margin
    candidates = field.values >= margin
    if exclude is not None:
        candidates &= ~exclude
    nodes = np.argwhere(candidates)
    if nodes.shape[0] == 0:
        raise ExperimentError("experiment.no_start", f"Kein Knoten mit V >= {margin:.4f} als Startzustand")
    rng = np.random.default_rng(seed)
    picks = rng.choice(nodes.shape[0], size=n_trials, replace=nodes.shape[0] < n_trials)
    steps = int(round(horizon / dt))
    policy = safety_policy(controller)
    failures = truncated = 0
    for pick in picks:
        x0 = field.grid.coordinate(tuple(nodes[pick]))
        trajectory = rollout(setup.truth, policy, x0, dt, steps, setup.in_failure, stop_at_failure=True, wrap=setup.wrap)
        if trajectory.exited_failure:
            failures += 1
        elif trajectory.truncation_reason is not None:
            truncated += 1
    safe = n_trials - failures - truncated
    logger.info(f"Invarianz: {safe}/{n_trials} sicher, {failures} Fehler, {truncated} abgebrochen")
    return InvarianceResult(trials=n_trials, safe_fraction=safe / n_trials, failures=failures, truncated=truncated)


# endregion

# region ↓ Robustheitsstudie ↓

# pylint: disable=too-few-public-methods
@dataclass(frozen=True, eq=False)
class RobustnessTables:
    """Tabellen der Robustheitsstudie eines Pendel-Ensembles."""
    sweep: pd.DataFrame
    invariance: pd.DataFrame
    coverage: pd.DataFrame


def _invariance_rows(
        config: ExperimentConfig,
        setup: SystemSetup,
        ensemble: GridCachedEnsemble,
        fingerprint: str,
) -> list[dict]:
    solve_config = setup_solve_config(config, setup)
    rows = []
    ours_mask = None
    for method in ("ours", "mean"):
        model = method_model(method, setup, config, ensemble)
        result = solve(setup.failure, model, setup.grid, solve_config)
        controller = build_safety_controller(result, model)
        try:
            outcome = invariance_trials(
                controller,
                setup,
                n_trials=config.study.invariance_trials,
                horizon=config.pendulum.horizon,
                dt=config.pendulum.rollout_dt,
                seed=config.seed,
                exclude=ours_mask,
            )
        except ExperimentError as error:
            if error.code != "experiment.no_start":
                raise
            logger.warning(f"Invarianz für '{method}' übersprungen: {error.detail}")
        else:
            rows.append({
                "method": method,
                **outcome.model_dump(),
                "failure_fraction": outcome.failures / outcome.trials,
                "fingerprint": fingerprint,
            })
        if method == "ours":
            # Das Mittelwertmodell startet nur außerhalb der Menge von ours
            ours_mask = safe_set(result.final)[0]
    return rows


def robustness_study(config: ExperimentConfig, n_train: int | None = None, fingerprint: str = "") -> RobustnessTables:
    """α-Sweep, Closed-Loop-Invarianz und Ensemble-Güte für ein trainiertes Pendel-Ensemble.

    - ``sweep``: Volumen je α = γ aus ``study.sweep_scales`` und die
      Verletzung der Inklusion in die Menge der nächstkleineren Skala.
    - ``invariance``: ``study.invariance_trials`` Rollouts gegen das wahre
      Pendel unter dem jeweiligen Sicherheitsregler, für ``mean`` nur aus
      Knoten außerhalb der Menge von ``ours``.
    - ``coverage``: R² je Dimension, Conformal-Radien und die gemeinsame
      empirische Abdeckung, alles auf dem Validierungs-Split.

    Args:
        config (ExperimentConfig): Die Konfiguration.
        n_train (int | None): Trainingszeilen M, standardmäßig ``study.n_train``.
        fingerprint (str): Fingerabdruck der Konfiguration.

    Returns:
        RobustnessTables: Die drei Tabellen.
    """
    n_train = config.study.n_train if n_train is None else n_train
    setup = system_setup(config, "pendulum")
    data = config.pendulum.data
    dataset = split_dataset(
        system_dataset(config, setup, n_train=n_train), n_train, data.n_validation, data.n_calibration, config.seed,
    )
    ensemble = fit_ensemble(config, dataset, config.seed)
    cached = tabulate_model(ensemble, setup.grid)

    sweep = alpha_sweep(cached, setup, config)
    sweep_frame = pd.DataFrame({
        "scale": [scale for scale, _ in sweep],
        "volume_fraction": [float(np.mean(mask)) for _, mask in sweep],
        "nested_violation": [0.0] + nested_violations(setup.grid, sweep),
    })
    sweep_frame["fingerprint"] = fingerprint

    invariance_frame = pd.DataFrame(
        _invariance_rows(config, setup, cached, fingerprint),
        columns=["method", "trials", "safe_fraction", "failures", "truncated", "failure_fraction", "fingerprint"],
    )

    bound = conformal_bounds(ensemble, dataset, config.bounds.coverage)
    r2 = r2_scores(ensemble, dataset)
    coverage_frame = pd.DataFrame({"dim": np.arange(r2.shape[0]), "r2": r2, "radius": bound.radius})
    coverage_frame["coverage"] = empirical_coverage(ensemble, bound, dataset)
    coverage_frame["nominal_coverage"] = bound.coverage
    coverage_frame["n_train"] = n_train
    coverage_frame["fingerprint"] = fingerprint
    logger.info(
        f"Robustheit (M = {n_train}): R² {np.round(r2, 4).tolist()}, "
        f"Abdeckung {coverage_frame['coverage'].iloc[0]:.4f}"
    )
    return RobustnessTables(sweep=sweep_frame, invariance=invariance_frame, coverage=coverage_frame)


# endregion

# region ↓ Filter-Demo ↓

def filter_run(model: str, threshold: float, trajectory: Trajectory, setup: SystemSetup) -> FilterRun:
    """Wertet eine gefilterte Fahrt aus."""
    distances = np.array([setup.distance(x) for x in trajectory.states])
    intervention_states = distances[:-1][trajectory.intervened] if trajectory.steps else np.empty(0)
    return FilterRun(
        model=model,
        threshold=threshold,
        exited=trajectory.exited_failure,
        first_failure_time=trajectory.first_failure_time,
        min_distance=float(np.min(distances)),
        interventions=int(np.count_nonzero(trajectory.intervened)),
        min_intervention_distance=float(np.min(intervention_states)) if intervention_states.size else None,
        truncation_reason=trajectory.truncation_reason,
    )


def filtering_demo(
        config: ExperimentConfig,
        fingerprint: str = "",
) -> tuple[FilterDemoReport, Trajectory, Trajectory]:
    """Vergleicht den Filter des analytischen Dubins-Modells mit dem des gelernten Modells.

    Beide Filter umschließen den nominellen Regler π(x) = 0 und fahren vom
    selben Startzustand gegen das gestörte Fahrzeug.

    Raises:
        ExperimentError: Wenn der Startzustand nicht in beiden sicheren Mengen liegt.

    Returns:
        tuple: Bericht, Trajektorie des analytischen und des gelernten Filters.
    """
    setup = system_setup(config, "dubins")
    demo = config.dubins.demo
    data = config.dubins.data
    dataset = split_dataset(system_dataset(config, setup), None, data.n_validation, data.n_calibration, config.seed)
    ensemble = fit_ensemble(config, dataset, config.seed)
    solve_config = setup_solve_config(config, setup)

    controllers = {}
    for name, model in (
            ("analytic", truth_as_uncertain(setup.analytic, setup.box)),
            ("learned", ensemble_model(ensemble, setup.box, config.bounds.alpha, config.bounds.gamma, name="learned")),
    ):
        result = solve(setup.failure, model, setup.grid, solve_config)
        controllers[name] = build_safety_controller(result, model)

    x0 = np.asarray(demo.x0, dtype=float)
    values = {name: value_at(controller, x0) for name, controller in controllers.items()}
    if min(values.values()) <= 0.0:
        raise ExperimentError(
            "experiment.infeasible_start",
            f"Startzustand {demo.x0} liegt nicht in beiden sicheren Mengen ({values}), "
            "Störung (dubins.gain, dubins.drift) verringern oder x0 ändern",
        )

    steps = int(round(demo.duration / demo.dt))
    runs, trajectories = {}, {}
    for name, controller in controllers.items():
        threshold = default_threshold(controller.fields[-1].field) if demo.threshold is None else demo.threshold
        policy = FilterPolicy(nominal=zero_controller(setup.box.dim), controller=controller, threshold=threshold)
        trajectory = rollout(setup.truth, filter_policy(policy), x0, demo.dt, steps, setup.in_failure, wrap=setup.wrap)
        trajectories[name] = trajectory
        runs[name] = filter_run(name, threshold, trajectory, setup)
        logger.info(
            f"Filter '{name}': verlassen = {runs[name].exited}, minimaler Abstand {runs[name].min_distance:.3f}, "
            f"{runs[name].interventions} Eingriffe"
        )
    report = FilterDemoReport(
        x0=list(demo.x0),
        duration=demo.duration,
        analytic=runs["analytic"],
        learned=runs["learned"],
        fingerprint=fingerprint,
    )
    return report, trajectories["analytic"], trajectories["learned"]

# endregion
