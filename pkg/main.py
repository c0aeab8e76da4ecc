"""Hauptmodul der Kommandozeile des Reachability-Toolkits.

Dieses Modul definiert die typer-App mit den Unterbefehlen ``gen-data``,
``train``, ``solve``, ``rollout``, ``study-pendulum``, ``ablate``,
``study-robustness``, ``demo-filter`` und ``render``. Jeder Befehl lädt die
Konfiguration (Standardwerte ← ``--config`` ← ``--set`` ← dedizierte Flags),
schreibt die aufgelöste Konfiguration in sein Ausgabeverzeichnis und legt
dort seine Artefakte atomar ab.

Fachliche Fehler enden mit Exit-Status 2 und ``{"error": code, "detail": ...}``
als JSON auf stderr.
"""
import functools
import json
import sys
from pathlib import Path
from typing import Annotated, Callable

import numpy as np
import torch
import typer
from pydantic import ValidationError

from Config.experiment_config import ExperimentConfig, config_fingerprint, dump_config, load_config
from Config.logging_config import configure_logging, get_logger
from Reachability.reach_errors import ReachabilityError
from Reachability.reach_models import ScalarField, SolveResult
from Reachability.solver_operations import safe_set, solve
from Service.controller_service import (
    FilterPolicy,
    build_safety_controller,
    default_threshold,
    filter_policy,
    safety_policy,
    zero_controller,
)
from Service.ensemble_service import Ensemble, conformal_bounds, r2_scores, split_dataset
from Service.experiment_service import (
    METHODS,
    ablation,
    filtering_demo,
    fit_ensemble,
    method_model,
    pendulum_study,
    robustness_study,
    setup_solve_config,
    system_dataset,
    system_setup,
)
from Service.service_models import ConformalBound
from Service.sim_service import rollout
from Storage.field_operations import read_field, write_field
from Storage.model_operations import read_model, write_model
from Storage.render_operations import write_slice_svg
from Storage.storage import atomic_write
from Storage.table_operations import (
    read_dataset,
    write_dataset,
    write_frame,
    write_reports,
    write_step_log,
    write_trajectory,
)

logger = get_logger(__name__)

app = typer.Typer(name="reach", help="Robuste HJ-Erreichbarkeit mit gelernten Ensemble-Modellen.", no_args_is_help=True)

# region ↓ Gemeinsame Optionen ↓

ConfigOption = Annotated[Path | None, typer.Option("--config", help="YAML-Konfigurationsdatei.")]
SetOption = Annotated[list[str] | None, typer.Option("--set", help="Override der Form abschnitt.schlüssel=wert.")]
OutOption = Annotated[Path | None, typer.Option("--out", help="Ausgabeverzeichnis.")]
SeedOption = Annotated[int | None, typer.Option("--seed", help="Basis-Seed.")]
ThreadsOption = Annotated[int | None, typer.Option("--threads", help="Obergrenze für Worker-Threads.")]
VerboseOption = Annotated[bool, typer.Option("--verbose", help="DEBUG-Logging.")]


def emit_error(payload: dict) -> None:
    """Gibt einen Fehler maschinenlesbar auf stderr aus."""
    sys.stderr.write(json.dumps(payload, ensure_ascii=False) + "\n")


def guarded(command: Callable) -> Callable:
    """Übersetzt fachliche Fehler und Schemafehler in Exit-Status 2 mit JSON auf stderr."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ReachabilityError as error:
            logger.error(f"Fehler beim Ausführen von '{command.__name__}': {error}")
            emit_error(error.as_dict())
            raise typer.Exit(code=2) from error
        except ValidationError as error:
            # Jeder fehlerhafte Schlüssel wird gemeldet
            detail = [f"{'.'.join(str(part) for part in item['loc'])}: {item['msg']}" for item in error.errors()]
            emit_error({"error": "config.schema", "detail": detail})
            raise typer.Exit(code=2) from error

    return wrapper


def prepare_run(
        config_path: Path | None,
        overrides: list[str] | None,
        out: Path | None,
        seed: int | None,
        threads: int | None,
        verbose: bool,
) -> tuple[ExperimentConfig, Path, str]:
    """Lädt die Konfiguration, richtet Logging und Threads ein und schreibt die aufgelöste Konfiguration.

    Returns:
        tuple: Konfiguration, Ausgabeverzeichnis und Fingerabdruck.
    """
    assignments = list(overrides or [])
    if seed is not None:
        assignments.append(f"seed={seed}")
    if threads is not None:
        assignments.append(f"threads={threads}")
    config = load_config(config_path, assignments)
    if out is not None:
        config = config.model_copy(update={"output_dir": str(out)})
    configure_logging("DEBUG" if verbose else config.log_level)
    if config.threads is not None:
        torch.set_num_threads(config.threads)
    out_dir = Path(config.output_dir)
    fingerprint = config_fingerprint(config)
    atomic_write(out_dir / "config.resolved.yaml", f"# fingerprint: {fingerprint}\n" + dump_config(config))
    logger.info(f"Lauf '{config.system}' mit Seed {config.seed}, Ausgabe in {out_dir} (Fingerabdruck {fingerprint})")
    return config, out_dir, fingerprint


def parse_floats(text: str) -> list[float]:
    """Liest ``"a,b,c"`` als Liste von Zahlen."""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as error:
        raise typer.BadParameter(f"'{text}' ist keine kommagetrennte Zahlenliste") from error


def parse_at(text: str | None) -> dict[int, float]:
    """Liest ``"2=0.7,3=1"`` als feste Schnittkoordinaten."""
    if not text:
        return {}
    result = {}
    for part in text.split(","):
        key, _, value = part.partition("=")
        try:
            result[int(key)] = float(value)
        except ValueError as error:
            raise typer.BadParameter(f"'{part}' hat nicht die Form dim=wert") from error
    return result


def load_method_inputs(
        method: str,
        config: ExperimentConfig,
        out_dir: Path,
        model_path: Path | None,
        data_path: Path | None,
) -> tuple[Ensemble | None, ConformalBound | None]:
    """Liest das Ensemble und für ``conformal`` die Kalibrierungsradien einer Methode.

    Returns:
        tuple: Ensemble und Radien, jeweils ``None``, wenn die Methode sie nicht braucht.
    """
    ensemble = bound = None
    if method in METHODS and method != "truth":
        ensemble = read_model(model_path or out_dir / "model.bin")
    if method == "conformal":
        dataset = read_dataset(data_path or out_dir / "dataset.csv")
        bound = conformal_bounds(ensemble, dataset, config.bounds.coverage)
    return ensemble, bound


def tau_label(tau: float) -> str:
    """Zeitlabel für Dateinamen von Snapshots."""
    return f"{tau:.4f}".rstrip("0").rstrip(".")


# endregion

# region ↓ Daten und Training ↓

@app.command("gen-data")
@guarded
def gen_data(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        n_train: Annotated[int | None, typer.Option("--M", help="Trainingszeilen, sonst alle übrigen.")] = None,
):
    """Erzeugt einen Datensatz aus Rollouts mit Zufallssteuerungen."""
    config, out_dir, _ = prepare_run(config_path, overrides, out, seed, threads, verbose)
    setup = system_setup(config)
    data = config.system_section().data
    raw = system_dataset(config, setup, n_train=n_train)
    dataset = split_dataset(raw, n_train, data.n_validation, data.n_calibration, config.seed)
    write_dataset(out_dir / "dataset.csv", dataset)


@app.command("train")
@guarded
def train(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        data_path: Annotated[Path | None, typer.Option("--data", help="Datensatz, Standard <out>/dataset.csv.")] = None,
):
    """Trainiert das Ensemble auf einem Datensatz."""
    config, out_dir, _ = prepare_run(config_path, overrides, out, seed, threads, verbose)
    dataset = read_dataset(data_path or out_dir / "dataset.csv")
    ensemble = fit_ensemble(config, dataset, config.seed)
    write_model(out_dir / "model.bin", ensemble)
    write_reports(out_dir / "losses.csv", ensemble.losses)
    if len(dataset.subset("validation")) > 0:
        logger.info(f"R² je Dimension (Validierung): {np.round(r2_scores(ensemble, dataset), 4).tolist()}")


# endregion

# region ↓ Lösen, Rollout und Darstellung ↓

@app.command("solve")
@guarded
def solve_command(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        method: Annotated[str, typer.Option("--method", help=f"Eine von {', '.join(METHODS)}.")] = "truth",
        model_path: Annotated[Path | None, typer.Option("--model", help="Ensemble, Standard <out>/model.bin.")] = None,
        data_path: Annotated[Path | None, typer.Option("--data", help="Datensatz für conformal.")] = None,
):
    """Löst die HJI-Variationsungleichung für eine Methode."""
    config, out_dir, _ = prepare_run(config_path, overrides, out, seed, threads, verbose)
    setup = system_setup(config)
    ensemble, bound = load_method_inputs(method, config, out_dir, model_path, data_path)
    model = method_model(method, setup, config, ensemble, bound)
    result = solve(setup.failure, model, setup.grid, setup_solve_config(config, setup))
    write_field(out_dir / "value.field", result.final)
    for snapshot in result.snapshots:
        write_field(out_dir / f"value_tau{tau_label(snapshot.tau)}.field", snapshot)
    write_step_log(out_dir / "steplog.csv", result.step_log)
    _, volume = safe_set(result.final)
    logger.info(f"Sichere Menge '{method}': Volumenanteil {volume:.4f}")


@app.command("rollout")
@guarded
def rollout_command(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        x0: Annotated[str, typer.Option("--x0", help="Startzustand, z.B. 0.1,0.")] = "0,0",
        steps: Annotated[int, typer.Option("--steps", help="Anzahl der Schritte.")] = 70,
        mode: Annotated[str, typer.Option("--mode", help="safety, filter oder free.")] = "safety",
        method: Annotated[str, typer.Option("--method", help="Modell des Sicherheitsreglers.")] = "truth",
        model_path: Annotated[Path | None, typer.Option("--model", help="Ensemble, Standard <out>/model.bin.")] = None,
        data_path: Annotated[Path | None, typer.Option("--data", help="Datensatz für conformal.")] = None,
        field_path: Annotated[Path | None, typer.Option("--field", help="Wertfunktion, Standard <out>/value.field.")] = None,
):
    """Simuliert die wahre Dynamik unter dem Sicherheitsregler, dem Filter oder ohne Regler.

    Der Regler nutzt das Modell von ``--method``, dasselbe wie beim Lösen
    der Wertfunktion.
    """
    config, out_dir, _ = prepare_run(config_path, overrides, out, seed, threads, verbose)
    setup = system_setup(config)
    if mode not in ("safety", "filter", "free"):
        raise typer.BadParameter(f"Unbekannter Modus '{mode}'")
    nominal = zero_controller(setup.box.dim)
    if mode == "free":
        def policy(x, t):
            return nominal(x, t), False
    else:
        value = read_field(field_path or out_dir / "value.field")
        ensemble, bound = load_method_inputs(method, config, out_dir, model_path, data_path)
        model = method_model(method, setup, config, ensemble, bound)
        controller = build_safety_controller(SolveResult(final=value), model)
        if mode == "safety":
            policy = safety_policy(controller)
        else:
            policy = filter_policy(FilterPolicy(nominal, controller, default_threshold(value.field)))
    dt = config.system_section().rollout_dt
    trajectory = rollout(setup.truth, policy, np.asarray(parse_floats(x0)), dt, steps, setup.in_failure, wrap=setup.wrap)
    write_trajectory(out_dir / "trajectory.csv", trajectory)
    logger.info(f"Rollout: Fehlerzeit {trajectory.first_failure_time}, Abbruch {trajectory.truncation_reason}")


@app.command("render")
@guarded
def render(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        dims: Annotated[str, typer.Option("--dims", help="Zwei Dimensionen, z.B. 0,1.")] = "0,1",
        at: Annotated[str | None, typer.Option("--at", help="Feste Koordinaten, z.B. 2=0.7.")] = None,
        field_path: Annotated[Path | None, typer.Option("--field", help="Wertfunktion, Standard <out>/value.field.")] = None,
):
    """Zeichnet V = 0 und die Fehlermenge eines 2D-Schnitts als SVG."""
    config, out_dir, _ = prepare_run(config_path, overrides, out, seed, threads, verbose)
    setup = system_setup(config)
    value = read_field(field_path or out_dir / "value.field")
    keep = tuple(int(d) for d in parse_floats(dims))
    if len(keep) != 2:
        raise typer.BadParameter(f"--dims benötigt genau zwei Dimensionen, erhalten '{dims}'")
    write_slice_svg(out_dir, value.field, setup.failure, keep, parse_at(at), title=f"τ = {value.tau:g}")


# endregion

# region ↓ Studien ↓

@app.command("study-pendulum")
@guarded
def study_pendulum(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        n_train: Annotated[int | None, typer.Option("--M", help="Trainingszeilen.")] = None,
        seeds: Annotated[int | None, typer.Option("--seeds", help="Anzahl der Seeds.")] = None,
        render_slices: Annotated[bool, typer.Option("--render/--no-render", help="Masken als SVG zeichnen.")] = False,
):
    """Vergleicht Ground Truth, unsere Methode und drei Baselines am Pendel."""
    config, out_dir, fingerprint = prepare_run(config_path, overrides, out, seed, threads, verbose)
    truth_report, cells = pendulum_study(config, n_train, seeds, fingerprint)
    reports = [truth_report] + [report for cell in cells for report in cell.reports]
    write_reports(out_dir / "reports.csv", reports)
    if render_slices:
        setup = system_setup(config, "pendulum")
        for cell in cells:
            for method, mask in cell.masks.items():
                # Maske als ±1-Feld, damit die Niveaulinie den Rand zeigt
                field = ScalarField(grid=setup.grid, values=np.where(mask, 1.0, -1.0))
                write_slice_svg(out_dir / f"seed{cell.seed}_{method}", field, setup.failure, (0, 1), title=method)


@app.command("ablate")
@guarded
def ablate(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        sizes: Annotated[str | None, typer.Option("--sizes", help="Trainingsgrößen, z.B. 100,300,1000.")] = None,
        seeds: Annotated[int | None, typer.Option("--seeds", help="Anzahl der Seeds.")] = None,
):
    """Wiedergefundener Anteil der sicheren Menge über die Trainingsgröße."""
    config, out_dir, fingerprint = prepare_run(config_path, overrides, out, seed, threads, verbose)
    size_list = None if sizes is None else [int(value) for value in parse_floats(sizes)]
    runs, summary = ablation(config, size_list, seeds, fingerprint)
    write_frame(out_dir / "reports.csv", runs)
    write_frame(out_dir / "ablation.csv", summary)


@app.command("study-robustness")
@guarded
def study_robustness(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
        n_train: Annotated[int | None, typer.Option("--M", help="Trainingszeilen.")] = None,
):
    """α-Sweep, Invarianz-Rollouts und Abdeckung der Residuen am Pendel."""
    config, out_dir, fingerprint = prepare_run(config_path, overrides, out, seed, threads, verbose)
    tables = robustness_study(config, n_train, fingerprint)
    write_frame(out_dir / "sweep.csv", tables.sweep)
    write_frame(out_dir / "invariance.csv", tables.invariance)
    write_frame(out_dir / "coverage.csv", tables.coverage)


@app.command("demo-filter")
@guarded
def demo_filter(
        config_path: ConfigOption = None,
        overrides: SetOption = None,
        out: OutOption = None,
        seed: SeedOption = None,
        threads: ThreadsOption = None,
        verbose: VerboseOption = False,
):
    """Filter-Demo: analytisches gegen gelerntes Dubins-Modell am gestörten Fahrzeug."""
    config, out_dir, fingerprint = prepare_run(config_path, overrides, out, seed, threads, verbose)
    report, analytic, learned = filtering_demo(config, fingerprint)
    write_trajectory(out_dir / "trajectory_analytic.csv", analytic)
    write_trajectory(out_dir / "trajectory_learned.csv", learned)
    atomic_write(out_dir / "demo_report.json", report.model_dump_json(indent=2))


# endregion

if __name__ == "__main__":
    app()
