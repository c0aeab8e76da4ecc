"""Testmodul für die Kommandozeile.

Die Befehle laufen über den `CliRunner` von typer auf groben Gittern; lange
Studien werden über `mocker.patch` auf die in `main` importierten Namen
ersetzt.
"""
import json

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from Config.experiment_config import load_config
from Reachability.reach_models import ScalarField, ValueField
from Service.experiment_service import RobustnessTables, system_setup
from Service.service_models import SafeSetReport, StudyCell
from Storage.field_operations import read_field, write_field
import main
from main import app
from Tests.conftest import StubEnsemble

COARSE = ["--set", "pendulum.grid.counts=[21, 21]"]


# region ↓ Hilfsfunktionen ↓

@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def error_payload(result) -> dict:
    """Letzte stderr-Zeile als JSON."""
    return json.loads(result.stderr.strip().splitlines()[-1])


def report(method: str, seed: int = 0) -> SafeSetReport:
    return SafeSetReport(
        method=method, seed=seed, n_train=300, volume_fraction=0.3, recovered_fraction=0.8, containment_violation=0.0,
    )


# endregion

# region ↓ Erfolgreiche Läufe ↓

def test_solve_with_zero_horizon_writes_failure_field(runner, tmp_path):
    """Szenario: Horizont 0.

    Erwartetes Ergebnis:
    - value.field enthält genau l(x), das Schrittprotokoll ist leer.
    - Die aufgelöste Konfiguration liegt neben den Artefakten.
    """
    # WHEN
    result = runner.invoke(app, ["solve", "--out", str(tmp_path), "--set", "pendulum.horizon=0", *COARSE])

    # THEN
    assert result.exit_code == 0, result.stderr
    setup = system_setup(load_config(None, ["pendulum.grid.counts=[21, 21]"]))
    value = read_field(tmp_path / "value.field")
    np.testing.assert_array_equal(value.field.values, setup.failure.values)
    assert value.tau == 0.0
    assert pd.read_csv(tmp_path / "steplog.csv").empty
    resolved = (tmp_path / "config.resolved.yaml").read_text(encoding="utf-8")
    assert resolved.startswith("# fingerprint: ")
    assert "horizon: 0.0" in resolved


def test_gen_data_splits_rows(runner, tmp_path):
    result = runner.invoke(app, [
        "gen-data", "--out", str(tmp_path), "--seed", "3",
        "--set", "pendulum.data.n_trajectories=20",
        "--set", "pendulum.data.steps=10",
        "--set", "pendulum.data.n_validation=20",
        "--set", "pendulum.data.n_calibration=30",
    ])

    assert result.exit_code == 0, result.stderr
    frame = pd.read_csv(tmp_path / "dataset.csv")
    assert len(frame) == 20 * 10
    assert frame["split"].value_counts().to_dict() == {"train": 150, "calibration": 30, "validation": 20}
    assert list(frame.columns) == ["x0", "x1", "u0", "xdot0", "xdot1", "split", "trajectory"]
    training = set(frame.loc[frame["split"] == "train", "trajectory"])
    held_out = set(frame.loc[frame["split"] != "train", "trajectory"])
    assert training.isdisjoint(held_out)


def test_free_rollout_writes_trajectory(runner, tmp_path):
    result = runner.invoke(app, ["rollout", "--out", str(tmp_path), "--mode", "free", "--x0", "0.1,0", "--steps", "5"])

    assert result.exit_code == 0, result.stderr
    frame = pd.read_csv(tmp_path / "trajectory.csv")
    assert len(frame) == 6
    assert frame["x0"].iloc[0] == pytest.approx(0.1)
    assert not frame["intervened"].any()


def test_safety_rollout_uses_requested_method(runner, tmp_path, mocker):
    """Szenario: Rollout mit `--method ours`.

    Erwartetes Ergebnis:
    - Der Regler wird mit dem Modell der Methode `ours` und dem gelesenen Ensemble gebaut.
    """
    # GIVEN
    setup = system_setup(load_config(None, ["pendulum.grid.counts=[21, 21]"]))
    shifted = ScalarField(grid=setup.grid, values=setup.failure.values - 0.3)
    write_field(tmp_path / "value.field", ValueField(field=shifted, tau=0.7))
    stub = StubEnsemble(setup.truth, offset=0.1)
    read = mocker.patch("main.read_model", return_value=stub)
    build = mocker.spy(main, "method_model")

    # WHEN
    result = runner.invoke(app, [
        "rollout", "--out", str(tmp_path), "--method", "ours", "--x0", "0.1,0", "--steps", "3", *COARSE,
    ])

    # THEN
    assert result.exit_code == 0, result.stderr
    assert read.call_args.args[0] == tmp_path / "model.bin"
    method, _, _, ensemble, bound = build.call_args.args
    assert (method, ensemble, bound) == ("ours", stub, None)
    assert len(pd.read_csv(tmp_path / "trajectory.csv")) == 4


def test_safety_rollout_without_model_names_expected_path(runner, tmp_path):
    setup = system_setup(load_config(None, ["pendulum.grid.counts=[21, 21]"]))
    write_field(tmp_path / "value.field", ValueField(field=setup.failure, tau=0.0))

    result = runner.invoke(app, ["rollout", "--out", str(tmp_path), "--method", "mean", "--steps", "2", *COARSE])

    assert result.exit_code == 2
    assert error_payload(result)["error"] == "storage.missing"


def test_render_writes_svg(runner, tmp_path):
    setup = system_setup(load_config(None, ["pendulum.grid.counts=[21, 21]"]))
    shifted = ScalarField(grid=setup.grid, values=setup.failure.values - 0.3)
    write_field(tmp_path / "value.field", ValueField(field=shifted, tau=0.7))

    result = runner.invoke(app, ["render", "--out", str(tmp_path), "--dims", "0,1", *COARSE])

    assert result.exit_code == 0, result.stderr
    assert "<svg" in (tmp_path / "slice_0-1_mid.svg").read_text(encoding="utf-8")


def test_study_pendulum_writes_reports(runner, tmp_path, mocker):
    cell = StudyCell(seed=0, reports=[report(method) for method in ("ours", "mean", "conformal", "partial")])
    study = mocker.patch("main.pendulum_study", return_value=(report("truth"), [cell]))

    result = runner.invoke(app, ["study-pendulum", "--out", str(tmp_path), "--M", "300", "--seeds", "1"])

    assert result.exit_code == 0, result.stderr
    assert study.call_args.args[1:3] == (300, 1)
    frame = pd.read_csv(tmp_path / "reports.csv")
    assert frame["method"].tolist() == ["truth", "ours", "mean", "conformal", "partial"]


def test_ablate_passes_sizes(runner, tmp_path, mocker):
    summary = pd.DataFrame({"n_train": [100], "method": ["ours"], "recovered_fraction": [0.5],
                            "recovered_std": [0.0], "seeds": [1]})
    ablation = mocker.patch("main.ablation", return_value=(summary, summary))

    result = runner.invoke(app, ["ablate", "--out", str(tmp_path), "--sizes", "100,300"])

    assert result.exit_code == 0, result.stderr
    assert ablation.call_args.args[1] == [100, 300]
    assert (tmp_path / "ablation.csv").exists()


def test_study_robustness_writes_three_tables(runner, tmp_path, mocker):
    frame = pd.DataFrame({"value": [1.0]})
    study = mocker.patch("main.robustness_study", return_value=RobustnessTables(frame, frame, frame))

    result = runner.invoke(app, ["study-robustness", "--out", str(tmp_path), "--M", "300"])

    assert result.exit_code == 0, result.stderr
    assert study.call_args.args[1] == 300
    for name in ("sweep.csv", "invariance.csv", "coverage.csv"):
        assert (tmp_path / name).exists()


# endregion

# region ↓ Fehlerfälle ↓

def test_unknown_config_key_exits_with_schema_error(runner, tmp_path):
    result = runner.invoke(app, ["solve", "--out", str(tmp_path), "--set", "solver.unknown=1"])

    assert result.exit_code == 2
    payload = error_payload(result)
    assert payload["error"] == "config.schema"
    assert any("solver.unknown" in item for item in payload["detail"])


def test_missing_model_names_expected_path(runner, tmp_path):
    result = runner.invoke(app, ["solve", "--out", str(tmp_path), "--method", "ours", *COARSE])

    assert result.exit_code == 2
    payload = error_payload(result)
    assert payload["error"] == "storage.missing"
    assert "model.bin" in payload["detail"]


def test_unknown_method_is_reported(runner, tmp_path):
    result = runner.invoke(app, ["solve", "--out", str(tmp_path), "--method", "oracle", *COARSE])

    assert result.exit_code == 2
    assert error_payload(result)["error"] == "experiment.method"

# endregion
