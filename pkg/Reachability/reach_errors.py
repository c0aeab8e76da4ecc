"""Modul zur Definition der Fehlerklassen des Reachability-Toolkits.

Alle Fehler tragen, analog zu einer HTTP-Antwort, ein Paar aus einem
maschinenlesbaren Code (z.B. ``grid.counts``) und einer lesbaren
Fehlerbeschreibung (``detail``). Die Kommandozeile gibt genau dieses Paar
als JSON aus.
"""


class ReachabilityError(Exception):
    """Basisklasse für alle fachlichen Fehler des Toolkits.

    Args:
        code (str): Maschinenlesbarer Fehlercode im Format ``modul.grund``.
        detail (str): Lesbare Beschreibung des Fehlers.
    """

    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail

    def as_dict(self) -> dict:
        """Gibt den Fehler als Dictionary für die JSON-Ausgabe zurück."""
        return {"error": self.code, "detail": self.detail}


class GridError(ReachabilityError):
    """Fehler beim Aufbau des Gitters oder bei der Interpolation."""


class ModelError(ReachabilityError):
    """Fehler in Dynamik-Parametern oder Unsicherheitsschranken."""


class SolverError(ReachabilityError):
    """Fehler während der Lösung der HJI-Variationsungleichung."""


class EnsembleError(ReachabilityError):
    """Fehler beim Training oder bei der Auswertung des Ensembles."""


class ControllerError(ReachabilityError):
    """Fehler beim Auswerten des Sicherheitsreglers."""


class SimError(ReachabilityError):
    """Fehler bei der Simulation von Trajektorien."""


class ExperimentError(ReachabilityError):
    """Fehler bei der Durchführung einer Studie."""


class StorageError(ReachabilityError):
    """Fehler beim Lesen oder Schreiben von Artefakten."""


class ConfigError(ReachabilityError):
    """Fehler in der Konfiguration (z.B. unbekannte Override-Schlüssel)."""
