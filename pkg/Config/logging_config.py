"""Konfiguration des Loggings.

Alle Module holen sich ihren Logger über `get_logger`. Die Ausgabe läuft über
einen `rich`-Handler, der genau einmal (beim Start der Kommandozeile) über
`configure_logging` installiert wird.
"""
import logging

from rich.logging import RichHandler

# Name des Wurzel-Loggers aller Toolkit-Module
ROOT_LOGGER = "reachability"


def configure_logging(level: str = "INFO") -> None:
    """Installiert den Rich-Handler am Wurzel-Logger des Toolkits.

    Args:
        level (str): Log-Level, z.B. ``"INFO"`` oder ``"DEBUG"``.
    """
    root = logging.getLogger(ROOT_LOGGER)
    root.setLevel(level.upper())
    # Mehrfachaufrufe (z.B. in Tests) dürfen keine doppelten Handler erzeugen
    if not any(isinstance(handler, RichHandler) for handler in root.handlers):
        root.addHandler(RichHandler(show_path=False, rich_tracebacks=True))
    root.propagate = False


def get_logger(name: str) -> logging.Logger:
    """Gibt einen Logger unterhalb des Toolkit-Wurzel-Loggers zurück.

    Args:
        name (str): Modulname, üblicherweise ``__name__``.

    Returns:
        logging.Logger: Der Logger ``reachability.<name>``.
    """
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
