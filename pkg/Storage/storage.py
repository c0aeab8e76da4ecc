"""Modul für den Dateizugriff auf Artefakte.

Alle Artefakte werden atomar geschrieben: zuerst in eine temporäre Datei im
Zielverzeichnis, danach per `os.replace` an den endgültigen Ort. Ein
abgebrochener Lauf hinterlässt daher nie halb geschriebene Dateien.
"""
import os
import struct
import tempfile
from pathlib import Path

from Config.logging_config import get_logger
from Reachability.reach_errors import StorageError

logger = get_logger(__name__)


def atomic_write(path: Path, data: bytes | str) -> Path:
    """Schreibt Daten atomar (temporäre Datei + Umbenennen).

    Args:
        path (Path): Zielpfad, fehlende Verzeichnisse werden angelegt.
        data (bytes | str): Inhalt, Text wird als UTF-8 geschrieben.

    Raises:
        StorageError: Wenn das Schreiben fehlschlägt.

    Returns:
        Path: Der geschriebene Pfad.
    """
    path = Path(path)
    payload = data.encode("utf-8") if isinstance(data, str) else data
    temp_name = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=path.parent, prefix=f".{path.name}.", delete=False) as handle:
            temp_name = handle.name
            handle.write(payload)
            handle.flush()
            os.fsync(handle.fileno())
        os.replace(temp_name, path)
    except OSError as error:
        logger.error(f"Fehler beim Schreiben von '{path}': {error}")
        # Temporäre Datei im Fehlerfall entfernen
        if temp_name is not None and os.path.exists(temp_name):
            os.remove(temp_name)
        raise StorageError("storage.write", f"'{path}' konnte nicht geschrieben werden: {error}") from error
    logger.info(f"Artefakt geschrieben: {path}")
    return path


def read_bytes(path: Path) -> bytes:
    """Liest eine Eingabedatei.

    Raises:
        StorageError: Wenn die Datei fehlt (der erwartete Pfad wird genannt).
    """
    return require_path(path).read_bytes()


def require_path(path: Path) -> Path:
    """Prüft, dass eine Eingabedatei existiert.

    Raises:
        StorageError: Wenn die Datei fehlt.
    """
    path = Path(path)
    if not path.exists():
        raise StorageError("storage.missing", f"Erwartete Eingabedatei '{path}' existiert nicht")
    return path


def pack_container(magic: bytes, version: int, header: str, payload: bytes) -> bytes:
    """Setzt Magic, Version, Endianness-Markierung, JSON-Header und Nutzdaten zusammen."""
    encoded = header.encode("utf-8")
    return magic + bytes([version]) + b"<" + struct.pack("<I", len(encoded)) + encoded + payload


def unpack_container(data: bytes, magic: bytes, version: int, source: str = "<bytes>") -> tuple[str, bytes]:
    """Zerlegt einen Container in JSON-Header und Nutzdaten.

    Raises:
        StorageError: Bei falschem Magic, unbekannter Version oder abgeschnittenen Daten.
    """
    prefix = len(magic) + 2 + 4
    if len(data) < prefix or data[:len(magic)] != magic:
        raise StorageError("storage.magic", f"'{source}' ist kein Container vom Typ {magic!r}")
    if data[len(magic)] != version:
        raise StorageError("storage.version", f"'{source}' hat Version {data[len(magic)]}, erwartet {version}")
    if data[len(magic) + 1:len(magic) + 2] != b"<":
        raise StorageError("storage.endianness", f"'{source}' hat eine unbekannte Endianness-Markierung")
    (length,) = struct.unpack("<I", data[len(magic) + 2:prefix])
    if len(data) < prefix + length:
        raise StorageError("storage.truncated", f"'{source}' ist abgeschnitten")
    return data[prefix:prefix + length].decode("utf-8"), data[prefix + length:]
