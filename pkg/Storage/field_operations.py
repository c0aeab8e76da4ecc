"""Modul für das Lesen und Schreiben von Wertfunktionen im Feld-Container."""
from pathlib import Path

import numpy as np

from Reachability.grid_operations import build_grid
from Reachability.reach_errors import StorageError
from Reachability.reach_models import ScalarField, ValueField
from Storage.storage import atomic_write, pack_container, read_bytes, unpack_container
from Storage.storage_models import FIELD_MAGIC, FORMAT_VERSION, FieldHeader


def encode_field(value: ValueField) -> bytes:
    """Serialisiert ein Feld samt Gitter und τ (bitgenau für ``<f8``)."""
    grid = value.field.grid
    header = FieldHeader(
        lo=grid.lo.tolist(),
        hi=grid.hi.tolist(),
        counts=list(grid.counts),
        periodic=list(grid.periodic),
        tau=value.tau,
    )
    payload = np.ascontiguousarray(value.field.values, dtype="<f8").tobytes()
    return pack_container(FIELD_MAGIC, FORMAT_VERSION, header.model_dump_json(), payload)


def decode_field(data: bytes, source: str = "<bytes>") -> ValueField:
    """Liest ein Feld aus Bytes.

    Raises:
        StorageError: Bei ungültigem Container oder falscher Nutzdatenlänge.
    """
    header_json, payload = unpack_container(data, FIELD_MAGIC, FORMAT_VERSION, source)
    header = FieldHeader.model_validate_json(header_json)
    grid = build_grid(header.lo, header.hi, header.counts, header.periodic)
    expected = grid.num_nodes * 8
    if len(payload) != expected:
        raise StorageError("storage.truncated", f"'{source}' enthält {len(payload)} statt {expected} Byte Werte")
    values = np.frombuffer(payload, dtype=header.dtype).astype(float).reshape(grid.shape)
    return ValueField(field=ScalarField(grid=grid, values=values), tau=header.tau)


def write_field(path: Path, value: ValueField) -> Path:
    """Schreibt ein Feld atomar."""
    return atomic_write(path, encode_field(value))


def read_field(path: Path) -> ValueField:
    """Liest ein Feld.

    Raises:
        StorageError: Wenn die Datei fehlt oder ungültig ist.
    """
    return decode_field(read_bytes(path), str(path))
