"""Modul zur Definition der Kopfzeilen der binären Container.

Aufbau eines Containers (alle Ganzzahlen little-endian):

    4 Byte   Magic (``RHJF`` für Felder, ``RHJM`` für Modelle)
    1 Byte   Formatversion
    1 Byte   Endianness-Markierung (``<``)
    4 Byte   Länge L des JSON-Headers (uint32)
    L Byte   JSON-Header (UTF-8), siehe `FieldHeader` / `ModelHeader`
    Rest     Nutzdaten im Header genannten dtype

Definierte Modelle:
- `FieldHeader`: Gitter und Zeit eines Skalarfeldes.
- `ParameterSpec`: Name und Form eines Netzparameters.
- `ModelHeader`: Architektur, Normierer und Parameterliste eines Ensembles.
"""
from pydantic import BaseModel

FIELD_MAGIC = b"RHJF"
MODEL_MAGIC = b"RHJM"
FORMAT_VERSION = 1
ENDIAN_MARK = b"<"


# pylint: disable=too-few-public-methods
class FieldHeader(BaseModel):
    """Kopf eines Feld-Containers, die Werte folgen als ``<f8`` in C-Reihenfolge."""
    lo: list[float]
    hi: list[float]
    counts: list[int]
    periodic: list[bool]
    tau: float
    dtype: str = "<f8"


# pylint: disable=too-few-public-methods
class ParameterSpec(BaseModel):
    """Ein Parameter eines Mitglieds in der Reihenfolge des ``state_dict``."""
    name: str
    shape: list[int]


# pylint: disable=too-few-public-methods
class ModelHeader(BaseModel):
    """Kopf eines Modell-Containers, die Gewichte folgen als ``<f4`` je Mitglied."""
    state_dim: int
    control_dim: int
    members: int
    hidden_layers: int
    hidden_width: int
    activation: str
    seed: int
    input_mean: list[float]
    input_scale: list[float]
    output_mean: list[float]
    output_scale: list[float]
    parameters: list[ParameterSpec]
    dtype: str = "<f4"
