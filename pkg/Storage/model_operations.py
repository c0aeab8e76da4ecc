"""Modul für das Lesen und Schreiben trainierter Ensembles im Modell-Container.

Nach dem Header folgen die Parameter aller Mitglieder nacheinander, je
Mitglied in der Reihenfolge von ``ParameterSpec``, als ``<f4`` in C-Reihenfolge.
"""
from pathlib import Path

import numpy as np
import torch

from Reachability.reach_errors import StorageError
from Service.ensemble_service import AffineNet, Ensemble, Normalizer
from Storage.storage import atomic_write, pack_container, read_bytes, unpack_container
from Storage.storage_models import FORMAT_VERSION, MODEL_MAGIC, ModelHeader, ParameterSpec


def encode_model(ensemble: Ensemble) -> bytes:
    """Serialisiert Architektur, Normierer und Gewichte eines Ensembles."""
    state = ensemble.members[0].state_dict()
    header = ModelHeader(
        state_dim=ensemble.state_dim,
        control_dim=ensemble.control_dim,
        members=len(ensemble.members),
        hidden_layers=ensemble.hidden_layers,
        hidden_width=ensemble.hidden_width,
        activation=ensemble.activation,
        seed=ensemble.seed,
        input_mean=ensemble.input_normalizer.mean.tolist(),
        input_scale=ensemble.input_normalizer.scale.tolist(),
        output_mean=ensemble.output_normalizer.mean.tolist(),
        output_scale=ensemble.output_normalizer.scale.tolist(),
        parameters=[ParameterSpec(name=name, shape=list(tensor.shape)) for name, tensor in state.items()],
    )
    chunks = []
    for member in ensemble.members:
        for tensor in member.state_dict().values():
            chunks.append(np.ascontiguousarray(tensor.detach().numpy(), dtype="<f4").tobytes())
    return pack_container(MODEL_MAGIC, FORMAT_VERSION, header.model_dump_json(), b"".join(chunks))


def decode_model(data: bytes, source: str = "<bytes>") -> Ensemble:
    """Baut ein Ensemble aus Bytes wieder auf.

    Raises:
        StorageError: Bei ungültigem Container oder falscher Nutzdatenlänge.
    """
    header_json, payload = unpack_container(data, MODEL_MAGIC, FORMAT_VERSION, source)
    header = ModelHeader.model_validate_json(header_json)
    sizes = [int(np.prod(spec.shape)) for spec in header.parameters]
    expected = header.members * sum(sizes) * 4
    if len(payload) != expected:
        raise StorageError("storage.truncated", f"'{source}' enthält {len(payload)} statt {expected} Byte Gewichte")
    weights = np.frombuffer(payload, dtype=header.dtype)
    members = []
    offset = 0
    for _ in range(header.members):
        net = AffineNet(header.state_dim, header.control_dim, header.hidden_layers, header.hidden_width, header.activation)
        state = {}
        for spec, size in zip(header.parameters, sizes):
            state[spec.name] = torch.from_numpy(weights[offset:offset + size].astype(np.float32).reshape(spec.shape))
            offset += size
        net.load_state_dict(state)
        net.eval()
        members.append(net)
    return Ensemble(
        members=members,
        input_normalizer=Normalizer(mean=np.asarray(header.input_mean), scale=np.asarray(header.input_scale)),
        output_normalizer=Normalizer(mean=np.asarray(header.output_mean), scale=np.asarray(header.output_scale)),
        seed=header.seed,
        hidden_layers=header.hidden_layers,
        hidden_width=header.hidden_width,
        activation=header.activation,
    )


def write_model(path: Path, ensemble: Ensemble) -> Path:
    """Schreibt ein Ensemble atomar."""
    return atomic_write(path, encode_model(ensemble))


def read_model(path: Path) -> Ensemble:
    """Liest ein Ensemble.

    Raises:
        StorageError: Wenn die Datei fehlt oder ungültig ist.
    """
    return decode_model(read_bytes(path), str(path))
