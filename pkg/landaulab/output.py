"""Artifact writers: metadata-headed CSV tables, binary spectrum snapshots and JSON documents."""
from __future__ import annotations

import csv
import json
import logging
import os
import struct
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import GridError
from .grid import FieldSpectrum, LAB, PhaseGrid

log = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b'LLAB'
SNAPSHOT_VERSION = 1
_SNAPSHOT_HEADER = struct.Struct('<4sIIIIdd')


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return '%.17g' % value
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]],
              metadata: dict[str, Any] | None = None) -> None:
    """Write a table preceded by ``# key: value`` lines, floats with 17 significant digits."""
    with open(path, 'w', newline='') as out:
        for key, value in (metadata or {}).items():
            out.write(f'# {key}: {_format(value)}\n')
        writer = csv.writer(out, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format(v) for v in row])
    log.debug('Wrote %s', path)


_BOOLEANS = {'true': 1.0, 'false': 0.0}


def read_csv(path: str) -> tuple[dict[str, str], list[str], np.ndarray]:
    """Metadata, header and a float table (booleans as 0/1) from a file written by write_csv."""
    metadata: dict[str, str] = {}
    with open(path, newline='') as src:
        lines = src.read().splitlines()
    body = []
    for line in lines:
        if line.startswith('#'):
            key, _, value = line[1:].partition(':')
            metadata[key.strip()] = value.strip()
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    table = np.array([[_BOOLEANS[v] if v in _BOOLEANS else float(v) for v in row] for row in reader], dtype=float)
    return metadata, header, table.reshape(-1, len(header))


def write_snapshot(path: str, spec: FieldSpectrum, t: float) -> None:
    if spec.frame != LAB:
        raise GridError(f'Snapshots hold lab-frame spectra, got {spec.frame}')
    grid = spec.grid
    with open(path, 'wb') as out:
        out.write(_SNAPSHOT_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, grid.d, grid.Nx, grid.Nv,
                                        grid.V, float(t)))
        out.write(np.ascontiguousarray(spec.coeffs, dtype='<c16').tobytes())


def read_snapshot(path: str) -> tuple[float, FieldSpectrum]:
    with open(path, 'rb') as src:
        raw = src.read()
    magic, version, d, Nx, Nv, V, t = _SNAPSHOT_HEADER.unpack_from(raw)
    if magic != SNAPSHOT_MAGIC or version != SNAPSHOT_VERSION:
        raise ValueError(f'{path}: not a version {SNAPSHOT_VERSION} snapshot')
    grid = PhaseGrid(Nx, Nv, V, d)
    coeffs = np.frombuffer(raw, dtype='<c16', offset=_SNAPSHOT_HEADER.size)
    if coeffs.size != Nx * Nv:
        raise ValueError(f'{path}: truncated snapshot')
    return t, FieldSpectrum(grid, coeffs.reshape(Nx, Nv).astype(complex))


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def write_json(path: str, document: Any) -> None:
    with open(path, 'w') as out:
        out.write(json.dumps(_jsonable(document), indent=2, sort_keys=True))
        out.write('\n')


def write_manifest(directory: str, config: dict, version: str, wall_time: float, threads: int,
                   outputs: Sequence[str] = ()) -> str:
    """manifest.json beside the outputs; its ``config`` entry is a loadable experiment file."""
    path = os.path.join(directory, 'manifest.json')
    write_json(path, {
        'config': config,
        'version': version,
        'wall_time': wall_time,
        'threads': threads,
        'outputs': sorted(outputs),
    })
    return path
