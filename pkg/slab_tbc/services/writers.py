# slab_tbc/services/writers.py
"""
Artefactos en disco: CSV de energías, resumen JSON, instantáneas de campos
y núcleos CQ en binario.

Binarios: MAGIC (8 bytes) + longitud de cabecera (uint32 LE) + cabecera JSON
UTF-8 + carga en float64 little-endian.
  - Instantánea: componentes en orden Ex, Ey, Ez, Hx, Hy, Hz, cada una en
    orden C con la forma indicada en la cabecera.
  - Núcleo: complejos intercalados (re, im); orden modo-mayor (ix, iy, a, b)
    y dentro de cada modo los pasos 0..N.
La marca de tiempo de la cabecera de instantáneas no entra en el hash.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import struct
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..errors import ShapeError
from .cq import CQKernel
from .stepper import EnergyReport, FieldState, SlabMedium

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = b"SLABSNAP"
KERNEL_MAGIC = b"SLABKERN"
COMPONENT_ORDER = ("Ex", "Ey", "Ez", "Hx", "Hy", "Hz")
VOLATILE_HEADER_KEYS = ("timestamp",)


# ---------------------------------------
# Helpers
# ---------------------------------------
def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def table_lines(rows: list) -> list:
    """Tabla ASCII (+---+) de una lista de dicts con las mismas claves."""
    if not rows:
        return ["<< vacío >>"]
    headers = list(rows[0].keys())
    widths = {h: max(len(h), max(len(str(r[h])) for r in rows)) for h in headers}
    sep = "+" + "+".join("-" * (widths[h] + 2) for h in headers) + "+"
    lines = [sep, "|" + "|".join(f" {h.ljust(widths[h])} " for h in headers) + "|", sep]
    for r in rows:
        lines.append("|" + "|".join(f" {str(r[h]).ljust(widths[h])} " for h in headers) + "|")
    lines.append(sep)
    return lines


def format_float(x) -> str:
    """Decimal más corto que reproduce el float (repr); vacío para None."""
    if x is None:
        return ""
    return repr(float(x))


def jsonable(obj):
    """Convierte a tipos JSON; no finitos como cadenas ('nan', 'inf', '-inf')."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [jsonable(obj.real), jsonable(obj.imag)]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def medium_hash(medium: SlabMedium) -> str:
    h = hashlib.sha256()
    for arr in (*medium.eps, *medium.mu):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()


# ---------------------------------------
# CSV / JSON
# ---------------------------------------
def write_energy_csv(path, report: EnergyReport, cfg_hash: str, include_initial: bool = False) -> Path:
    """Columnas de EnergyReport.columns; primera línea ``# config_hash=<hash>``.

    Por defecto se escriben los pasos completados (n >= 1): horizonte cero
    produce solo la cabecera.
    """
    path = Path(path)
    rows = report.rows if include_initial else report.rows[1:]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={cfg_hash}\n")
        writer = csv.DictWriter(fh, fieldnames=list(EnergyReport.columns), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({
                k: (str(r[k]) if k == "step" else format_float(r[k])) for k in EnergyReport.columns
            })
    logger.info("CSV de energías: %s (%d filas)", path, len(rows))
    return path


def read_energy_csv(path) -> tuple[str, list[dict]]:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        cfg = first.split("=", 1)[1] if first.startswith("# config_hash=") else ""
        rows = list(csv.DictReader(fh))
    return cfg, rows


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(jsonable(payload), fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")
    return path


# ---------------------------------------
# Binarios
# ---------------------------------------
def _write_binary(path: Path, magic: bytes, header: dict, payload: np.ndarray) -> Path:
    head = json.dumps(jsonable(header), sort_keys=True, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())
    return path


def _read_binary(path, magic: bytes) -> tuple[dict, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:8] != magic:
        raise ShapeError(f"{path}: cabecera binaria desconocida")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12 : 12 + n].decode("utf-8"))
    payload = np.frombuffer(data[12 + n :], dtype="<f8")
    return header, payload


def write_snapshot(path, state: FieldState, medium: SlabMedium, cfg_hash: str, timestamp: str | None = None) -> Path:
    g = state.grid
    comps = [*state.e, *state.h]
    header = {
        "config_hash": cfg_hash,
        "grid": g.as_dict(),
        "medium_hash": medium_hash(medium),
        "step": state.n,
        "t": state.t,
        "dt": state.dt,
        "closure": state.closure,
        "components": list(COMPONENT_ORDER),
        "shapes": [list(c.shape) for c in comps],
        "timestamp": timestamp or _utcnow(),
    }
    payload = np.concatenate([np.ravel(c) for c in comps])
    return _write_binary(Path(path), SNAPSHOT_MAGIC, header, payload)


def read_snapshot(path) -> tuple[dict, dict]:
    header, payload = _read_binary(path, SNAPSHOT_MAGIC)
    out, pos = {}, 0
    for name, shape in zip(header["components"], header["shapes"]):
        size = int(np.prod(shape))
        out[name] = payload[pos : pos + size].reshape(shape)
        pos += size
    if pos != payload.size:
        raise ShapeError(f"{path}: la carga no coincide con las formas de la cabecera")
    return header, out


def snapshot_digest(path) -> str:
    """Hash de cabecera (sin marca de tiempo) + carga."""
    header, payload = _read_binary(path, SNAPSHOT_MAGIC)
    for key in VOLATILE_HEADER_KEYS:
        header.pop(key, None)
    h = hashlib.sha256(canonical_json(header).encode("utf-8"))
    h.update(payload.tobytes())
    return h.hexdigest()


def write_kernel(path, kernel: CQKernel, cfg_hash: str) -> Path:
    w = np.asarray(kernel.weights, dtype=complex)
    # (N+1, ...) -> (..., N+1): modo-mayor, luego paso
    w = np.moveaxis(w, 0, -1)
    header = {**kernel.metadata(), "config_hash": cfg_hash, "layout": "mode-major,step,interleaved-complex",
              "array_shape": list(w.shape)}
    payload = np.stack([w.real, w.imag], axis=-1)
    return _write_binary(Path(path), KERNEL_MAGIC, header, payload)


def read_kernel(path) -> tuple[dict, np.ndarray]:
    """Devuelve (cabecera, pesos con forma (N+1, ...))."""
    header, payload = _read_binary(path, KERNEL_MAGIC)
    shape = tuple(header["array_shape"])
    pairs = payload.reshape(*shape, 2)
    w = pairs[..., 0] + 1j * pairs[..., 1]
    return header, np.moveaxis(w, -1, 0)
