"""Matrix files, experiment configs and report serialization.

Matrices are stored either as CSV (row-major records, with an optional
``rows,cols`` header line) or in a small binary format::

    b"LSK1" | rows: u64 LE | cols: u64 LE | rows*cols f64 LE, column-major

Reports are JSON with a fixed key order and floats written as the shortest
decimal that round-trips, so equal reports serialize to equal bytes.
"""
from __future__ import annotations

import json
import math
import struct
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .errors import BadParameters, DimensionMismatch, NonFinite, SketchError
from .rng import SeedSpec
from .verify import ExperimentSpec, VerificationReport

MAGIC = b"LSK1"
HEADER = struct.Struct("<4sQQ")


class FormatError(SketchError, ValueError):
    """A matrix or config file could not be parsed."""


class ConfigError(SketchError, ValueError):
    """A config document has unknown keys or invalid values."""


# -- matrices -------------------------------------------------------------------


def _is_binary(path: Path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == MAGIC


def write_binary(path, A) -> None:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {A.shape}")
    rows, cols = A.shape
    payload = np.asarray(A, dtype="<f8").ravel(order="F").tobytes()
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, rows, cols))
        fh.write(payload)


def read_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, rows, cols = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    expected = HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise FormatError(f"{path}: {rows}x{cols} needs {expected} bytes, file has {len(data)}")
    values = np.frombuffer(data, dtype="<f8", offset=HEADER.size, count=rows * cols)
    A = values.reshape((rows, cols), order="F").astype(np.float64, order="F")
    if not np.all(np.isfinite(A)):
        raise NonFinite(f"{path}: non-finite entries")
    return A


def _parse_record(line: str, lineno: int, path) -> list:
    try:
        return [float(tok) for tok in line.split(",")]
    except ValueError as exc:
        raise FormatError(f"{path}:{lineno}: {exc}") from None


def read_csv(path) -> np.ndarray:
    """Read a CSV matrix. A first line of two integers is taken as a ``rows,cols``
    header when the remaining records agree with it."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(Path(path).read_text().splitlines())]
    lines = [(i, ln) for i, ln in lines if ln]
    if not lines:
        raise FormatError(f"{path}: empty file")
    records = [_parse_record(ln, i, path) for i, ln in lines]
    header = None
    first = records[0]
    if len(first) == 2 and all(v.is_integer() and v >= 0 for v in first):
        rows, cols = int(first[0]), int(first[1])
        body = records[1:]
        if len(body) == rows and all(len(r) == cols for r in body):
            header = (rows, cols)
            records = body
    widths = {len(r) for r in records}
    if len(widths) > 1:
        raise FormatError(f"{path}: ragged rows with widths {sorted(widths)}")
    if header is not None and header[0] == 0:
        return np.zeros(header, order="F")
    A = np.array(records, dtype=np.float64, order="F")
    if not np.all(np.isfinite(A)):
        raise NonFinite(f"{path}: non-finite entries")
    return A


def write_csv(path, A, header: bool = True) -> None:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    out = [f"{A.shape[0]},{A.shape[1]}"] if header else []
    out += [",".join(repr(float(v)) for v in row) for row in A]
    Path(path).write_text("\n".join(out) + "\n")


def read_matrix(path) -> np.ndarray:
    """Read either format; binary files are recognized by their magic bytes."""
    path = Path(path)
    if not path.exists():
        raise FormatError(f"{path}: no such file")
    return read_binary(path) if _is_binary(path) else read_csv(path)


def read_vector(path) -> np.ndarray:
    A = read_matrix(path)
    if A.shape[1] == 1:
        return A[:, 0].copy()
    if A.shape[0] == 1:
        return A[0].copy()
    raise DimensionMismatch(f"{path}: expected a vector, got a {A.shape[0]}x{A.shape[1]} matrix")


def write_matrix(path, A) -> None:
    """Binary for ``.lsk``/``.bin`` suffixes, CSV otherwise."""
    if Path(path).suffix.lower() in (".lsk", ".bin"):
        write_binary(path, A)
    else:
        write_csv(path, A)


# -- configs --------------------------------------------------------------------

SECTIONS = ("experiment", "io", "output")
IO_KEYS = ("report", "g", "h")
OUTPUT_KEYS = ("indent",)
_EXPERIMENT_KEYS = tuple(f for f in ExperimentSpec.__dataclass_fields__)
_GRID_KEYS = ("m_grid", "d_grid")


def _reject_unknown(where: str, data: dict, allowed) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def parse_seed(value) -> SeedSpec:
    if isinstance(value, bool):
        raise ConfigError("seed must be an integer or {master_seed, stream_id}")
    if isinstance(value, int):
        return SeedSpec(value)
    if isinstance(value, dict):
        _reject_unknown("seed", value, ("master_seed", "stream_id"))
        return SeedSpec(int(value.get("master_seed", 0)), int(value.get("stream_id", 0)))
    raise ConfigError(f"seed must be an integer or an object, got {value!r}")


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(doc)


def parse_config(doc: dict) -> dict:
    """Validate a config document; returns ``{"experiment": dict, "io": dict, "output": dict}``.

    The experiment section is kept as a dict so the caller can resolve the seed
    before building the :class:`ExperimentSpec`.
    """
    _reject_unknown("config", doc, SECTIONS)
    if "experiment" not in doc:
        raise ConfigError("config needs an 'experiment' section")
    out = {}
    for name, allowed in (("experiment", _EXPERIMENT_KEYS), ("io", IO_KEYS), ("output", OUTPUT_KEYS)):
        section = doc.get(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section '{name}' must be an object")
        _reject_unknown(name, section, allowed)
        out[name] = dict(section)
    for key in ("sketch_kind", "n", "d", "m_grid", "check"):
        if key not in out["experiment"]:
            raise ConfigError(f"experiment is missing required key '{key}'")
    indent = out["output"].get("indent", 2)
    if indent is not None and (not isinstance(indent, int) or isinstance(indent, bool) or indent < 0):
        raise ConfigError("output.indent must be a non-negative integer or null")
    return out


def build_spec(experiment: dict, seed: Optional[SeedSpec] = None) -> ExperimentSpec:
    """ExperimentSpec from a config section; ``seed`` (when given) wins over the section's own."""
    fields = dict(experiment)
    if seed is not None:
        fields["seed"] = seed
    elif "seed" in fields:
        fields["seed"] = parse_seed(fields["seed"])
    for key in _GRID_KEYS:
        if fields.get(key) is not None:
            if not isinstance(fields[key], list):
                raise ConfigError(f"{key} must be a list")
            fields[key] = tuple(fields[key])
    try:
        return ExperimentSpec(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment: {exc}") from None


# -- reports ----------------------------------------------------------------------


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def report_to_json(report: VerificationReport, indent: Optional[int] = 2) -> str:
    return json.dumps(_clean(report.to_dict()), indent=indent, allow_nan=False) + "\n"


def report_from_json(text: str) -> VerificationReport:
    return VerificationReport.from_dict(json.loads(text))


def dump_json(obj, indent: Optional[int] = 2) -> str:
    return json.dumps(_clean(obj), indent=indent, allow_nan=False) + "\n"


def seed_from_env(value: Optional[str]) -> Optional[SeedSpec]:
    if value is None or value.strip() == "":
        return None
    try:
        return SeedSpec(int(value.strip(), 0))
    except (ValueError, BadParameters):
        raise ConfigError(f"LSK_SEED must be a non-negative 64-bit integer, got {value!r}") from None
