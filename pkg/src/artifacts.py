"""
Artifact writers and readers.

CSV files go through pandas with '.' decimals, LF line endings and
shortest round-trip floats, so equal inputs give byte-identical files.
JSON documents are written with sorted keys; non-finite floats become the
strings "inf" / "-inf" and NaN becomes null.

Binary path layout (little-endian):

    b"JFPATH01"  magic
    u8           version (1)
    u8           flags (bit 0: x, y, z components present)
    u64          node count n
    f64[n] × k   columns t, m, m_left, jump, z_mark, is_jump[, x, y, z]

Usage:
    from src.artifacts import ArtifactWriter

    with ArtifactWriter("out") as writer:
        writer.write_csv("path.csv", path_frame(path))
        writer.write_json("simulate.json", summary)
"""

from __future__ import annotations

import json
import logging
import math
import struct
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
import pandas as pd

from src.points import PointSystem
from src.sde import SamplePath

logger = logging.getLogger(__name__)

PATH_MAGIC = b"JFPATH01"
PATH_VERSION = 1
_HEADER = struct.Struct("<8sBBQ")
_BASE_COLUMNS = ("t", "m", "m_left", "jump", "z_mark", "is_jump")
_COMPONENT_COLUMNS = ("x", "y", "z")


class ArtifactFormatError(ValueError):
    """A binary artifact has the wrong magic, version or size."""


# ─── Frames ───────────────────────────────────────────────────────────────────


def path_frame(path: SamplePath) -> pd.DataFrame:
    """Columns t,m,m_left,jump,x,y,z plus is_jump marking the jump rows."""
    comps = path.components or {}
    zeros = np.zeros(len(path))
    return pd.DataFrame(
        {
            "t": path.grid,
            "m": path.values,
            "m_left": path.left_values,
            "jump": path.jump_marks,
            "x": comps.get("x", zeros),
            "y": comps.get("y", zeros),
            "z": comps.get("z", zeros),
            "is_jump": path.is_jump.astype(np.int64),
        }
    )


def points_frame(ps: PointSystem) -> pd.DataFrame:
    """Events in stored order (decreasing |z|)."""
    return pd.DataFrame({"t": np.asarray(ps.times), "z": np.asarray(ps.marks)})


def records_frame(rows: List[Any], columns: List[str]) -> pd.DataFrame:
    """Frame from dataclass rows (or dicts), restricted to `columns`."""
    data = [row if isinstance(row, dict) else row.__dict__ for row in rows]
    return pd.DataFrame([{c: d[c] for c in columns} for d in data], columns=columns)


# ─── JSON ─────────────────────────────────────────────────────────────────────


def to_jsonable(value: Any) -> Any:
    """Plain JSON types from numpy scalars, arrays, tuples and non-finite floats."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def dumps_json(doc: Any) -> str:
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


# ─── Binary paths ─────────────────────────────────────────────────────────────


def encode_path(path: SamplePath) -> bytes:
    with_components = path.components is not None
    columns = [path.grid, path.values, path.left_values, path.jump_marks, path.z_marks, path.is_jump.astype(float)]
    if with_components:
        columns += [path.components[name] for name in _COMPONENT_COLUMNS]
    header = _HEADER.pack(PATH_MAGIC, PATH_VERSION, int(with_components), len(path))
    return header + b"".join(np.ascontiguousarray(c, dtype="<f8").tobytes() for c in columns)


def decode_path(blob: bytes) -> SamplePath:
    if len(blob) < _HEADER.size:
        raise ArtifactFormatError("truncated header")
    magic, version, flags, n = _HEADER.unpack_from(blob)
    if magic != PATH_MAGIC:
        raise ArtifactFormatError(f"bad magic {magic!r}")
    if version != PATH_VERSION:
        raise ArtifactFormatError(f"unsupported version {version}")
    names = list(_BASE_COLUMNS) + (list(_COMPONENT_COLUMNS) if flags & 1 else [])
    expected = _HEADER.size + 8 * n * len(names)
    if len(blob) != expected:
        raise ArtifactFormatError(f"expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).astype(float)
    cols = dict(zip(names, flat.reshape(len(names), n)))
    is_jump = cols["is_jump"] != 0.0
    return SamplePath(
        grid=cols["t"],
        values=cols["m"],
        left_values=cols["m_left"],
        jump_marks=cols["jump"],
        is_jump=is_jump,
        z_marks=cols["z_mark"],
        uniform_mask=~is_jump,
        x0=float(cols["m"][0]) if n else 0.0,
        components={k: cols[k] for k in _COMPONENT_COLUMNS} if flags & 1 else None,
    )


def read_path_binary(file_path: Union[str, Path]) -> SamplePath:
    return decode_path(Path(file_path).read_bytes())


def read_csv(file_path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(file_path, float_precision="round_trip")


# ─── Writer ───────────────────────────────────────────────────────────────────


class ArtifactWriter:
    """
    Writes artifacts into one directory and remembers them.

    Used as a context manager, files written inside a block that raises are
    deleted again before the exception propagates.
    """

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.written: List[Path] = []

    def __enter__(self) -> "ArtifactWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            self.cleanup()
        return False

    def _target(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        target = self.output_dir / name
        self.written.append(target)
        return target

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        target = self._target(name)
        frame.to_csv(target, index=False, lineterminator="\n")
        logger.info("[artifacts] wrote %s (%d rows)", target, len(frame))
        return target

    def write_json(self, name: str, doc: Dict[str, Any]) -> Path:
        target = self._target(name)
        target.write_text(dumps_json(doc), encoding="utf-8", newline="\n")
        logger.info("[artifacts] wrote %s", target)
        return target

    def write_path_binary(self, name: str, path: SamplePath) -> Path:
        target = self._target(name)
        target.write_bytes(encode_path(path))
        logger.info("[artifacts] wrote %s (%d nodes)", target, len(path))
        return target

    def cleanup(self) -> None:
        for target in self.written:
            try:
                target.unlink()
            except FileNotFoundError:
                pass
        if self.written:
            logger.info("[artifacts] removed %d partial artifacts", len(self.written))
        self.written = []
