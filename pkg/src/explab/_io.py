"""Report envelopes and atomic JSON output."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from explab.render import write_atomic

SCHEMA_VERSION = "explab/1"


def jsonable(obj):
    """Plain JSON types: complex -> [re, im], numpy scalars unwrapped, NaN/inf -> None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    return obj


def envelope(command: str, config: dict, result: dict) -> dict:
    return {"schema": SCHEMA_VERSION, "command": command, "config": config,
            "result": jsonable(result)}


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, report: dict) -> None:
    write_atomic(path, dumps(report).encode())
