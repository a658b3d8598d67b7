"""JSON encoding of complex matrices and package data types.

Matrices are row-major nested lists with complex scalars as [re, im] pairs.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = ["matrix_to_json", "matrix_from_json", "dumps", "format_float"]


def matrix_to_json(M) -> list:
    A = np.asarray(M, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in A]


def matrix_from_json(data) -> np.ndarray:
    rows = []
    for row in data:
        rows.append([complex(float(x[0]), float(x[1])) for x in row])
    return np.array(rows, dtype=complex)


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip a double exactly."""
    return format(float(x), ".17g")


class _Float17(json.JSONEncoder):
    def default(self, o):  # pragma: no cover - only numpy scalars expected
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        return super().default(o)


def dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    return json.dumps(_round_floats(obj), sort_keys=True, indent=2, cls=_Float17)


def _round_floats(obj):
    if isinstance(obj, float):
        return float(format_float(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj
