"""Deterministic JSON encoding for artifacts.

Floats are written with 17 significant digits, keys in insertion order and a
fixed indentation so identical runs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from typing import Any

import numpy as np
import scipy.sparse as sp

SCHEMA_VERSION = 1


def _fmt_float(x: float) -> Any:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.17g}")


def normalize_json(obj: Any) -> Any:
    """Convert numpy scalars, Fractions, tuples and floats into stable JSON values."""
    if isinstance(obj, dict):
        return {str(k): normalize_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize_json(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        v = int(obj)
        return v if abs(v) < 2**53 else str(v)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, complex):
        return [_fmt_float(obj.real), _fmt_float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return normalize_json(obj.tolist())
    return obj


class _Encoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        return super().iterencode(o, _one_shot)

    def default(self, o):
        return normalize_json(o)


def dumps(obj: Any) -> str:
    data = normalize_json(obj)
    return json.dumps(data, indent=2, sort_keys=False, allow_nan=False, default=str, ensure_ascii=True) + "\n"


def write_json(path: str, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_csv(path: str, header: list[str], rows: list[list[Any]]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def matrix_to_json(m) -> list:
    m = m.toarray() if sp.issparse(m) else np.asarray(m)
    return [[[_fmt_float(float(z.real)), _fmt_float(float(z.imag))] for z in row] for row in m]


def matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data], dtype=complex)


def path_to_json(path) -> dict:
    from .paths import AdjointPath, ConstantPath, InvolutionPath, KnotPath, ProductPath

    if getattr(path, "tag", None) == "canonical":
        return {"type": "canonical"}
    if isinstance(path, KnotPath):
        return {"type": "knots", "s": [float(v) for v in path.s], "mats": [matrix_to_json(m) for m in path.mats]}
    if isinstance(path, ConstantPath):
        if path.sparse:
            coo = path.u.tocoo()
            if np.allclose(coo.data, 1.0) and coo.nnz == path.size:
                perm = np.empty(path.size, dtype=np.int64)
                perm[coo.col] = coo.row
                return {"type": "permutation", "perm": perm.tolist()}
        return {"type": "constant", "matrix": matrix_to_json(path.u)}
    if isinstance(path, InvolutionPath):
        return {"type": "involution", "perm": path.perm.tolist()}
    if isinstance(path, ProductPath):
        return {"type": "product", "factors": [path_to_json(f) for f in path.factors]}
    if isinstance(path, AdjointPath):
        return {"type": "adjoint", "base": path_to_json(path.base)}
    return {"type": "opaque", "class": type(path).__name__}


def path_from_json(data: dict, hom=None):
    from .linalg import permutation_matrix
    from .paths import AdjointPath, ConstantPath, InvolutionPath, KnotPath, ProductPath

    kind = data["type"]
    if kind == "canonical":
        from .hom import canonical_unitary

        if hom is None:
            raise ValueError("canonical path needs its morphism")
        return canonical_unitary(hom)
    if kind == "knots":
        return KnotPath(data["s"], [matrix_from_json(m) for m in data["mats"]])
    if kind == "permutation":
        return ConstantPath(permutation_matrix(np.asarray(data["perm"], dtype=np.int64)))
    if kind == "constant":
        return ConstantPath(matrix_from_json(data["matrix"]))
    if kind == "involution":
        return InvolutionPath(np.asarray(data["perm"], dtype=np.int64))
    if kind == "product":
        return ProductPath([path_from_json(f, hom) for f in data["factors"]])
    if kind == "adjoint":
        return AdjointPath(path_from_json(data["base"], hom))
    raise ValueError(f"cannot rebuild a path of type {kind!r}")


def hom_from_json(data: dict):
    from .core import DimensionDropAlgebra
    from .hom import Homomorphism
    from .pattern import EigenvaluePattern

    h = Homomorphism(
        DimensionDropAlgebra.from_list(data["src"]),
        DimensionDropAlgebra.from_list(data["tgt"]),
        EigenvaluePattern.from_json(data["pattern"]),
        int(data["a"]),
        int(data["b"]),
        None,
    )
    if data.get("unitary") is not None:
        h.unitary = path_from_json(data["unitary"], h)
    return h
