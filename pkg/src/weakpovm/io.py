"""JSON formats for instruments, states and trajectory output.

A matrix is a row-major array of ``[re, im]`` pairs, either flat
(``d*d`` pairs) or nested as ``d`` rows of ``d`` pairs. Instruments are
``{"dimension": d, "operators": [matrix, ...]}``; states are
``{"dimension": d, "rho": matrix}`` or ``{"dimension": d, "psi": [[re, im], ...]}``.
"""

import json
from pathlib import Path

import numpy as np

from .errors import ParseError
from .walk import QuantumState


def _pair(v, where) -> complex:
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 2
        or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in v)
    ):
        raise ParseError(f"{where}: expected an [re, im] pair, got {v!r}")
    return complex(float(v[0]), float(v[1]))


def parse_vector(obj, dim: int, where: str = "vector") -> np.ndarray:
    if not isinstance(obj, list) or len(obj) != dim:
        raise ParseError(f"{where}: expected {dim} entries")
    return np.array([_pair(v, where) for v in obj], dtype=np.complex128)


def parse_matrix(obj, dim: int, where: str = "matrix") -> np.ndarray:
    if not isinstance(obj, list):
        raise ParseError(f"{where}: expected an array")
    nested = bool(obj) and all(
        isinstance(r, list) and r and all(isinstance(v, list) for v in r) for r in obj
    )
    if nested:
        if len(obj) != dim or any(len(r) != dim for r in obj):
            raise ParseError(f"{where}: expected {dim} rows of {dim} entries")
        flat = [v for r in obj for v in r]
    else:
        flat = obj
    if len(flat) != dim * dim:
        raise ParseError(f"{where}: expected {dim * dim} entries, got {len(flat)}")
    return np.array([_pair(v, where) for v in flat], dtype=np.complex128).reshape(dim, dim)


def dump_matrix(m: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(m).ravel()]


def _dimension(data, where) -> int:
    if not isinstance(data, dict):
        raise ParseError(f"{where}: top level must be an object")
    dim = data.get("dimension")
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError(f"{where}: 'dimension' must be a positive integer")
    return dim


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc})") from exc


def instrument_from_json(data, where: str = "instrument") -> list:
    dim = _dimension(data, where)
    ops = data.get("operators")
    if not isinstance(ops, list) or len(ops) < 1:
        raise ParseError(f"{where}: 'operators' must be a non-empty array")
    return [parse_matrix(m, dim, f"{where} operator {j + 1}") for j, m in enumerate(ops)]


def load_instrument(path) -> list:
    """Operators of an instrument file (not yet validated)."""
    return instrument_from_json(_load_json(path), str(path))


def instrument_to_json(operators) -> dict:
    ops = [np.asarray(m) for m in operators]
    return {"dimension": int(ops[0].shape[0]), "operators": [dump_matrix(m) for m in ops]}


def state_from_json(data, where: str = "state") -> QuantumState:
    dim = _dimension(data, where)
    if "rho" in data:
        rho = parse_matrix(data["rho"], dim, f"{where} rho")
        try:
            return QuantumState(rho)
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}") from exc
    if "psi" in data:
        return QuantumState.from_psi(parse_vector(data["psi"], dim, f"{where} psi"))
    raise ParseError(f"{where}: needs 'rho' or 'psi'")


def load_state(path) -> QuantumState:
    return state_from_json(_load_json(path), str(path))


def state_to_json(rho: np.ndarray) -> dict:
    return {"dimension": int(rho.shape[0]), "rho": dump_matrix(rho)}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def write_jsonl(path, rows) -> None:
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
