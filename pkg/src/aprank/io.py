"""JSON files for tensors and decompositions.

Floats are written by ``json`` as shortest round-trip reprs, so a
write-then-read cycle reproduces every value bit for bit.

Tensor::

    {"kind": "tensor", "n": 3, "d": 2,
     "coeffs": [{"alpha": [2, 0, 0], "value": 1.0}, ...]}

Monomials that are not listed are zero.  Decomposition::

    {"kind": "decomposition", "n": 3, "d": 2,
     "terms": [{"coeff": 1.0, "vector": [1.0, 0.0, 0.0]}, ...]}
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import AprankError
from .tensor import Decomposition, SymmetricTensor, materialize


class FormatError(AprankError, ValueError):
    """A file does not hold a well-formed tensor or decomposition."""


def tensor_to_dict(f: SymmetricTensor) -> dict:
    nz = np.flatnonzero(f.coeffs)
    alphas = f.exponents[nz]
    return {"kind": "tensor", "n": f.n, "d": f.d,
            "coeffs": [{"alpha": [int(a) for a in alpha], "value": float(f.coeffs[i])}
                       for alpha, i in zip(alphas, nz)]}


def decomposition_to_dict(D: Decomposition) -> dict:
    return {"kind": "decomposition", "n": D.n, "d": D.d,
            "terms": [{"coeff": float(c), "vector": [float(x) for x in v]}
                      for c, v in zip(D.coeffs, D.vectors)]}


def to_dict(obj) -> dict:
    if isinstance(obj, SymmetricTensor):
        return tensor_to_dict(obj)
    if isinstance(obj, Decomposition):
        return decomposition_to_dict(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _shape(data: dict, where: str) -> tuple[int, int]:
    try:
        n, d = data["n"], data["d"]
    except KeyError as exc:
        raise FormatError(f"{where}: missing field {exc.args[0]!r}") from None
    if not (isinstance(n, int) and isinstance(d, int)) or n < 1 or d < 0:
        raise FormatError(f"{where}: n must be a positive integer and d a non-negative integer")
    return n, d


def _finite(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
        raise FormatError(f"{where}: expected a finite number, got {x!r}")
    return float(x)


def tensor_from_dict(data: dict, where: str = "tensor") -> SymmetricTensor:
    n, d = _shape(data, where)
    entries = data.get("coeffs")
    if not isinstance(entries, list):
        raise FormatError(f"{where}: 'coeffs' must be a list of {{alpha, value}} objects")
    out = {}
    for j, e in enumerate(entries):
        try:
            alpha = tuple(e["alpha"])
            value = e["value"]
        except (KeyError, TypeError):
            raise FormatError(f"{where}: coeffs[{j}] needs 'alpha' and 'value'") from None
        if len(alpha) != n or any(not isinstance(a, int) or a < 0 for a in alpha) or sum(alpha) != d:
            raise FormatError(f"{where}: coeffs[{j}] alpha {list(alpha)} is not a degree-{d} "
                              f"exponent in {n} variables")
        if alpha in out:
            raise FormatError(f"{where}: alpha {list(alpha)} listed twice")
        out[alpha] = _finite(value, f"{where}: coeffs[{j}].value")
    return SymmetricTensor.from_dict(n, d, out)


def decomposition_from_dict(data: dict, where: str = "decomposition") -> Decomposition:
    n, d = _shape(data, where)
    terms = data.get("terms")
    if not isinstance(terms, list):
        raise FormatError(f"{where}: 'terms' must be a list of {{coeff, vector}} objects")
    coeffs = np.empty(len(terms))
    vectors = np.empty((len(terms), n))
    for j, t in enumerate(terms):
        try:
            c, v = t["coeff"], t["vector"]
        except (KeyError, TypeError):
            raise FormatError(f"{where}: terms[{j}] needs 'coeff' and 'vector'") from None
        if not isinstance(v, list) or len(v) != n:
            raise FormatError(f"{where}: terms[{j}].vector must have length n={n}")
        coeffs[j] = _finite(c, f"{where}: terms[{j}].coeff")
        vectors[j] = [_finite(x, f"{where}: terms[{j}].vector") for x in v]
    try:
        return Decomposition(n, d, coeffs, vectors)
    except ValueError as exc:
        raise FormatError(f"{where}: {exc}") from None


def from_dict(data, where: str = "input"):
    """Tensor or decomposition, chosen by ``kind`` (or by which list is present)."""
    if not isinstance(data, dict):
        raise FormatError(f"{where}: top level must be a JSON object")
    kind = data.get("kind")
    if kind is None:
        kind = "decomposition" if "terms" in data else "tensor" if "coeffs" in data else None
    if kind == "tensor":
        return tensor_from_dict(data, where)
    if kind == "decomposition":
        return decomposition_from_dict(data, where)
    raise FormatError(f"{where}: unknown kind {kind!r}; expected 'tensor' or 'decomposition'")


def dumps(obj) -> str:
    return json.dumps(to_dict(obj), indent=1) + "\n"


def loads(text: str, where: str = "input"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{where}: malformed JSON ({exc})") from None
    return from_dict(data, where)


def save(obj, path) -> None:
    Path(path).write_text(dumps(obj))


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
    return loads(text, str(path))


def load_tensor(path) -> SymmetricTensor:
    """A tensor file, or a decomposition file expanded into its tensor."""
    obj = load(path)
    return materialize(obj) if isinstance(obj, Decomposition) else obj


def load_decomposition(path) -> Decomposition:
    obj = load(path)
    if not isinstance(obj, Decomposition):
        raise FormatError(f"{path}: expected a decomposition file, got a tensor")
    return obj


__all__ = [
    "FormatError", "dumps", "loads", "save", "load", "load_tensor", "load_decomposition",
    "to_dict", "from_dict", "tensor_to_dict", "tensor_from_dict", "decomposition_to_dict",
    "decomposition_from_dict",
]
