"""Symmetric tensors in the monomial index.

A symmetric ``d``-tensor on ``R^n`` is stored as one real coefficient per
monomial ``x^alpha`` with ``|alpha| = d``.  Each coefficient is the *sum* of
the ``binom(d, alpha)`` equal raw entries, so the tensor evaluates as the
homogeneous polynomial ``sum_alpha c_alpha x^alpha``.  Monomials are listed in
graded lexicographic order: ``x1^d`` first, ``xn^d`` last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from . import _parallel
from .errors import ShapeMismatchError

UNIT_TOL = 1e-6

# rows * monomials per evaluation chunk
_EVAL_CHUNK = 1 << 22


# --------------------------------------------------------------------------
# monomial index
# --------------------------------------------------------------------------

def num_monomials(n: int, d: int) -> int:
    """``binom(n + d - 1, d)``, the dimension of the space of symmetric d-tensors."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    return math.comb(n + d - 1, d)


@lru_cache(maxsize=64)
def monomials(n: int, d: int) -> np.ndarray:
    """Exponent matrix of shape ``(num_monomials(n, d), n)`` in graded lex order."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    if n == 1:
        out = np.array([[d]], dtype=np.int64)
    else:
        blocks = []
        for first in range(d, -1, -1):
            rest = monomials(n - 1, d - first)
            col = np.full((rest.shape[0], 1), first, dtype=np.int64)
            blocks.append(np.hstack([col, rest]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def multinomials(n: int, d: int) -> np.ndarray:
    """``binom(d, alpha) = d! / prod(alpha_i!)`` for every monomial, as floats.

    Computed in exact integer arithmetic, converted once to float64.
    """
    fact = [math.factorial(i) for i in range(d + 1)]
    top = fact[d]
    vals = []
    for row in monomials(n, d).tolist():
        den = 1
        for a in row:
            den *= fact[a]
        vals.append(float(top // den))
    out = np.array(vals, dtype=np.float64)
    out.setflags(write=False)
    return out


class _Index:
    """Maps exponent rows of a fixed ``(n, d)`` to positions in ``monomials``."""

    def __init__(self, n: int, d: int):
        self.n, self.d = n, d
        base = d + 1
        self.packed = base ** n < 2 ** 62
        exps = monomials(n, d)
        if self.packed:
            self.weights = np.array([base ** (n - 1 - i) for i in range(n)], dtype=np.int64)
            # graded lex order means packed keys are strictly decreasing
            self.keys = (exps @ self.weights)[::-1].copy()
        else:
            self.table = {tuple(row): i for i, row in enumerate(exps.tolist())}

    def lookup(self, exps: np.ndarray) -> np.ndarray:
        exps = np.asarray(exps, dtype=np.int64)
        m = num_monomials(self.n, self.d)
        if self.packed:
            keys = exps @ self.weights
            pos = np.searchsorted(self.keys, keys)
            if np.any(pos >= m) or np.any(self.keys[np.minimum(pos, m - 1)] != keys):
                raise KeyError("exponent row not in the monomial index")
            return (m - 1 - pos).astype(np.int64)
        return np.array([self.table[tuple(r)] for r in exps.reshape(-1, self.n).tolist()],
                        dtype=np.int64).reshape(exps.shape[:-1])


@lru_cache(maxsize=64)
def _index(n: int, d: int) -> _Index:
    return _Index(n, d)


def monomial_position(alpha: Sequence[int]) -> int:
    """Position of the exponent vector ``alpha`` in the graded lex order."""
    alpha = np.asarray(alpha, dtype=np.int64)
    if alpha.ndim != 1 or np.any(alpha < 0):
        raise ValueError(f"invalid multi-index {alpha.tolist()}")
    return int(_index(len(alpha), int(alpha.sum())).lookup(alpha[None, :])[0])


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------

def unit_vector(x, tol: float = UNIT_TOL) -> np.ndarray:
    """Return ``x`` as a float array renormalized to unit length.

    Inputs farther than ``tol`` from unit norm are rejected rather than
    silently rescaled.
    """
    v = np.array(x, dtype=np.float64).reshape(-1)
    if v.size == 0:
        raise ValueError("empty vector")
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("zero vector cannot be normalized")
    if abs(norm - 1.0) > tol:
        raise ValueError(f"vector norm {norm!r} is not within {tol} of 1")
    return v / norm


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SymmetricTensor:
    """Degree-``d`` symmetric tensor on ``R^n`` in the monomial index."""

    n: int
    d: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        expected = num_monomials(self.n, self.d)
        if c.shape[0] != expected:
            raise ShapeMismatchError(
                f"(n={self.n}, d={self.d}) needs {expected} coefficients, got {c.shape[0]}")
        object.__setattr__(self, "coeffs", _readonly(c))

    @classmethod
    def zeros(cls, n: int, d: int) -> "SymmetricTensor":
        return cls(n, d, np.zeros(num_monomials(n, d)))

    @classmethod
    def from_dict(cls, n: int, d: int, entries) -> "SymmetricTensor":
        """Build from ``{alpha: value}``; unlisted monomials are zero."""
        c = np.zeros(num_monomials(n, d))
        for alpha, value in dict(entries).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != n or sum(alpha) != d or min(alpha) < 0:
                raise ShapeMismatchError(f"multi-index {alpha} does not belong to (n={n}, d={d})")
            c[monomial_position(alpha)] += float(value)
        return cls(n, d, c)

    @property
    def exponents(self) -> np.ndarray:
        return monomials(self.n, self.d)

    def coeff(self, alpha: Sequence[int]) -> float:
        if len(alpha) != self.n or sum(alpha) != self.d:
            raise ShapeMismatchError(f"multi-index {tuple(alpha)} does not belong to this tensor")
        return float(self.coeffs[monomial_position(alpha)])

    def _check(self, other: "SymmetricTensor"):
        if not isinstance(other, SymmetricTensor):
            return NotImplemented
        if (self.n, self.d) != (other.n, other.d):
            raise ShapeMismatchError(
                f"shape (n={self.n}, d={self.d}) vs (n={other.n}, d={other.d})")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SymmetricTensor(self.n, self.d, self.coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SymmetricTensor(self.n, self.d, self.coeffs - other.coeffs)

    def __neg__(self):
        return SymmetricTensor(self.n, self.d, -self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, SymmetricTensor):
            return NotImplemented
        return SymmetricTensor(self.n, self.d, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SymmetricTensor(self.n, self.d, self.coeffs / float(scalar))

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self):
        return f"SymmetricTensor(n={self.n}, d={self.d}, nnz={int(np.count_nonzero(self.coeffs))})"


@dataclass(frozen=True)
class RankOneTerm:
    """``coeff * v⊗...⊗v`` with ``v`` on the unit sphere."""

    coeff: float
    vector: np.ndarray
    d: int

    def __post_init__(self):
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "vector", _readonly(unit_vector(self.vector)))

    def materialize(self) -> SymmetricTensor:
        return self.coeff * rank_one(self.vector, self.d)


@dataclass(frozen=True, eq=False)
class Decomposition:
    """A list of rank-one terms ``sum_i c_i q_{v_i}``, stored column-wise.

    ``coeffs`` has shape ``(m,)`` and ``vectors`` shape ``(m, n)`` with unit rows.
    The number of terms is an upper bound on the symmetric rank of the sum.
    """

    n: int
    d: int
    coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    vectors: np.ndarray = None

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        if self.vectors is None:
            v = np.zeros((0, self.n))
        else:
            v = np.array(self.vectors, dtype=np.float64).reshape(-1, self.n) if c.size else np.zeros((0, self.n))
        if v.shape[0] != c.shape[0]:
            raise ShapeMismatchError(f"{c.shape[0]} coefficients but {v.shape[0]} vectors")
        if v.size:
            norms = np.linalg.norm(v, axis=1)
            if np.any(norms == 0.0):
                raise ValueError("zero vector in decomposition")
            if np.any(np.abs(norms - 1.0) > UNIT_TOL):
                raise ValueError("decomposition vectors must have unit norm")
            # leave already-normalized rows bit-identical so files round-trip
            off = np.abs(norms - 1.0) > 8 * np.finfo(np.float64).eps
            v[off] /= norms[off, None]
        object.__setattr__(self, "coeffs", _readonly(c))
        object.__setattr__(self, "vectors", _readonly(v))

    @classmethod
    def from_terms(cls, n: int, d: int, terms) -> "Decomposition":
        terms = list(terms)
        if not terms:
            return cls(n, d)
        return cls(n, d, [t.coeff for t in terms], np.vstack([t.vector for t in terms]))

    @property
    def terms(self) -> list[RankOneTerm]:
        return [RankOneTerm(c, v, self.d) for c, v in zip(self.coeffs, self.vectors)]

    def __len__(self):
        return self.coeffs.shape[0]

    def __iter__(self) -> Iterator[RankOneTerm]:
        return iter(self.terms)

    def rank_bound(self) -> int:
        return len(self)

    def union(self, other: "Decomposition") -> "Decomposition":
        if (self.n, self.d) != (other.n, other.d):
            raise ShapeMismatchError("decompositions of different shape")
        return Decomposition(self.n, self.d,
                             np.concatenate([self.coeffs, other.coeffs]),
                             np.vstack([self.vectors, other.vectors]))

    def scaled(self, factor: float) -> "Decomposition":
        return Decomposition(self.n, self.d, self.coeffs * factor, self.vectors)

    def __call__(self, x):
        return evaluate_decomposition(self, x)


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def rank_one(v, d: int) -> SymmetricTensor:
    """``q_v = v⊗...⊗v``: coefficient ``binom(d, alpha) * prod v_i^alpha_i`` at ``alpha``."""
    v = unit_vector(v)
    exps = monomials(v.shape[0], d)
    powers = _power_table(v[None, :], d)[:, :, 0]  # (n, d+1)
    vals = np.ones(exps.shape[0])
    for i in range(v.shape[0]):
        vals *= powers[i, exps[:, i]]
    return SymmetricTensor(v.shape[0], d, multinomials(v.shape[0], d) * vals)


def _power_table(X: np.ndarray, d: int) -> np.ndarray:
    """``P[i, k, j] = X[j, i] ** k`` for ``k = 0..d``."""
    P = np.empty((X.shape[1], d + 1, X.shape[0]))
    P[:, 0, :] = 1.0
    for k in range(1, d + 1):
        P[:, k, :] = P[:, k - 1, :] * X.T
    return P


def monomial_matrix(X: np.ndarray, d: int) -> np.ndarray:
    """Rows of ``X`` evaluated at every degree-``d`` monomial, shape ``(N, M)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    exps = monomials(X.shape[1], d)
    P = _power_table(X, d)
    V = P[0, exps[:, 0], :].copy()
    for i in range(1, X.shape[1]):
        V *= P[i, exps[:, i], :]
    return V.T


def evaluate(f: SymmetricTensor, x) -> float | np.ndarray:
    """``f(x) = sum_alpha c_alpha x^alpha``.

    ``x`` may be a single point of length ``n`` (returns a float) or an
    ``(N, n)`` array of points (returns an array of length ``N``).
    """
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != f.n:
        raise ShapeMismatchError(f"point has length {X.shape[1]}, tensor has n={f.n}")
    if not np.any(f.coeffs):
        out = np.zeros(X.shape[0])
        return float(out[0]) if single else out
    if X.shape[0] * f.coeffs.size <= _DIRECT_LIMIT:
        # few points: one vectorized pass beats the recursion overhead
        out = monomial_matrix(X, f.d) @ f.coeffs
        return float(out[0]) if single else out
    starts = range(0, X.shape[0], _HORNER_CHUNK)

    def run(s):
        Xc = X[s:s + _HORNER_CHUNK]
        return _horner(f.coeffs, 0, f.n, f.d, Xc.T, _power_table(Xc[:, -1:], f.d)[0])

    parts = _parallel.block_map(run, starts)
    out = np.concatenate(parts)
    return float(out[0]) if single else out


_HORNER_CHUNK = 1 << 14
_DIRECT_LIMIT = 1 << 18


def _horner(c, offset, n, d, XT, last_pow):
    """Evaluate the block ``c[offset : offset + binom(n+d-1, d)]`` over the last ``n`` variables.

    In graded lex order the monomials sharing a first exponent ``a`` form a
    contiguous sub-block (``a = d`` first), so the block is
    ``sum_a x^a * block_a`` and can be folded Horner-style.
    """
    if n == 1:
        return c[offset] * last_pow[d]
    size = num_monomials(n, d)
    if not np.any(c[offset:offset + size]):
        return 0.0
    x = XT[-n]
    acc = 0.0
    pos = offset
    for a in range(d, -1, -1):
        sub = _horner(c, pos, n - 1, d - a, XT, last_pow)
        acc = acc * x + sub if a < d else sub
        pos += num_monomials(n - 1, d - a)
    if np.isscalar(acc):
        return np.full(XT.shape[1], float(acc))
    return acc


def evaluate_decomposition(D: Decomposition, x) -> float | np.ndarray:
    """``sum_i c_i <v_i, x>^d`` without materializing the tensor."""
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != D.n:
        raise ShapeMismatchError(f"point has length {X.shape[1]}, decomposition has n={D.n}")
    if len(D) == 0:
        out = np.zeros(X.shape[0])
    else:
        out = (X @ D.vectors.T) ** D.d @ D.coeffs
    return float(out[0]) if single else out


def hs_inner(p: SymmetricTensor, q: SymmetricTensor) -> float:
    """Hilbert-Schmidt (Bombieri-Weyl) inner product ``sum b_a c_a / binom(d, a)``."""
    if (p.n, p.d) != (q.n, q.d):
        raise ShapeMismatchError(f"shape (n={p.n}, d={p.d}) vs (n={q.n}, d={q.d})")
    return float(np.sum(p.coeffs * q.coeffs / multinomials(p.n, p.d)))


def hs_norm(f: SymmetricTensor) -> float:
    return math.sqrt(max(hs_inner(f, f), 0.0))


def gram_matrix(U: np.ndarray, W: np.ndarray, d: int) -> np.ndarray:
    """``<q_u, q_w>_HS = <u, w>^d`` for all row pairs."""
    return (np.atleast_2d(U) @ np.atleast_2d(W).T) ** d


def decomposition_hs_norm(D: Decomposition) -> float:
    """HS norm of ``materialize(D)`` through the Gram matrix of its vectors."""
    if len(D) == 0:
        return 0.0
    G = gram_matrix(D.vectors, D.vectors, D.d)
    return math.sqrt(max(float(D.coeffs @ G @ D.coeffs), 0.0))


def linear_combine(coeffs: Sequence[float], tensors: Sequence[SymmetricTensor]) -> SymmetricTensor:
    coeffs = list(coeffs)
    tensors = list(tensors)
    if len(coeffs) != len(tensors):
        raise ShapeMismatchError(f"{len(coeffs)} coefficients for {len(tensors)} tensors")
    if not tensors:
        raise ValueError("nothing to combine")
    n, d = tensors[0].n, tensors[0].d
    out = np.zeros(num_monomials(n, d))
    for a, t in zip(coeffs, tensors):
        if (t.n, t.d) != (n, d):
            raise ShapeMismatchError(f"shape (n={t.n}, d={t.d}) vs (n={n}, d={d})")
        out += float(a) * t.coeffs
    return SymmetricTensor(n, d, out)


def materialize(D: Decomposition) -> SymmetricTensor:
    """``sum_i c_i q_{v_i}`` as a dense coefficient vector."""
    if len(D) == 0:
        return SymmetricTensor.zeros(D.n, D.d)
    exps = monomials(D.n, D.d)
    out = np.zeros(exps.shape[0])
    chunk = max(1, _EVAL_CHUNK // exps.shape[0])
    for s in range(0, len(D), chunk):
        V = monomial_matrix(D.vectors[s:s + chunk], D.d)
        out += D.coeffs[s:s + chunk] @ V
    return SymmetricTensor(D.n, D.d, out * multinomials(D.n, D.d))


def multiply(p: SymmetricTensor, q: SymmetricTensor) -> SymmetricTensor:
    """Polynomial product; the result has degree ``p.d + q.d``."""
    if p.n != q.n:
        raise ShapeMismatchError(f"cannot multiply n={p.n} by n={q.n}")
    n, d = p.n, p.d + q.d
    out = np.zeros(num_monomials(n, d))
    pm, qm = np.flatnonzero(p.coeffs), np.flatnonzero(q.coeffs)
    if pm.size == 0 or qm.size == 0:
        return SymmetricTensor(n, d, out)
    A, B = p.exponents[pm], q.exponents[qm]
    a, b = p.coeffs[pm], q.coeffs[qm]
    index = _index(n, d)
    chunk = max(1, _EVAL_CHUNK // B.shape[0])
    for s in range(0, A.shape[0], chunk):
        S = A[s:s + chunk, None, :] + B[None, :, :]
        pos = index.lookup(S.reshape(-1, n))
        out += np.bincount(pos, weights=np.outer(a[s:s + chunk], b).ravel(), minlength=out.size)
    return SymmetricTensor(n, d, out)


def power(f: SymmetricTensor, k: int) -> SymmetricTensor:
    """``f**k`` by repeated multiplication; ``f**0`` is the constant 1."""
    if k < 0:
        raise ValueError("negative power")
    out = SymmetricTensor(f.n, 0, [1.0])
    for _ in range(k):
        out = multiply(out, f)
    return out


def sphere_power(n: int, k: int) -> SymmetricTensor:
    """``(x_1^2 + ... + x_n^2)^k``: constant 1 on the unit sphere, degree ``2k``.

    The coefficient of ``x^(2 beta)`` is ``binom(k, beta)``.
    """
    exps = monomials(n, k)
    pos = _index(n, 2 * k).lookup(2 * exps)
    c = np.zeros(num_monomials(n, 2 * k))
    c[pos] = multinomials(n, k)
    return SymmetricTensor(n, 2 * k, c)


def partial_derivative(f: SymmetricTensor, i: int) -> SymmetricTensor:
    """``d f / d x_i`` as a degree ``d - 1`` tensor."""
    if f.d == 0:
        return SymmetricTensor.zeros(f.n, 0)
    exps = f.exponents
    keep = exps[:, i] > 0
    lowered = exps[keep].copy()
    lowered[:, i] -= 1
    out = np.zeros(num_monomials(f.n, f.d - 1))
    out[_index(f.n, f.d - 1).lookup(lowered)] = f.coeffs[keep] * exps[keep, i]
    return SymmetricTensor(f.n, f.d - 1, out)


def gradient_tensors(f: SymmetricTensor) -> list[SymmetricTensor]:
    return [partial_derivative(f, i) for i in range(f.n)]


def raw_entries(f: SymmetricTensor) -> np.ndarray:
    """Expand to the full ``n x ... x n`` array of raw tensor entries.

    Each coefficient is spread evenly over the ``binom(d, alpha)`` index tuples
    of its monomial.  Intended for checks at small ``n, d``.
    """
    n, d = f.n, f.d
    if n ** d > 10 ** 7:
        raise ValueError(f"raw expansion of n={n}, d={d} is too large")
    T = np.zeros((n,) * d)
    multi = multinomials(n, d)
    index = _index(n, d)
    for idx in np.ndindex(*T.shape):
        alpha = np.bincount(np.array(idx, dtype=np.int64), minlength=n)
        pos = int(index.lookup(alpha[None, :])[0])
        T[idx] = f.coeffs[pos] / multi[pos]
    return T
