"""L_r functional norms on the unit sphere.

All integrals are against the uniform probability measure on ``S^{n-1}``.
Even ``r`` can be integrated exactly, either by expanding ``f**(r/2)`` in the
monomial basis and integrating its square against closed-form sphere moments,
or by a product Gauss rule in spherical coordinates.  Everything else goes
through Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import gammaln, roots_jacobi

from . import _parallel
from .errors import BudgetExceededError, ShapeMismatchError
from .tensor import (
    Decomposition, SymmetricTensor, evaluate, evaluate_decomposition,
    hs_norm, num_monomials, power,
)

EXPANSION_BUDGET = 2_000_000
QUADRATURE_BUDGET = 5_000_000
MC_BLOCK = 1 << 15

# entries of one pairwise block in the even-moment quadratic form
_QF_CHUNK = 1 << 22


@dataclass(frozen=True)
class EstimateResult:
    value: float
    std_error: float
    samples: int
    method: str  # "exact" | "monte-carlo" | "covering"

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BarvinokBracket:
    """``||g||_2k <= ||g||_inf <= upper_factor * ||g||_2k``."""

    n: int
    d: int
    k: int
    lower_factor: float
    upper_factor: float


# --------------------------------------------------------------------------
# sphere sampling (shared with the search module)
# --------------------------------------------------------------------------

def _block_rng(seed: int, stream, block: int) -> np.random.Generator:
    key = tuple(stream) if isinstance(stream, (tuple, list)) else (int(stream),)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key + (block,)))


def sample_sphere(n: int, N: int, seed: int, stream=0) -> np.ndarray:
    """``N`` i.i.d. uniform points on ``S^{n-1}`` as rows of an ``(N, n)`` array.

    Points are produced in fixed blocks, each from its own counter-keyed
    generator, so the output depends only on ``(seed, stream)``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if N < 0:
        raise ValueError("N must be >= 0")
    if N == 0:
        return np.zeros((0, n))

    def block(j):
        size = min(MC_BLOCK, N - j * MC_BLOCK)
        Z = _block_rng(seed, stream, j).standard_normal((size, n))
        norms = np.linalg.norm(Z, axis=1)
        while np.any(norms == 0.0):  # measure-zero, but keep the contract
            Z[norms == 0.0] = 1.0
            norms = np.linalg.norm(Z, axis=1)
        return Z / norms[:, None]

    nblocks = -(-N // MC_BLOCK)
    return np.vstack(_parallel.block_map(block, range(nblocks)))


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------

def sphere_moment(beta: Sequence[int]) -> float:
    """``∫ x^beta dσ`` over ``S^{n-1}``.

    Zero unless every exponent is even.  For ``beta = 2*gamma`` the value is
    ``prod (2 gamma_i - 1)!! / prod_{j < |gamma|} (n + 2j)``.
    """
    beta = [int(b) for b in beta]
    if not beta or min(beta) < 0:
        raise ValueError(f"invalid multi-index {beta}")
    if any(b % 2 for b in beta):
        return 0.0
    n = len(beta)
    G = sum(beta) // 2
    if sum(beta) <= 300:
        num = 1
        for b in beta:
            num *= _double_factorial(b - 1)
        den = 1
        for j in range(G):
            den *= n + 2 * j
        return float(Fraction(num, den))
    return math.exp(float(np.sum(_log_half_moment(np.array(beta))))
                    - _log_rising_half(n, G))


def _double_factorial(m: int) -> int:
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def _log_half_moment(s: np.ndarray) -> np.ndarray:
    """``log((s-1)!! / 2^(s/2)) = lgamma(s/2 + 1/2) - lgamma(1/2)`` for even ``s``."""
    return gammaln(s / 2.0 + 0.5) - gammaln(0.5)


def _log_rising_half(n: int, G: int) -> float:
    """``log prod_{j<G} (n/2 + j)``."""
    return float(gammaln(n / 2.0 + G) - gammaln(n / 2.0))


def even_moment_quadratic_form(g: SymmetricTensor) -> float:
    """``∫ g(x)^2 dσ`` via ``sum_{a,b} g_a g_b m(a + b)``.

    Only pairs whose exponents agree in parity contribute, so the sum is split
    into parity classes and each class is evaluated blockwise.
    """
    mask = g.coeffs != 0.0
    if not np.any(mask):
        return 0.0
    E = g.exponents[mask]
    c = g.coeffs[mask]
    n = g.n
    # spread the 1/prod(n/2 + j) factor over coordinates: sum of exponents is fixed
    s = np.arange(2 * g.d + 1)
    G = g.d
    W = np.exp(_log_half_moment(s) - _log_rising_half(n, G) * s / (2.0 * G)) if G else np.ones(1)
    code = (E % 2) @ (1 << np.arange(n, dtype=np.int64))
    total = 0.0
    for cls in np.unique(code):
        sel = code == cls
        Ec, cc = E[sel], c[sel]
        chunk = max(1, _QF_CHUNK // Ec.shape[0])
        for s0 in range(0, Ec.shape[0], chunk):
            blk = Ec[s0:s0 + chunk]
            K = W[blk[:, None, 0] + Ec[None, :, 0]]
            for i in range(1, n):
                K *= W[blk[:, None, i] + Ec[None, :, i]]
            total += float(cc[s0:s0 + chunk] @ K @ cc)
    return total


# --------------------------------------------------------------------------
# exact even norms
# --------------------------------------------------------------------------

def expansion_size(n: int, d: int, r: int) -> int:
    """Monomial count of ``f**r``, the quantity the expansion budget limits."""
    return num_monomials(n, r * d)


def lr_exact_even(f: SymmetricTensor, r: int, budget: int = EXPANSION_BUDGET) -> float:
    """Exact ``||f||_r`` for even ``r`` by monomial expansion.

    Forms ``g = f**(r/2)`` and integrates ``g**2`` term by term with
    ``sphere_moment``.  Raises ``BudgetExceededError`` when ``f**r`` would have
    more than ``budget`` monomials; use ``lr_quadrature`` or ``lr_monte_carlo``
    in that case.
    """
    r = _even(r)
    size = expansion_size(f.n, f.d, r)
    if size > budget:
        raise BudgetExceededError(
            f"expanding f^{r} needs {size} monomials (budget {budget}); "
            "use lr_quadrature or lr_monte_carlo instead")
    g = power(f, r // 2)
    return max(even_moment_quadratic_form(g), 0.0) ** (1.0 / r)


def _even(r) -> int:
    if isinstance(r, float) and r.is_integer():
        r = int(r)
    if not isinstance(r, (int, np.integer)) or r < 2 or r % 2:
        raise ValueError(f"exact integration needs an even integer r >= 2, got {r!r}")
    return int(r)


@lru_cache(maxsize=32)
def sphere_rule(n: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``S^{n-1}`` exact for polynomials of total degree <= ``degree``.

    Product of an equispaced azimuthal rule with ``degree + 1`` points and
    Gauss-Gegenbauer rules in the polar angles.  Weights sum to one.
    """
    if n == 1:
        X, w = np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    else:
        m = degree + 1
        phi = 2.0 * np.pi * np.arange(m) / m
        X = np.column_stack([np.cos(phi), np.sin(phi)])
        w = np.full(m, 1.0 / m)
        npts = degree // 2 + 1
        # grow the sphere one dimension at a time: S^{k-1} -> S^k
        for k in range(2, n):
            t, wt = roots_jacobi(npts, (k - 2) / 2.0, (k - 2) / 2.0)
            wt = wt / wt.sum()
            s = np.sqrt(np.clip(1.0 - t * t, 0.0, None))
            X = np.vstack([np.column_stack([np.full(X.shape[0], ti), si * X]) for ti, si in zip(t, s)])
            w = np.concatenate([wi * w for wi in wt])
    X.setflags(write=False)
    w.setflags(write=False)
    return X, w


def quadrature_size(n: int, degree: int) -> int:
    if n == 1:
        return 2
    return (degree + 1) * (degree // 2 + 1) ** (n - 2)


def lr_quadrature(f: SymmetricTensor | Decomposition, r: int,
                  budget: int = QUADRATURE_BUDGET) -> float:
    """Exact ``||f||_r`` for even ``r`` with a product Gauss rule on the sphere.

    Works from point evaluations only, so it avoids the cancellation that the
    monomial expansion suffers at high degree.  Accepts a decomposition
    directly.
    """
    r = _even(r)
    size = quadrature_size(f.n, r * f.d)
    if size > budget:
        raise BudgetExceededError(
            f"quadrature for degree {r * f.d} on S^{f.n - 1} needs {size} nodes (budget {budget})")
    X, w = sphere_rule(f.n, r * f.d)
    vals = _eval_any(f, X)
    return max(float(w @ vals ** r), 0.0) ** (1.0 / r)


def _eval_any(f, X):
    if isinstance(f, Decomposition):
        return evaluate_decomposition(f, X)
    return evaluate(f, X)


# --------------------------------------------------------------------------
# Monte Carlo, sampled bounds, Barvinok factors
# --------------------------------------------------------------------------

def lr_monte_carlo(f: SymmetricTensor | Decomposition, r: float, N: int, seed: int,
                   stream=0) -> EstimateResult:
    """Monte Carlo ``||f||_r`` with a delta-method standard error.

    ``value = mean(|f(x_i)|^r)^(1/r)`` over ``N`` uniform points.  Identical
    inputs and seed give a bit-identical result.
    """
    if N < 2:
        raise ValueError("Monte Carlo needs N >= 2")
    if r < 1:
        raise ValueError("r must be >= 1")
    X = sample_sphere(f.n, N, seed, stream)
    y = np.abs(_eval_any(f, X)) ** r
    mean = float(y.mean())
    se_mean = float(y.std(ddof=1)) / math.sqrt(N)
    if mean <= 0.0:
        return EstimateResult(0.0, 0.0, N, "monte-carlo")
    value = mean ** (1.0 / r)
    return EstimateResult(value, value / (r * mean) * se_mean, N, "monte-carlo")


def linf_lower(f: SymmetricTensor | Decomposition, points) -> float:
    """``max_i |f(x_i)|``, a lower bound on ``||f||_inf`` when the points are unit."""
    X = np.asarray(points, dtype=np.float64)
    if X.size == 0:
        raise ValueError("linf_lower needs at least one point")
    X = np.atleast_2d(X)
    if X.shape[1] != f.n:
        raise ShapeMismatchError(f"points have length {X.shape[1]}, tensor has n={f.n}")
    return float(np.max(np.abs(_eval_any(f, X))))


def barvinok_factor(n: int, d: int, k: int) -> float:
    """``binom(kd + n - 1, kd)^(1/2k)``, evaluated in log space."""
    if k < 1:
        raise ValueError("k must be >= 1")
    kd = k * d
    log_binom = gammaln(kd + n) - gammaln(kd + 1) - gammaln(n)
    return float(max(math.exp(log_binom / (2 * k)), 1.0))


def barvinok_bracket(n: int, d: int, k: int) -> BarvinokBracket:
    return BarvinokBracket(n, d, k, 1.0, barvinok_factor(n, d, k))


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

def parse_norm_kind(kind: str):
    """``"hs"`` -> ``"hs"``; ``"l4"`` -> ``4``; ``"l2.5"`` -> ``2.5``; ``"linf"`` -> ``inf``."""
    k = kind.strip().lower()
    if k == "hs":
        return "hs"
    if k in ("linf", "inf", "linf-lower", "linf-surrogate"):
        return math.inf
    if k.startswith("l"):
        k = k[1:]
    try:
        r = float(k)
    except ValueError:
        raise ValueError(f"unknown norm kind {kind!r}") from None
    if r < 2:
        raise ValueError(f"L_r norms need r >= 2, got {r}")
    return int(r) if r.is_integer() else r


def lr_norm(f: SymmetricTensor, r, *, samples: int = 100_000, seed: int = 0, stream=0,
            budget: int = EXPANSION_BUDGET,
            quadrature_budget: int = QUADRATURE_BUDGET) -> EstimateResult:
    """Best available ``||f||_r``: expansion, then quadrature, then Monte Carlo."""
    if _is_even_int(r):
        r = int(r)
        if expansion_size(f.n, f.d, r) <= budget:
            return EstimateResult(lr_exact_even(f, r, budget), 0.0, 0, "exact")
        if quadrature_size(f.n, r * f.d) <= quadrature_budget:
            return EstimateResult(lr_quadrature(f, r, quadrature_budget), 0.0, 0, "exact")
    return lr_monte_carlo(f, r, samples, seed, stream)


def _is_even_int(r) -> bool:
    return (isinstance(r, (int, np.integer)) or (isinstance(r, float) and r.is_integer())) \
        and r >= 2 and int(r) % 2 == 0


def hs_estimate(f: SymmetricTensor) -> EstimateResult:
    return EstimateResult(hs_norm(f), 0.0, 0, "exact")
