"""Sparsification of a given decomposition by Maurey's empirical method.

Sampling ``k`` rank-one terms i.i.d. with probability proportional to
``|c_i|`` and averaging them (with signs, rescaled by ``sum |c_i|``) gives an
unbiased estimate of the input whose expected error decays like
``2 T sum|c_i| / sqrt(k)``, where ``T`` is the type-2 constant of the norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SparsifyFailure
from .norms import (
    EXPANSION_BUDGET, barvinok_factor, expansion_size, lr_exact_even, lr_norm, parse_norm_kind,
    quadrature_size, lr_quadrature, QUADRATURE_BUDGET,
)
from .search import covering_oracle, covering_size, COVERING_BUDGET
from .tensor import Decomposition, decomposition_hs_norm, evaluate_decomposition, materialize


@dataclass
class SparsifyConfig:
    """``norm`` is ``"hs"``, ``"l<r>"`` or ``"linf"``."""

    norm: str = "hs"
    epsilon: float = 0.1
    seed: int = 0
    max_retries: int = 16
    type2_override: Optional[float] = None
    type2_c: float = 1.0
    samples: int = 100_000
    eta: float = 0.05

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        parse_norm_kind(self.norm)


def nuclear_upper(D: Decomposition) -> float:
    """``sum |c_i|``; every decomposition bounds the nuclear norm from above."""
    return float(np.sum(np.abs(D.coeffs)))


def type2_bound(norm_kind: str, n: int, d: int, r: Optional[float] = None,
                type2_c: float = 1.0) -> float:
    """Type-2 constant used to size the sample.

    ``hs`` is Euclidean, so 1.  ``l<r>`` uses ``type2_c * sqrt(min{r, n log(ed)})``
    (``type2_c`` stands in for the unspecified absolute constant).  ``linf``
    returns ``sqrt(2) d``, which makes ``4 T^2 = 8 d^2``.
    """
    kind = parse_norm_kind(norm_kind)
    if kind == "hs":
        return 1.0
    if kind == math.inf:
        return math.sqrt(2.0) * d
    r = kind if r is None else r
    return type2_c * math.sqrt(min(r, n * math.log(math.e * d)))


def sample_count(T: float, nuclear: float, epsilon: float) -> int:
    """``ceil(4 T^2 nuclear^2 / epsilon^2)``, at least 1."""
    return max(1, math.ceil(4.0 * T * T * nuclear * nuclear / (epsilon * epsilon) - 1e-12))


def maurey_draw(D: Decomposition, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One empirical approximation with ``k`` samples.

    Returns ``(counts, coeffs)``: how often each input term was drawn and the
    coefficient each carries in the candidate ``S/k * sum sign(c) q_v``, where
    ``S = sum |c_i|``.  Terms never drawn get coefficient zero.
    """
    S = nuclear_upper(D)
    mu = np.abs(D.coeffs) / S
    draws = rng.choice(len(D), size=k, p=mu)
    counts = np.bincount(draws, minlength=len(D))
    return counts, np.sign(D.coeffs) * counts * (S / k)


def _merged(D: Decomposition, coeffs: np.ndarray) -> Decomposition:
    keep = coeffs != 0.0
    return Decomposition(D.n, D.d, coeffs[keep], D.vectors[keep])


def candidate_error(D: Decomposition, coeffs: np.ndarray, cfg: SparsifyConfig,
                    stream=0) -> tuple[float, float]:
    """``(error, margin)``: the norm of ``p - q`` and the slack to subtract before comparing to eps.

    ``p - q`` is expressed over the input vectors, so the HS case is exact via
    the Gram matrix.
    """
    diff = Decomposition(D.n, D.d, D.coeffs - coeffs, D.vectors)
    kind = parse_norm_kind(cfg.norm)
    if kind == "hs":
        return decomposition_hs_norm(diff), 0.0
    if kind == math.inf:
        return linf_upper(diff, cfg), 0.0
    g = materialize(diff)
    est = lr_norm(g, kind, samples=cfg.samples, seed=cfg.seed, stream=stream)
    return est.value, 2.0 * est.std_error


def linf_upper(D: Decomposition, cfg: SparsifyConfig) -> float:
    """Certified upper bound on ``||materialize(D)||_inf``.

    Covering oracle when the net fits; otherwise the smallest
    ``binom(kd+n-1, kd)^(1/2k) ||.||_2k`` over the ``k`` that can be
    integrated exactly.
    """
    if covering_size(D.n, D.d, cfg.eta) <= COVERING_BUDGET:
        return covering_oracle(D, cfg.eta)[2]
    best = math.inf
    for k in range(1, 64):
        r = 2 * k
        if quadrature_size(D.n, r * D.d) <= QUADRATURE_BUDGET:
            val = lr_quadrature(D, r)
        elif expansion_size(D.n, D.d, r) <= EXPANSION_BUDGET:
            val = lr_exact_even(materialize(D), r)
        else:
            break
        best = min(best, barvinok_factor(D.n, D.d, k) * val)
    if best == math.inf:
        raise ValueError("no exact L_2k norm fits the budget; cannot certify an L_inf bound")
    return best


def maurey_sparsify(D: Decomposition, cfg: SparsifyConfig) -> tuple[Decomposition, int]:
    """Sparsify ``D`` to within ``cfg.epsilon`` in ``cfg.norm``.

    Draws ``k = ceil(4 eps^-2 T^2 (sum|c_i|)^2)`` indices from ``|c_i| / sum|c_j|``
    and redraws until the candidate is within tolerance.  Repeated indices are
    merged, so the output has at most ``k`` terms.  Returns the sparse
    decomposition and the number of draws used.
    """
    if len(D) == 0:
        raise ValueError("cannot sparsify an empty decomposition")
    S = nuclear_upper(D)
    if S == 0.0:
        return Decomposition(D.n, D.d), 1
    T = cfg.type2_override if cfg.type2_override is not None else \
        type2_bound(cfg.norm, D.n, D.d, type2_c=cfg.type2_c)
    k = sample_count(T, S, cfg.epsilon)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(11,)))
    best, best_err = None, math.inf
    for attempt in range(1, cfg.max_retries + 1):
        _, coeffs = maurey_draw(D, k, rng)
        err, margin = candidate_error(D, coeffs, cfg, stream=(12, attempt))
        if err < best_err:
            best, best_err = coeffs, err
        if err <= cfg.epsilon - margin:
            return _merged(D, coeffs), attempt
    raise SparsifyFailure(
        f"no candidate within {cfg.epsilon} after {cfg.max_retries} draws of k={k} "
        f"(best error {best_err:.6g})", _merged(D, best), best_err)


# --------------------------------------------------------------------------
# Rademacher sums of rank-one forms
# --------------------------------------------------------------------------

def khintchine_bound(xs: np.ndarray, d: int) -> float:
    """``2d (sum ||x_i||^(2d))^(1/2)``."""
    norms = np.linalg.norm(np.atleast_2d(xs), axis=1)
    return 2.0 * d * math.sqrt(float(np.sum(norms ** (2 * d))))


def rademacher_sup_average(xs: np.ndarray, d: int, points: np.ndarray, n_signs: int,
                           rng: np.random.Generator) -> float:
    """Average over random signs of ``max_z |sum_i eps_i <x_i, z>^d|`` on the given points.

    Restricting the sup to a finite point set can only lower it, so this
    estimate must sit below ``khintchine_bound`` up to sampling noise in the
    signs.
    """
    A = (np.asarray(points) @ np.atleast_2d(xs).T) ** d  # (points, m)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n_signs, A.shape[1]))
    return float(np.mean(np.max(np.abs(A @ signs.T), axis=0)))


def evaluate_candidate(D: Decomposition, coeffs: np.ndarray, X) -> np.ndarray:
    return evaluate_decomposition(Decomposition(D.n, D.d, coeffs, D.vectors), X)
