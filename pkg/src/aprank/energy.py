"""Greedy low-rank approximation by energy increment.

Each loop finds a direction ``v`` where the current residual is at least half
its ``L_r`` norm, adds ``q_v`` to the working span, and re-projects the input
onto that span in the Hilbert-Schmidt inner product.  Every projection
captures at least ``|residual(v)|^2`` of new energy, which bounds the number
of loops by the input's HS energy.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BudgetExceededError, RankDeficiencyError, SearchFailure
from .norms import EXPANSION_BUDGET, EstimateResult, linf_lower, lr_norm, sample_sphere
from .search import COVERING_BUDGET, SearchConfig, covering_oracle, covering_size, search_halfnorm
from .tensor import (
    Decomposition, SymmetricTensor, evaluate, gram_matrix, hs_norm, materialize, num_monomials,
)

log = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12
# samples x monomials per search batch; larger problems are refused up front
WORK_BUDGET = 5 * 10 ** 8


@dataclass
class GreedyState:
    """Loop state: chosen vectors, their Gram matrix, projection coefficients."""

    n: int
    d: int
    vectors: list = field(default_factory=list)
    gram: np.ndarray = None
    coeffs: np.ndarray = None
    residual_r_norm: float = math.inf
    loops: int = 0
    residual_history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    witness_values: list = field(default_factory=list)
    hs_norm_sq: float = 0.0
    seconds: float = 0.0

    def loop_bound(self, epsilon: float) -> int:
        """``ceil(||f||_HS^2 / eps^2)``."""
        return math.ceil(self.hs_norm_sq / epsilon ** 2 - 1e-12)

    def decomposition(self) -> Decomposition:
        if not self.vectors:
            return Decomposition(self.n, self.d)
        return Decomposition(self.n, self.d, self.coeffs, np.vstack(self.vectors))

    def report(self) -> dict:
        return {
            "loops": self.loops,
            "rank": len(self.vectors),
            "residual_norms": list(self.residual_history),
            "captured_energy": list(self.energy_history),
            "witness_values": list(self.witness_values),
            "hs_norm_sq": self.hs_norm_sq,
            "seconds": self.seconds,
        }


def project_hs(f: SymmetricTensor, vectors, condition_limit: float = CONDITION_LIMIT):
    """HS-orthogonal projection of ``f`` onto ``span{q_v : v in vectors}``.

    Solves ``G lam = b`` with ``G_ij = <v_i, v_j>^d`` and ``b_i = f(v_i)``
    (since ``<f, q_v>_HS = f(v)``).  Returns ``(lam, projection)``.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if V.shape[0] == 0 or V.size == 0:
        raise ValueError("project_hs needs at least one vector")
    G = gram_matrix(V, V, f.d)
    b = np.atleast_1d(evaluate(f, V))
    lam = _solve_gram(G, b, condition_limit)
    D = Decomposition(f.n, f.d, lam, V)
    return lam, materialize(D)


def _solve_gram(G, b, condition_limit):
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > condition_limit:
        k = _first_bad_prefix(G, condition_limit)
        raise RankDeficiencyError(
            f"Gram matrix condition {cond:.3g} exceeds {condition_limit:.3g}; "
            f"vector {k} is (nearly) in the span of the ones before it", k, cond)
    # Bunch-Kaufman pivoted LDL^T
    return scipy.linalg.solve(G, b, assume_a="sym")


def _first_bad_prefix(G, limit):
    for k in range(1, G.shape[0] + 1):
        c = np.linalg.cond(G[:k, :k])
        if not np.isfinite(c) or c > limit:
            return k - 1
    return G.shape[0] - 1


def residual_norm(g: SymmetricTensor, r, cfg: SearchConfig, stream=0, *,
                  budget: int = EXPANSION_BUDGET, eta: float = 0.05) -> EstimateResult:
    """Norm estimate used inside the loop.

    ``r = inf`` uses the covering oracle's upper bound when the net fits the
    budget and a sampled maximum otherwise.
    """
    if r == math.inf:
        if covering_size(g.n, g.d, eta) <= COVERING_BUDGET:
            _, lo, hi = covering_oracle(g, eta)
            return EstimateResult(hi, hi - lo, 0, "covering")
        X = sample_sphere(g.n, cfg.sample_size, cfg.seed, stream)
        return EstimateResult(linf_lower(g, X), 0.0, cfg.sample_size, "monte-carlo")
    return lr_norm(g, r, samples=cfg.sample_size, seed=cfg.seed, stream=stream, budget=budget)


def check_work(n: int, d: int, cfg: SearchConfig, work_budget: int = WORK_BUDGET):
    work = cfg.sample_size * num_monomials(n, d)
    if work > work_budget:
        raise BudgetExceededError(
            f"one search batch costs {cfg.sample_size} samples x {num_monomials(n, d)} monomials "
            f"= {work:.3g} (budget {work_budget:.3g}); lower --samples or the problem size")


def decompose_energy(f: SymmetricTensor, r, epsilon: float, cfg: SearchConfig | None = None, *,
                     budget: int = EXPANSION_BUDGET, work_budget: int = WORK_BUDGET,
                     eta: float = 0.05) -> tuple[Decomposition, GreedyState]:
    """Approximate ``f`` to ``L_r`` accuracy ``epsilon`` with few rank-one terms.

    Returns the decomposition of the HS projection ``f~`` and the final loop
    state.  On success ``||f - f~||_r < epsilon`` (as measured by the loop's
    own estimator) and the rank equals the number of loops.

    Raises
    ------
    SearchFailure
        When no half-norm witness is found; ``partial`` carries the
        decomposition reached so far.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cfg = cfg or SearchConfig()
    check_work(f.n, f.d, cfg, work_budget)
    start = time.perf_counter()
    state = GreedyState(f.n, f.d, hs_norm_sq=hs_norm(f) ** 2)
    # the proof only guarantees ||g(v)||^2 >= (eps/2)^2 per loop with a half-norm witness
    hard_cap = max(1, math.ceil(4.0 * state.hs_norm_sq / epsilon ** 2))
    residual = f
    est = residual_norm(residual, r, cfg, stream=(0, 0), budget=budget, eta=eta)
    state.residual_r_norm = est.value
    state.residual_history.append(est.value)
    state.energy_history.append(0.0)
    while est.value >= epsilon:
        state.loops += 1
        if state.loops > hard_cap:
            raise AssertionError(
                f"energy increment exceeded {hard_cap} loops; the witness search is broken")
        avoid = np.vstack(state.vectors) if state.vectors else None
        try:
            v = search_halfnorm(residual, r, est.value, cfg, avoid=avoid, stream=(1, state.loops))
        except SearchFailure as exc:
            exc.partial = state.decomposition()
            state.seconds = time.perf_counter() - start
            raise
        state.witness_values.append(abs(evaluate(residual, v)))
        state.vectors.append(v)
        V = np.vstack(state.vectors)
        state.gram = gram_matrix(V, V, f.d)
        lam, proj = project_hs(f, V)
        state.coeffs = lam
        residual = f - proj
        est = residual_norm(residual, r, cfg, stream=(0, state.loops), budget=budget, eta=eta)
        state.residual_r_norm = est.value
        state.residual_history.append(est.value)
        state.energy_history.append(hs_norm(proj) ** 2)
        log.info("loop %d: residual %s-norm %.6g (%s)", state.loops, r, est.value, est.method)
    state.seconds = time.perf_counter() - start
    return state.decomposition(), state


def certify(f: SymmetricTensor, D: Decomposition, r, seed: int, samples: int = 100_000,
            budget: int = EXPANSION_BUDGET) -> EstimateResult:
    """Independent re-estimate of ``||f - materialize(D)||_r`` under a fresh seed."""
    g = f - materialize(D)
    return lr_norm(g, r, samples=samples, seed=seed, stream=(7,), budget=budget)
