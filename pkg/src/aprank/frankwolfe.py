"""Conditional-gradient decomposition over the Veronese body.

Minimizes ``F(p) = 1/2 ||p - q||_HS^2`` over ``conv{±q_v}``.  Every step moves
toward one extreme point ``±q_v``, so after ``k`` steps the iterate has rank at
most ``k``.  The linear subproblem reduces to maximizing ``|g(v)|`` on the
sphere for the current gradient ``g = p - q``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FrankWolfeError
from .norms import sample_sphere
from .search import covering_oracle, local_ascent
from .tensor import (
    Decomposition, RankOneTerm, SymmetricTensor, evaluate, gradient_tensors, hs_norm, rank_one,
)


@dataclass
class FWConfig:
    """``nuclear_guess`` must upper-bound the nuclear norm of the target.

    ``lmo`` is ``"sample"`` (uniform sampling refined by local ascent) or
    ``"cover"`` (covering net at resolution ``eta``).
    """

    epsilon: float
    nuclear_guess: float = 1.0
    lmo: str = "sample"
    max_iters: Optional[int] = None
    seed: int = 0
    eta: float = 0.02
    samples: int = 20_000
    ascent_starts: int = 8
    ascent_iters: int = 100

    def __post_init__(self):
        if self.epsilon <= 0 or self.nuclear_guess <= 0:
            raise ValueError("epsilon and nuclear_guess must be positive")
        if self.lmo not in ("sample", "cover"):
            raise ValueError(f"unknown LMO {self.lmo!r}; use 'sample' or 'cover'")

    @property
    def scaled_epsilon(self) -> float:
        return self.epsilon / self.nuclear_guess

    def iteration_budget(self) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return math.ceil(16.0 / self.scaled_epsilon ** 2 - 1e-9)


@dataclass
class FWStep:
    k: int
    delta: float
    gamma: float
    sign: float
    vector: np.ndarray
    lmo_value: float
    grad_norm: float


@dataclass
class FWTrace:
    """Per-iteration record; ``delta_k = F(p_k)`` since ``F(q) = 0``."""

    steps: list = field(default_factory=list)
    final_delta: float = math.nan
    iterations: int = 0
    halted: bool = False
    eta: float = 0.0

    def deltas(self) -> np.ndarray:
        return np.array([s.delta for s in self.steps] + [self.final_delta])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        n = len(self.steps[0].vector) if self.steps else 0
        w.writerow(["k", "delta", "gamma", "sign", "lmo_value", "grad_norm"]
                   + [f"v{i}" for i in range(n)])
        for s in self.steps:
            w.writerow([s.k, repr(s.delta), repr(s.gamma), repr(s.sign), repr(s.lmo_value),
                        repr(s.grad_norm)] + [repr(float(x)) for x in s.vector])
        return buf.getvalue()


@dataclass
class LMOResult:
    term: RankOneTerm
    value: float
    degenerate: bool = False


def step_size(k: int) -> float:
    """``2 / (k + 2)`` for ``k = 0, 1, ...``; the first step lands on an extreme point."""
    return 2.0 / (k + 2.0)


def lmo(g: SymmetricTensor, cfg: FWConfig, stream=0) -> LMOResult:
    """Minimize ``<h, g>_HS`` over ``h = ±q_v``.

    Since ``<±q_v, g> = ±g(v)`` the minimizer is ``-sign(g(v)) q_v`` at the
    ``v`` maximizing ``|g(v)|``.  A zero gradient returns ``q_{e_1}`` flagged as
    degenerate.
    """
    if not np.any(g.coeffs):
        e1 = np.zeros(g.n)
        e1[0] = 1.0
        return LMOResult(RankOneTerm(1.0, e1, g.d), 0.0, degenerate=True)
    if cfg.lmo == "cover":
        v, _, _ = covering_oracle(g, cfg.eta)
    else:
        v = _sampled_max(g, cfg, stream)
    val = evaluate(g, v)
    sign = -1.0 if val > 0 else 1.0
    return LMOResult(RankOneTerm(sign, v, g.d), abs(val))


def _sampled_max(g: SymmetricTensor, cfg: FWConfig, stream) -> np.ndarray:
    X = sample_sphere(g.n, cfg.samples, cfg.seed, stream)
    vals = np.abs(evaluate(g, X))
    starts = X[np.argsort(vals)[::-1][:cfg.ascent_starts]]
    grads = gradient_tensors(g)
    best, best_val = None, -1.0
    for v0 in starts:
        v = local_ascent(g, v0, cfg.ascent_iters, grads=grads)
        val = abs(evaluate(g, v))
        if val > best_val:
            best, best_val = v, val
    return best


def fw_decompose(q: SymmetricTensor, cfg: FWConfig) -> tuple[Decomposition, FWTrace]:
    """Frank-Wolfe approximation of ``q`` to HS accuracy ``cfg.epsilon``.

    Runs on ``q / c`` (``c = nuclear_guess``) with tolerance ``epsilon / c``,
    starting from ``p_0 = 0`` with steps ``gamma_k = 2 / (k + 2)``, and rescales
    the result by ``c``.  The caller is responsible for ``c >= ||q||_*``.

    Raises
    ------
    FrankWolfeError
        If the iteration budget runs out before the tolerance is met.
    """
    c = cfg.nuclear_guess
    target = q / c
    eps = cfg.scaled_epsilon
    budget = cfg.iteration_budget()
    trace = FWTrace(eta=cfg.eta if cfg.lmo == "cover" else 0.0)
    weights = np.zeros(0)
    signs = np.zeros(0)
    vectors = np.zeros((0, q.n))
    p = SymmetricTensor.zeros(q.n, q.d)
    k = 0
    while True:
        grad = p - target
        dist = hs_norm(grad)
        delta = 0.5 * dist * dist
        if dist < eps:
            trace.halted = True
            break
        if k >= budget:
            break
        res = lmo(grad, cfg, stream=(21, k))
        h = res.term
        gamma = step_size(k)
        trace.steps.append(FWStep(k, delta, gamma, h.coeff, h.vector.copy(), res.value, dist))
        weights = weights * (1.0 - gamma)
        hit = _find_atom(vectors, signs, h.vector, h.coeff)
        if hit is None:
            weights = np.append(weights, gamma)
            signs = np.append(signs, h.coeff)
            vectors = np.vstack([vectors, h.vector])
        else:
            weights[hit] += gamma
        p = (1.0 - gamma) * p + gamma * h.coeff * rank_one(h.vector, q.d)
        k += 1
    trace.final_delta = delta
    trace.iterations = k
    keep = weights > 0.0
    D = Decomposition(q.n, q.d, c * weights[keep] * signs[keep], vectors[keep])
    if not trace.halted:
        raise FrankWolfeError(
            f"HS error {dist * c:.6g} still above {cfg.epsilon} after {budget} iterations; "
            "check the nuclear-norm guess or use a stronger LMO", D, trace)
    return D, trace


def _find_atom(vectors, signs, v, sign):
    if vectors.shape[0] == 0:
        return None
    same = np.flatnonzero((signs == sign) & np.all(vectors == v, axis=1))
    return int(same[0]) if same.size else None


def audit_trace(trace: FWTrace, tol: float = 1e-9) -> dict:
    """Check the trace against the step recursion and the ``8/(k+1)`` rate.

    With an inexact LMO the recursion gets slack
    ``gamma_k * eta^2 / (1 - eta^2) * ||grad_k||_HS``.  Returns counts of
    violations of each inequality.
    """
    deltas = trace.deltas()
    eta2 = trace.eta ** 2
    recursion = 0
    for s, nxt in zip(trace.steps, deltas[1:]):
        slack = s.gamma * eta2 / (1.0 - eta2) * s.grad_norm if eta2 else 0.0
        if nxt > (1.0 - s.gamma) * s.delta + 2.0 * s.gamma ** 2 + slack + tol:
            recursion += 1
    rate = int(sum(dk > 8.0 / (k + 1) + tol for k, dk in enumerate(deltas)))
    return {"recursion_violations": recursion, "rate_violations": rate}
