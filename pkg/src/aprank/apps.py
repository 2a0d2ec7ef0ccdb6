"""Instance generation, sup-norm estimation and the benchmark harness."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .energy import certify, check_work, decompose_energy
from .errors import AprankError, BudgetExceededError
from .frankwolfe import FWConfig, fw_decompose
from .norms import (
    barvinok_factor, lr_monte_carlo, lr_quadrature, quadrature_size, sphere_moment,
    QUADRATURE_BUDGET,
)
from .search import SearchConfig
from .sparsify import SparsifyConfig, maurey_sparsify, nuclear_upper
from .tensor import Decomposition, SymmetricTensor, hs_norm, materialize, sphere_power

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InstanceSpec:
    """A planted rank-``m`` form of even degree ``two_d`` plus a sphere-constant offset."""

    m: int
    n: int
    two_d: int
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if self.two_d < 2 or self.two_d % 2:
            raise ValueError(f"two_d must be a positive even degree, got {self.two_d}")
        if self.m < 0 or self.n < 1:
            raise ValueError("need m >= 0 and n >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    @property
    def dimension(self) -> int:
        return math.comb(self.n + self.two_d - 1, self.two_d)

    def to_dict(self) -> dict:
        return asdict(self)


def generate_instance(spec: InstanceSpec) -> tuple[SymmetricTensor, Decomposition]:
    """``f = sum_i c_i <v_i, x>^(2d) + (eps/2) ||x||^(2d)``.

    ``c_i`` are standard Gaussian and ``v_i`` uniform on the sphere.  On the
    sphere the offset is the constant ``eps/2``, so ``f`` and the planted part
    differ by exactly ``eps/2`` everywhere.
    """
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(31,)))
    c = rng.standard_normal(spec.m)
    V = rng.standard_normal((spec.m, spec.n))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    planted = Decomposition(spec.n, spec.two_d, c, V)
    f = materialize(planted) + (spec.epsilon / 2.0) * sphere_power(spec.n, spec.two_d // 2)
    return f, planted


def sphere_power_nuclear(n: int, d: int) -> float:
    """Nuclear norm of ``||x||^(2 * (d // 2))`` in degree ``d``.

    The form averages ``q_v`` over the sphere up to the factor ``1 / E[x_1^d]``,
    and pairing it with itself shows that factor is also a lower bound.
    """
    beta = [0] * n
    beta[0] = d
    return 1.0 / sphere_moment(beta)


@dataclass
class LinfInterval:
    lower: float
    upper: float
    k: int
    norm_2k: float
    std_error: float
    method: str
    sparse_terms: int

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= x <= self.upper + tol

    def to_dict(self) -> dict:
        return asdict(self)


def linf_moment_order(n: int, d: int, epsilon: float) -> int:
    """``ceil((n / eps) ln(e d / eps))``."""
    return max(1, math.ceil(n / epsilon * math.log(math.e * d / epsilon)))


def estimate_linf(D: Decomposition, epsilon: float, *, seed: int = 0, samples: int = 100_000,
                  max_retries: int = 16,
                  quadrature_budget: int = QUADRATURE_BUDGET) -> LinfInterval:
    """Bracket ``||materialize(D)||_inf`` by sparsifying then taking a high ``L_2k`` norm.

    ``D`` is sparsified to ``q`` with ``||p - q||_HS <= eps``, which bounds the
    sup-norm distance too.  With ``k = ceil((n/eps) ln(ed/eps))``,
    ``||q||_2k - eps <= ||p||_inf <= B ||q||_2k + eps`` where ``B`` is the exact
    binomial Barvinok factor.  ``||q||_2k`` comes from an exact sphere rule when
    it fits ``quadrature_budget``, else from Monte Carlo widened by 4 standard
    errors.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if len(D) == 0:
        return LinfInterval(0.0, 0.0, 0, 0.0, 0.0, "empty", 0)
    q, _ = maurey_sparsify(D, SparsifyConfig("hs", epsilon, seed=seed, max_retries=max_retries))
    k = linf_moment_order(D.n, D.d, epsilon)
    # scale to unit nuclear bound so |q|^(2k) stays in range
    s = nuclear_upper(q)
    if s == 0.0:
        val, se, method = 0.0, 0.0, "zero"
    else:
        qs = q.scaled(1.0 / s)
        if quadrature_size(D.n, 2 * k * D.d) <= quadrature_budget:
            val, se, method = lr_quadrature(qs, 2 * k, budget=quadrature_budget), 0.0, "quadrature"
        else:
            est = lr_monte_carlo(qs, 2 * k, samples, seed, stream=(41,))
            val, se, method = est.value, est.std_error, "monte-carlo"
        val, se = val * s, se * s
    B = barvinok_factor(D.n, D.d, k)
    lower = max(0.0, val - 4.0 * se - epsilon)
    upper = B * (val + 4.0 * se) + epsilon
    return LinfInterval(lower, upper, k, val, se, method, len(q))


# --------------------------------------------------------------------------
# benchmark harness
# --------------------------------------------------------------------------

BENCH_METHODS = ("energy", "maurey", "fw")


def bench_row(spec: InstanceSpec, method: str = "energy", r=4, epsilon: Optional[float] = None,
              *, samples: int = 100_000, seed: Optional[int] = None) -> dict:
    """Run one instance and return a flat report row.

    Failures (budget, search, sparsify, Frank-Wolfe) are caught and recorded in
    ``status``; only programming errors propagate.
    """
    if method not in BENCH_METHODS:
        raise ValueError(f"unknown method {method!r}; use one of {BENCH_METHODS}")
    eps = spec.epsilon if epsilon is None else epsilon
    seed = spec.seed if seed is None else seed
    row = {**spec.to_dict(), "method": method, "r": r, "dim": spec.dimension,
           "rank": None, "error": None, "hs_error": None, "seconds": None, "status": "ok"}
    start = time.perf_counter()
    try:
        if method == "energy":
            search = SearchConfig(sample_size=samples, seed=seed)
            check_work(spec.n, spec.two_d, search)
        f, planted = generate_instance(spec)
        if method == "energy":
            D, _ = decompose_energy(f, r, eps, search)
        elif method == "maurey":
            D, _ = maurey_sparsify(planted, SparsifyConfig("hs", eps / 2.0, seed=seed))
        else:
            c = nuclear_upper(planted) + spec.epsilon / 2.0 * sphere_power_nuclear(spec.n, spec.two_d)
            D, _ = fw_decompose(f, FWConfig(eps, c, seed=seed))
        row["seconds"] = time.perf_counter() - start
        row["rank"] = len(D)
        row["error"] = certify(f, D, r, seed=seed + 1, samples=samples).value
        row["hs_error"] = hs_norm(f - materialize(D))
    except (AprankError, BudgetExceededError) as exc:
        row["seconds"] = time.perf_counter() - start
        row["status"] = f"{type(exc).__name__}: {exc}"
        log.warning("bench row %s failed: %s", spec, exc)
    return row


def bench_suite(specs, method: str = "energy", r=4, epsilon: Optional[float] = None,
                **kwargs) -> list[dict]:
    """Rows in input order; a failing row does not stop the run."""
    return [bench_row(s, method, r, epsilon, **kwargs) for s in specs]


def bench_csv(rows: list[dict]) -> str:
    cols = ["m", "n", "two_d", "epsilon", "seed", "method", "r", "dim", "rank", "error",
            "hs_error", "seconds", "status"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
