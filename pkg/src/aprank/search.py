"""Randomized and grid searches for large values of a form on the sphere."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .errors import BudgetExceededError, SearchFailure
from .norms import sample_sphere
from .tensor import Decomposition, SymmetricTensor, evaluate, evaluate_decomposition, gradient_tensors

COVERING_BUDGET = 10 ** 8


@dataclass
class SearchConfig:
    """Sampling parameters for the witness search.

    ``angle_cos_threshold=None`` disables the angle filter.  ``c1`` is the
    unnamed absolute constant in the sample-size bound; it only feeds
    ``alpha_bound`` and ``sample_size_bound``.
    """

    sample_size: int = 100_000
    max_retries: int = 20
    seed: int = 0
    c1: float = 3.0
    angle_cos_threshold: Optional[float] = 0.8
    max_filter_rejections: int = 5

    def __post_init__(self):
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        t = self.angle_cos_threshold
        if t is not None and not 0.0 <= t <= 1.0:
            raise ValueError("angle_cos_threshold must lie in [0, 1]")


def _values(g, X):
    if isinstance(g, Decomposition):
        return evaluate_decomposition(g, X)
    return evaluate(g, X)


def alpha_bound(n: int, d: int, r: float, c1: float = 3.0) -> float:
    """``min{(c1 r)^(d/2), binom(rd + n - 1, rd)^(1/2r)}``.

    The binomial is evaluated through log-gamma so non-integer ``r`` is fine.
    """
    if r < 2:
        raise ValueError("r must be >= 2")
    first = (c1 * r) ** (d / 2.0)
    rd = r * d
    log_binom = gammaln(rd + n) - gammaln(rd + 1) - gammaln(n)
    second = math.exp(log_binom / (2.0 * r))
    return float(min(first, second))


def sample_size_bound(n: int, d: int, r: float, t: float, c1: float = 3.0,
                      cap: int = 2 ** 62) -> tuple[int, bool]:
    """``ceil(t * alpha(n, d, r)^(2r))`` and whether it saturated at ``cap``.

    With that many uniform samples, the largest ``|p(v_i)|`` reaches half of
    ``||p||_r`` with probability at least ``1 - exp(-t)``.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    log_n = math.log(t) + 2.0 * r * math.log(alpha_bound(n, d, r, c1))
    if log_n >= math.log(cap):
        return cap, True
    # guard ceil against representation error in the exp/log round trip
    return min(cap, max(1, math.ceil(math.exp(log_n) * (1 - 1e-12)))), False


def _angle_ok(X, avoid, threshold):
    if avoid is None or len(avoid) == 0 or threshold is None:
        return np.ones(X.shape[0], dtype=bool)
    cos = np.abs(X @ np.asarray(avoid).T)
    return np.all(cos < threshold, axis=1)


def search_halfnorm(g: SymmetricTensor | Decomposition, r, norm_value: float,
                    cfg: SearchConfig, avoid=None, stream=0) -> np.ndarray:
    """Find a unit ``v`` with ``|g(v)| >= norm_value / 2``.

    Each attempt draws ``cfg.sample_size`` fresh uniform points and returns
    the qualifying point with the largest ``|g(v)|``.  When ``avoid`` is given
    and the angle filter is on, points with ``|cos| >= threshold`` against any
    row of ``avoid`` are skipped; after ``cfg.max_filter_rejections`` attempts
    in a row where only filtered points qualified, the filter is dropped.
    ``r`` is informational; the requirement only involves ``norm_value``.
    """
    target = 0.5 * norm_value
    threshold = cfg.angle_cos_threshold
    rejections = 0
    best_v, best_val = None, -1.0
    for attempt in range(cfg.max_retries):
        X = sample_sphere(g.n, cfg.sample_size, cfg.seed, stream=_stream(stream, attempt))
        vals = np.abs(_values(g, X))
        top = int(np.argmax(vals))
        if vals[top] > best_val:
            best_v, best_val = X[top], float(vals[top])
        qualifies = vals >= target
        if not np.any(qualifies):
            continue
        allowed = qualifies & _angle_ok(X, avoid, threshold)
        if np.any(allowed):
            idx = np.flatnonzero(allowed)
            v = X[idx[np.argmax(vals[idx])]].copy()
            assert abs(_values(g, v)) >= target
            return v
        rejections += 1
        if rejections >= cfg.max_filter_rejections:
            threshold = None
            v = X[top].copy()
            return v
    raise SearchFailure(
        f"no point with |g(v)| >= {target:.6g} after {cfg.max_retries} batches "
        f"of {cfg.sample_size} (best {best_val:.6g})", best_v, best_val)


def _stream(stream, attempt):
    base = tuple(stream) if isinstance(stream, (tuple, list)) else (int(stream),)
    return base + (attempt,)


def covering_size(n: int, d: int, eta: float) -> float:
    """``(3d / eta)^n``, the evaluation-count guard for the covering oracle."""
    return (3.0 * max(d, 1) / eta) ** n


def covering_net(n: int, d: int, eta: float) -> np.ndarray:
    """Grid on the surface of ``[-1, 1]^n`` with pitch ``eta / (d sqrt(n))``, projected to the sphere.

    Every point of the sphere lies within geodesic distance ``eta / d`` of a
    net point.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    pitch = eta / (max(d, 1) * math.sqrt(n))
    m = int(math.ceil(2.0 / pitch)) + 1
    axis = np.linspace(-1.0, 1.0, m)
    face = np.stack(np.meshgrid(*([axis] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
    pts = []
    for i, sign in itertools.product(range(n), (1.0, -1.0)):
        P = np.insert(face, i, sign, axis=1)
        pts.append(P)
    P = np.vstack(pts)
    return P / np.linalg.norm(P, axis=1)[:, None]


def covering_oracle(g: SymmetricTensor | Decomposition, eta: float,
                    budget: float = COVERING_BUDGET) -> tuple[np.ndarray, float, float]:
    """Bracket ``||g||_inf`` by evaluating on an ``eta/d``-net.

    Returns ``(v, lower, upper)`` with ``lower = |g(v)| <= ||g||_inf <= upper =
    lower / (1 - eta^2)``.
    """
    if not 0.0 < eta < 1.0:
        raise ValueError("eta must lie in (0, 1)")
    size = covering_size(g.n, g.d, eta)
    if size > budget:
        raise BudgetExceededError(
            f"covering net for n={g.n}, d={g.d}, eta={eta} needs ~{size:.3g} evaluations "
            f"(budget {budget:.3g})")
    X = covering_net(g.n, g.d, eta)
    vals = np.abs(_values(g, X))
    i = int(np.argmax(vals))
    lower = float(vals[i])
    return X[i].copy(), lower, lower / (1.0 - eta * eta)


def local_ascent(g: SymmetricTensor, v0, iters: int = 200, tol: float = 1e-12,
                 grads=None) -> np.ndarray:
    """Riemannian gradient ascent of ``|g|`` on the sphere with backtracking.

    Never returns a point with a smaller ``|g|`` than ``v0``.  ``grads`` may
    pass precomputed ``gradient_tensors(g)``.
    """
    v = np.asarray(v0, dtype=np.float64)
    v = v / np.linalg.norm(v)
    if g.d == 0:
        return v
    grads = gradient_tensors(g) if grads is None else grads
    val = evaluate(g, v)
    step = 1.0
    for _ in range(iters):
        s = 1.0 if val >= 0 else -1.0
        grad = np.array([evaluate(p, v) for p in grads])
        rg = s * (grad - (grad @ v) * v)
        gnorm = np.linalg.norm(rg)
        if gnorm <= tol:
            break
        improved = False
        t = step
        for _ in range(40):
            w = v + t * rg
            w /= np.linalg.norm(w)
            wval = evaluate(g, w)
            if abs(wval) > abs(val):
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        gain = abs(wval) - abs(val)
        v, val = w, wval
        step = 2.0 * t
        if gain <= tol * max(abs(val), 1.0):
            break
    return v
