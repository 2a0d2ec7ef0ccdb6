import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gammaln

from aprank import _parallel
from aprank.errors import BudgetExceededError
from aprank.norms import (
    barvinok_bracket, barvinok_factor, even_moment_quadratic_form, linf_lower, lr_exact_even,
    lr_monte_carlo, lr_norm, lr_quadrature, parse_norm_kind, sample_sphere, sphere_moment,
    sphere_rule,
)
from aprank.search import covering_oracle
from aprank.tensor import (
    Decomposition, SymmetricTensor, evaluate, materialize, monomials, rank_one, sphere_power,
)

from conftest import random_tensor, random_unit


def gaussian_ratio_moment(beta):
    """``E[Z^beta] / E[|Z|^|beta|]`` for standard Gaussian ``Z``, via Gamma functions.

    Independent of the double-factorial formula: ``E[Z_i^(2g)] = 2^g Gamma(g+1/2)/Gamma(1/2)``
    and ``E|Z|^(2G) = 2^G Gamma(n/2 + G) / Gamma(n/2)``.
    """
    if any(b % 2 for b in beta):
        return 0.0
    n, g = len(beta), [b // 2 for b in beta]
    G = sum(g)
    log_num = sum(gammaln(gi + 0.5) - gammaln(0.5) for gi in g)
    log_den = gammaln(n / 2 + G) - gammaln(n / 2)
    return math.exp(log_num - log_den)


def q_v_closed_form(n, d, k):
    num = math.prod(range(2 * k * d - 1, 0, -2))
    den = math.prod(n + 2 * j for j in range(k * d))
    return (num / den) ** (1 / (2 * k))


# --- sampling -----------------------------------------------------------------

def test_sample_sphere_empty_and_unit():
    assert sample_sphere(3, 0, seed=1).shape == (0, 3)
    X = sample_sphere(5, 1000, seed=1)
    np.testing.assert_allclose(np.linalg.norm(X, axis=1), 1.0, atol=1e-12)


def test_sample_sphere_second_moment():
    X = sample_sphere(3, 10 ** 6, seed=7)
    y = X[:, 0] ** 2
    assert abs(y.mean() - 1 / 3) <= 4 * y.std() / math.sqrt(len(y))


def test_sample_sphere_deterministic_across_threads():
    a = sample_sphere(4, 100_000, seed=3, stream=(2, 5))
    try:
        _parallel.set_threads(4)
        b = sample_sphere(4, 100_000, seed=3, stream=(2, 5))
    finally:
        _parallel.set_threads(None)
    np.testing.assert_array_equal(a, b)


def test_sample_sphere_streams_differ():
    assert not np.array_equal(sample_sphere(3, 10, 0, stream=0), sample_sphere(3, 10, 0, stream=1))


# --- moments ------------------------------------------------------------------

def test_sphere_moment_examples():
    assert sphere_moment([0, 0, 0]) == 1.0
    assert sphere_moment([2, 0]) == 0.5
    assert sphere_moment([2, 2, 0]) == pytest.approx(1 / 15, abs=1e-16)
    assert sphere_moment([3, 1]) == 0.0


@given(st.lists(st.integers(0, 8), min_size=1, max_size=7))
def test_sphere_moment_matches_gaussian_ratio(beta):
    assert sphere_moment(beta) == pytest.approx(gaussian_ratio_moment(beta), rel=1e-12, abs=1e-300)


def test_sphere_moment_large_degree_log_path():
    beta = [200, 120, 0]
    assert sphere_moment(beta) == pytest.approx(gaussian_ratio_moment(beta), rel=1e-10)


def test_sphere_moment_monte_carlo():
    X = sample_sphere(3, 10 ** 6, seed=11)
    y = X[:, 0] ** 4 * X[:, 1] ** 2
    assert abs(y.mean() - sphere_moment([4, 2, 0])) <= 4 * y.std() / math.sqrt(len(y))


def test_sphere_rule_integrates_monomials_exactly():
    X, w = sphere_rule(4, 8)
    assert w.sum() == pytest.approx(1.0)
    for beta in monomials(4, 8)[::7]:
        val = float(w @ np.prod(X ** beta, axis=1))
        assert val == pytest.approx(sphere_moment(beta), abs=1e-14)


# --- exact even norms -----------------------------------------------------------

def test_lr_exact_even_examples():
    f = rank_one([1.0, 0.0], 1)
    assert lr_exact_even(f, 2) == pytest.approx(math.sqrt(0.5))
    for r in (2, 4, 6):
        assert lr_exact_even(sphere_power(3, 2), r) == pytest.approx(1.0)


@pytest.mark.parametrize("n,d,k", [(2, 3, 1), (3, 2, 2), (4, 4, 2), (5, 1, 3)])
def test_lr_exact_even_rank_one_closed_form(rng, n, d, k):
    v = random_unit(rng, n)
    assert lr_exact_even(rank_one(v, d), 2 * k) == pytest.approx(q_v_closed_form(n, d, k), rel=1e-10)


def test_lr_exact_even_rejects_odd_and_budget(rng):
    f = random_tensor(rng, 3, 2)
    with pytest.raises(ValueError):
        lr_exact_even(f, 3)
    with pytest.raises(BudgetExceededError, match="lr_monte_carlo"):
        lr_exact_even(f, 4, budget=10)


def test_quadrature_matches_expansion(rng):
    for n, d, r in [(2, 4, 4), (3, 3, 4), (4, 2, 6)]:
        f = random_tensor(rng, n, d)
        assert lr_quadrature(f, r) == pytest.approx(lr_exact_even(f, r), rel=1e-10)


def test_quadrature_accepts_decomposition(rng):
    D = Decomposition(3, 3, rng.standard_normal(4), random_unit(rng, 3, 4))
    assert lr_quadrature(D, 4) == pytest.approx(lr_exact_even(materialize(D), 4), rel=1e-10)


def test_quadratic_form_is_l2_squared(rng):
    f = random_tensor(rng, 3, 3)
    X, w = sphere_rule(3, 6)
    assert even_moment_quadratic_form(f) == pytest.approx(float(w @ evaluate(f, X) ** 2), rel=1e-12)


@given(st.integers(2, 3), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_lr_monotone_in_r(n, d, seed):
    f = random_tensor(np.random.default_rng(seed), n, d)
    a, b, c = (lr_exact_even(f, r) for r in (2, 4, 6))
    assert a <= b + 1e-10 and b <= c + 1e-10


@pytest.mark.parametrize("n,d", [(4, 2), (6, 2)])
def test_high_moment_ratio_bounded_by_barvinok(rng, n, d):
    f = random_tensor(rng, n, d)
    l2 = lr_exact_even(f, 2)
    prev = l2
    for k in (2, 4):
        lk = lr_exact_even(f, k)
        assert prev <= lk + 1e-10
        assert lk / l2 <= barvinok_factor(n, d, 1) * barvinok_factor(n, d, k // 2) + 1e-10
        prev = lk


# --- Monte Carlo ----------------------------------------------------------------

def test_monte_carlo_constant_on_sphere():
    est = lr_monte_carlo(sphere_power(3, 2), 4, N=1000, seed=0)
    assert est.value == pytest.approx(1.0, abs=1e-12)
    assert est.std_error == pytest.approx(0.0, abs=1e-12)


def test_monte_carlo_rank_one_l2():
    est = lr_monte_carlo(rank_one([1.0, 0.0], 1), 2, N=10 ** 6, seed=5)
    assert abs(est.value - math.sqrt(0.5)) <= 3 * est.std_error


def test_monte_carlo_bit_identical():
    f = random_tensor(np.random.default_rng(0), 3, 3)
    a = lr_monte_carlo(f, 3.5, N=50_000, seed=9)
    b = lr_monte_carlo(f, 3.5, N=50_000, seed=9)
    assert a == b


def test_monte_carlo_needs_two_samples(rng):
    with pytest.raises(ValueError):
        lr_monte_carlo(random_tensor(rng, 2, 2), 2, N=1, seed=0)


def test_monte_carlo_coverage(rng):
    hits = 0
    for s in range(100):
        f = random_tensor(rng, 3, 4)
        exact = lr_exact_even(f, 4)
        est = lr_monte_carlo(f, 4, N=20_000, seed=s)
        hits += abs(est.value - exact) <= 4 * est.std_error
    assert hits >= 95


# --- sup-norm bounds ------------------------------------------------------------

def test_linf_lower_examples(rng):
    v = random_unit(rng, 3)
    P = np.vstack([random_unit(rng, 3, 10), v])
    assert linf_lower(rank_one(v, 3), P) == pytest.approx(1.0)
    assert linf_lower(SymmetricTensor.zeros(3, 3), P) == 0.0
    with pytest.raises(ValueError):
        linf_lower(rank_one(v, 3), np.zeros((0, 3)))


def test_linf_lower_within_covering_bracket(rng):
    f = random_tensor(rng, 2, 4)
    _, lo, hi = covering_oracle(f, 0.05)
    assert linf_lower(f, sample_sphere(2, 10_000, 1)) <= hi


def test_barvinok_examples():
    assert barvinok_bracket(2, 2, 1).upper_factor == pytest.approx(math.sqrt(3))
    assert barvinok_bracket(1, 5, 3).upper_factor == 1.0
    assert barvinok_factor(4, 4, 8) == pytest.approx(math.comb(35, 32) ** (1 / 16))
    assert barvinok_bracket(3, 3, 2).lower_factor == 1.0


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_barvinok_sandwich(d, k, seed):
    f = random_tensor(np.random.default_rng(seed), 2, d)
    _, lo, hi = covering_oracle(f, 0.05)
    l2k = lr_exact_even(f, 2 * k)
    assert l2k <= hi + 1e-12
    assert lo <= barvinok_factor(2, d, k) * l2k + 1e-8


# --- dispatch -------------------------------------------------------------------

def test_parse_norm_kind():
    assert parse_norm_kind("hs") == "hs"
    assert parse_norm_kind("l4") == 4
    assert parse_norm_kind("L2.5") == 2.5
    assert parse_norm_kind("linf-lower") == math.inf
    for bad in ("l1", "lx", "foo"):
        with pytest.raises(ValueError):
            parse_norm_kind(bad)


def test_lr_norm_routes(rng):
    f = random_tensor(rng, 3, 2)
    assert lr_norm(f, 4).method == "exact"
    quad = lr_norm(f, 4, budget=1)
    assert quad.method == "exact" and quad.value == pytest.approx(lr_exact_even(f, 4))
    mc = lr_norm(f, 4, budget=1, quadrature_budget=1, samples=20_000)
    assert mc.method == "monte-carlo" and mc.std_error > 0
    assert lr_norm(f, 3, samples=1000).method == "monte-carlo"
