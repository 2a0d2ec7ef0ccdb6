import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aprank.errors import BudgetExceededError, SearchFailure
from aprank.norms import lr_exact_even, sample_sphere
from aprank.search import (
    SearchConfig, alpha_bound, covering_net, covering_oracle, covering_size, local_ascent,
    sample_size_bound, search_halfnorm,
)
from aprank.tensor import Decomposition, SymmetricTensor, evaluate, rank_one

from conftest import random_tensor, random_unit


# --- sample-size bound ----------------------------------------------------------

def test_alpha_bound_examples():
    assert alpha_bound(2, 2, 2, c1=1.0) == pytest.approx(5 ** 0.25)
    assert alpha_bound(3, 0, 4) == 1.0
    assert alpha_bound(4, 4, 4, c1=3.0) == pytest.approx(min(144.0, math.comb(19, 16) ** (1 / 8)))


def test_alpha_bound_rejects_small_r():
    with pytest.raises(ValueError):
        alpha_bound(2, 2, 1.5)


def test_sample_size_bound_examples():
    assert sample_size_bound(3, 0, 2, t=1.0) == (1, False)
    a = alpha_bound(4, 4, 4, 3.0)
    assert sample_size_bound(4, 4, 4, t=3.0)[0] == math.ceil(3 * a ** 8 * (1 - 1e-12))


def test_sample_size_bound_saturates():
    N, saturated = sample_size_bound(20, 30, 40, t=1.0)
    assert saturated and N == 2 ** 62


@given(st.integers(1, 6), st.integers(1, 6), st.integers(2, 8), st.floats(0.1, 10.0))
def test_sample_size_bound_monotone_in_t(n, d, r, t):
    assert sample_size_bound(n, d, r, t)[0] <= sample_size_bound(n, d, r, 2 * t)[0]


def test_theoretical_sample_size_finds_witness_often(rng):
    n, d, r = 3, 2, 2
    N, _ = sample_size_bound(n, d, r, t=3.0)
    cfg = SearchConfig(sample_size=N, max_retries=1, angle_cos_threshold=None)
    hits = 0
    for trial in range(200):
        p = random_tensor(rng, n, d)
        try:
            search_halfnorm(p, r, lr_exact_even(p, r), cfg, stream=trial)
            hits += 1
        except SearchFailure:
            pass
    assert hits / 200 >= 1 - math.exp(-3) - 0.05


# --- half-norm search -----------------------------------------------------------

def test_search_rank_one():
    g = rank_one([1.0, 0.0], 4)
    norm = lr_exact_even(g, 2)
    v = search_halfnorm(g, 2, norm, SearchConfig(sample_size=1000, max_retries=1))
    assert abs(evaluate(g, v)) >= 0.5 * norm


def test_search_zero_tensor_any_point_qualifies():
    v = search_halfnorm(SymmetricTensor.zeros(3, 2), 2, 0.0, SearchConfig(sample_size=10))
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_search_deterministic(rng):
    g = random_tensor(rng, 3, 4)
    cfg = SearchConfig(sample_size=5000, seed=4)
    a = search_halfnorm(g, 4, lr_exact_even(g, 4), cfg, stream=(1, 2))
    b = search_halfnorm(g, 4, lr_exact_even(g, 4), cfg, stream=(1, 2))
    np.testing.assert_array_equal(a, b)


def test_search_returns_best_qualifying_point(rng):
    g = random_tensor(rng, 3, 3)
    cfg = SearchConfig(sample_size=2000, seed=1, angle_cos_threshold=None)
    v = search_halfnorm(g, 2, lr_exact_even(g, 2), cfg, stream=7)
    X = sample_sphere(3, 2000, 1, stream=(7, 0))
    assert abs(evaluate(g, v)) == pytest.approx(np.max(np.abs(evaluate(g, X))))


def test_search_failure_carries_best(rng):
    g = random_tensor(rng, 3, 2)
    with pytest.raises(SearchFailure) as info:
        search_halfnorm(g, 2, 1e6, SearchConfig(sample_size=100, max_retries=2))
    assert info.value.best_point is not None
    assert info.value.best_value == pytest.approx(abs(evaluate(g, info.value.best_point)))


def test_angle_filter_avoids_chosen_directions():
    g = rank_one([1.0, 0.0, 0.0], 2) + 0.9 * rank_one([0.0, 1.0, 0.0], 2)
    cfg = SearchConfig(sample_size=5000, seed=2)
    v = search_halfnorm(g, 2, lr_exact_even(g, 2), cfg, avoid=np.array([[1.0, 0.0, 0.0]]))
    assert abs(v[0]) < 0.8


def test_angle_filter_dropped_when_it_blocks_everything():
    g = rank_one([1.0, 0.0], 8)
    cfg = SearchConfig(sample_size=200, seed=0, angle_cos_threshold=0.01, max_filter_rejections=2)
    v = search_halfnorm(g, 2, 1.0, cfg, avoid=np.array([[1.0, 0.0]]))
    assert abs(evaluate(g, v)) >= 0.5


@given(st.integers(2, 4), st.integers(1, 4), st.integers(0, 2 ** 32 - 1))
def test_search_never_returns_nonqualifying(n, d, seed):
    rng = np.random.default_rng(seed)
    g = random_tensor(rng, n, d)
    norm = lr_exact_even(g, 2)
    cfg = SearchConfig(sample_size=500, max_retries=3, seed=seed % 1000)
    try:
        v = search_halfnorm(g, 2, norm, cfg, avoid=random_unit(rng, n, 2))
    except SearchFailure:
        return
    assert abs(evaluate(g, v)) >= 0.5 * norm


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(sample_size=0)
    with pytest.raises(ValueError):
        SearchConfig(max_retries=0)
    with pytest.raises(ValueError):
        SearchConfig(angle_cos_threshold=1.5)


# --- covering oracle ----------------------------------------------------------------

def test_covering_net_is_dense(rng):
    d, eta = 4, 0.1
    net = covering_net(3, d, eta)
    X = random_unit(rng, 3, 2000)
    ang = np.arccos(np.clip(np.max(X @ net.T, axis=1), -1, 1))
    assert np.max(ang) <= eta / d


def test_covering_rank_one():
    v, lo, hi = covering_oracle(rank_one([1.0, 0.0], 4), 0.1)
    assert hi / lo <= 1 / (1 - 0.01) + 1e-12
    assert lo >= 0.99


def test_covering_zero():
    _, lo, hi = covering_oracle(SymmetricTensor.zeros(2, 3), 0.1)
    assert lo == 0.0 and hi == 0.0


def test_covering_contains_dense_sample_max(rng):
    g = random_tensor(rng, 2, 4)
    _, lo, hi = covering_oracle(g, 0.05)
    X = sample_sphere(2, 10 ** 7, seed=3)
    sampled = float(np.max(np.abs(evaluate(g, X))))
    assert lo <= hi and sampled <= hi


def test_covering_accepts_decomposition(rng):
    D = Decomposition(2, 3, rng.standard_normal(3), random_unit(rng, 2, 3))
    _, lo, hi = covering_oracle(D, 0.05)
    assert 0 < lo <= hi


def test_covering_budget():
    assert covering_size(10, 8, 0.05) > 1e8
    with pytest.raises(BudgetExceededError):
        covering_oracle(SymmetricTensor.zeros(10, 8), 0.05)
    with pytest.raises(ValueError):
        covering_oracle(SymmetricTensor.zeros(2, 2), 1.5)


# --- local ascent ---------------------------------------------------------------------

def test_ascent_at_global_max_keeps_value():
    g = rank_one([0.6, 0.8], 4)
    v = local_ascent(g, [0.6, 0.8])
    assert evaluate(g, v) == pytest.approx(1.0, abs=1e-14)


@given(st.integers(2, 4), st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_ascent_never_decreases(n, d, seed):
    rng = np.random.default_rng(seed)
    g = random_tensor(rng, n, d)
    v0 = random_unit(rng, n)
    v = local_ascent(g, v0, iters=50)
    assert abs(evaluate(g, v)) >= abs(evaluate(g, v0))
    assert np.linalg.norm(v) == pytest.approx(1.0)


def test_ascent_reaches_covering_value(rng):
    for _ in range(5):
        g = random_tensor(rng, 2, 4)
        _, lo, hi = covering_oracle(g, 0.02)
        best = max(abs(evaluate(g, local_ascent(g, v0))) for v0 in random_unit(rng, 2, 100))
        assert lo - 1e-6 <= best <= hi + 1e-12
