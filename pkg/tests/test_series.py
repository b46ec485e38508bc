import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_base
from fieldcalc import multiindex as mi
from fieldcalc import oracle
from fieldcalc.combinatorics import enumerate_partitions
from fieldcalc.series import (
    BaseSpace,
    SymmetricSeries,
    TruncationError,
    compose,
    decomposition_integral,
    derivative,
    eval_generating,
    exp_series,
    exponential_vector,
    guichardet_integral,
    inverse_series,
    log_series,
    pairing,
    sum_integral,
    wick_power,
    wick_product,
)

TOL = 1e-12


def rand(rng, m, n, const=None):
    return SymmetricSeries.random(m, n, rng, const=const)


# ---------------------------------------------------------------- container


def test_keys_canonicalized_and_zeros_dropped():
    F = SymmetricSeries(2, 3, {(1, 0): 2.0, (0, 0): 0.0})
    assert F[(0, 1)] == F[(1, 0)] == 2.0
    assert F.keys() == [(0, 1)]
    assert F[(1, 1, 1)] == 0.0


def test_rejects_bad_indices():
    with pytest.raises(ValueError):
        SymmetricSeries(2, 2, {(0, 0, 0): 1.0})
    with pytest.raises(ValueError):
        SymmetricSeries(2, 2, {(0, 2): 1.0})


def test_base_space_validation():
    with pytest.raises(ValueError):
        BaseSpace(np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        BaseSpace(np.array([]))


def test_series_arithmetic(rng):
    F, G = rand(rng, 2, 3), rand(rng, 2, 2)
    H = F + G
    assert H.n_max == 2
    assert H[(0, 1)] == F[(0, 1)] + G[(0, 1)]
    assert (F - F).keys() == []
    assert (2.0 * F)[(1, 1, 1)] == 2.0 * F[(1, 1, 1)]
    with pytest.raises(TypeError):
        F * G


def test_json_round_trip(rng):
    F = rand(rng, 3, 4)
    doc = json.loads(json.dumps(F.to_json()))
    G = SymmetricSeries.from_json(doc)
    assert G.items() == F.items() and G.n_max == F.n_max and G.m == F.m


def test_json_rejects_unsorted():
    with pytest.raises(ValueError):
        SymmetricSeries.from_json({"m": 2, "n_max": 2, "entries": [{"idx": [1, 0], "val": 1.0}]})


# ---------------------------------------------------------------- integrals


def test_guichardet_integral_examples():
    B = BaseSpace.uniform(1)
    assert guichardet_integral(SymmetricSeries(1, 0, {(): 2.5}), B) == 2.5
    F = SymmetricSeries.from_function(1, 3, lambda X: 1.0)
    assert guichardet_integral(F, B) == pytest.approx(1 + 1 + 1 / 2 + 1 / 6, abs=1e-15)


def test_integral_of_exponential_vector(rng):
    B = random_base(rng, 3)
    f = rng.uniform(-0.5, 0.5, 3)
    F = exponential_vector(f, 25)
    assert abs(guichardet_integral(F, B) - math.exp(np.dot(B.weights, f))) < 1e-13


@pytest.mark.parametrize("m,n", [(1, 5), (2, 4), (3, 4)])
def test_integral_and_eval_match_tuple_loops(rng, m, n):
    B = random_base(rng, m)
    for _ in range(5):
        F = rand(rng, m, n)
        j = rng.uniform(-1, 1, m)
        assert abs(guichardet_integral(F, B) - oracle.naive_integral(F, B)) < TOL
        assert abs(eval_generating(F, j, B) - oracle.naive_eval(F, j, B)) < TOL


def test_eval_generating_examples(rng):
    B = random_base(rng, 2)
    F = rand(rng, 2, 3, const=0.7)
    assert eval_generating(F, np.zeros(2), B) == 0.7
    f, j = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
    s = float(np.dot(B.weights * f, j))
    want = sum(s**n / math.factorial(n) for n in range(6))
    assert abs(eval_generating(exponential_vector(f, 5), j, B) - want) < TOL


def test_exponential_vector_examples():
    assert exponential_vector(np.zeros(2), 3).items() == [((), 1.0)]
    E = exponential_vector(np.array([0.5, 0.0]), 4)
    assert E[(0, 0, 0)] == 0.125 and E[(0, 1)] == 0.0


def test_pairing_is_integral_of_product(rng):
    B = random_base(rng, 2)
    F, G = rand(rng, 2, 3), rand(rng, 2, 4)
    want = oracle.naive_integral(SymmetricSeries(2, 3, {k: F[k] * G[k] for k in F.keys()}), B)
    assert abs(pairing(F, G, B) - want) < TOL


# ----------------------------------------------------------------- Wick


@pytest.mark.parametrize("m,n", [(1, 6), (2, 4), (3, 3)])
def test_wick_matches_position_subset_oracle(rng, m, n):
    F, G = rand(rng, m, n), rand(rng, m, n)
    assert wick_product(F, G).max_abs_diff(oracle.naive_wick(F, G)) < TOL


def test_wick_algebra(rng):
    for _ in range(10):
        F, G, H = rand(rng, 2, 4), rand(rng, 2, 4), rand(rng, 2, 4)
        assert wick_product(F, G).max_abs_diff(wick_product(G, F)) < TOL
        lhs = wick_product(wick_product(F, G), H)
        rhs = wick_product(F, wick_product(G, H))
        assert lhs.max_abs_diff(rhs) < TOL
        assert wick_product(F, SymmetricSeries.unit(2, 4)).max_abs_diff(F) == 0.0
        assert wick_product(F, G).const == F.const * G.const


def test_wick_truncates_to_min_order(rng):
    assert wick_product(rand(rng, 2, 2), rand(rng, 2, 5)).n_max == 2


def test_exponential_vectors_multiply(rng):
    f, g = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
    lhs = wick_product(exponential_vector(f, 4), exponential_vector(g, 4))
    assert lhs.max_abs_diff(exponential_vector(f + g, 4)) < TOL


def test_z_homomorphism_exact_on_polynomials(rng):
    # truncation-consistent: F, G supported on orders a, b with a + b <= n_max
    B = random_base(rng, 2)
    for _ in range(20):
        F = SymmetricSeries(2, 6, {k: v for k, v in rand(rng, 2, 3).items()})
        G = SymmetricSeries(2, 6, {k: v for k, v in rand(rng, 2, 3).items()})
        j = rng.uniform(-1, 1, 2)
        lhs = eval_generating(wick_product(F, G), j, B)
        assert abs(lhs - eval_generating(F, j, B) * eval_generating(G, j, B)) < TOL


def test_wick_power(rng):
    F = rand(rng, 2, 3)
    assert wick_power(F, 0).items() == [((), 1.0)]
    assert wick_power(F, 2).max_abs_diff(wick_product(F, F)) == 0.0
    # rank one without constant term: (f)^{<>n}_X = n! f^X on |X| = n
    f = rng.uniform(-1, 1, 2)
    R = SymmetricSeries(2, 4, {(0,): f[0], (1,): f[1]})
    P = wick_power(R, 3)
    for X in mi.indices_upto(2, 4):
        want = math.factorial(3) * math.prod(f[list(X)]) if len(X) == 3 else 0.0
        assert abs(P[X] - want) < TOL


# ------------------------------------------------------------ derivatives


def test_derivative_examples(rng):
    B = random_base(rng, 2)
    F = rand(rng, 2, 4)
    assert eval_generating(derivative(F, 1), np.zeros(2), B) == F[(1,)]
    f = rng.uniform(-1, 1, 2)
    E = exponential_vector(f, 4)
    assert derivative(E, 0).max_abs_diff(f[0] * E.truncate(3)) < TOL
    assert derivative(SymmetricSeries(2, 0, {(): 1.0}), 0).n_max == -1
    with pytest.raises(ValueError):
        derivative(F, 2)


def test_derivative_is_weighted_gradient(rng):
    # d/dj_x Z_F(j) = w_x Z_{b_x F}(j); checked by central differences
    B = random_base(rng, 2)
    F = rand(rng, 2, 5)
    j = rng.uniform(-0.5, 0.5, 2)
    h = 1e-5
    for x in range(2):
        e = np.zeros(2)
        e[x] = h
        fd = (eval_generating(F, j + e, B) - eval_generating(F, j - e, B)) / (2 * h)
        assert abs(fd - B.weights[x] * eval_generating(derivative(F, x), j, B)) < 1e-7


def test_leibniz_and_commuting(rng):
    for _ in range(10):
        F, G = rand(rng, 3, 4), rand(rng, 3, 4)
        x, y = rng.integers(0, 3, 2)
        lhs = derivative(wick_product(F, G), x)
        rhs = wick_product(derivative(F, x), G.truncate(3)) + wick_product(F.truncate(3), derivative(G, x))
        assert lhs.max_abs_diff(rhs) < TOL
        assert derivative(derivative(F, x), y).max_abs_diff(derivative(derivative(F, y), x)) == 0.0


# ---------------------------------------------------------- composition


def test_compose_identity_and_exp(rng):
    F = rand(rng, 2, 4, const=0.0)
    assert compose([0.5, 1.0], F).max_abs_diff(F + 0.5) < TOL
    f = rng.uniform(-1, 1, 2)
    R = SymmetricSeries(2, 5, {(0,): f[0], (1,): f[1]})
    assert compose(lambda n: 1.0, R).max_abs_diff(exponential_vector(f, 5)) < TOL


def test_compose_needs_explicit_terms_with_constant(rng):
    F = rand(rng, 2, 3, const=0.4)
    with pytest.raises(TruncationError):
        compose(lambda n: 1.0, F)
    H = compose(lambda n: 1.0, F, terms=40)
    assert abs(H.const - math.exp(0.4)) < TOL


def test_chain_rule_partition_sum(rng):
    # H_X = sum over partitions of the positions of X of h^(N)(F_empty) prod F(blocks)
    c = 0.3
    F = rand(rng, 2, 4, const=c)
    H = compose(lambda n: math.exp(c), F - c).truncate(4)
    H2 = compose(lambda n: 1.0, F, terms=60)
    for X in mi.indices_upto(2, 4):
        want = math.fsum(
            math.exp(c) * math.prod(F[tuple(X[i] for i in b)] for b in p.blocks)
            for p in enumerate_partitions(len(X))
        )
        assert abs(H[X] - want) < TOL
        assert abs(H2[X] - want) < 1e-11


def test_exp_series_examples(rng):
    K = rand(rng, 3, 4, const=0.0)
    G = exp_series(K)
    assert G.const == 1.0 and G[(2,)] == K[(2,)]
    assert abs(G[(0, 1)] - (K[(0, 1)] + K[(0,)] * K[(1,)])) < TOL
    assert G.max_abs_diff(compose(lambda n: 1.0, K)) < TOL
    assert exp_series(SymmetricSeries.zero(2, 3)).items() == [((), 1.0)]
    with pytest.raises(ValueError):
        exp_series(rand(rng, 2, 2, const=0.1))


def test_log_exp_round_trip(rng):
    for _ in range(10):
        K = rand(rng, 2, 5, const=0.0)
        assert log_series(exp_series(K)).max_abs_diff(K) < 1e-13
        G = rand(rng, 2, 5, const=1.0)
        assert exp_series(log_series(G)).max_abs_diff(G) < 1e-12


def test_log_normalizes_constant(rng):
    G = rand(rng, 2, 3, const=2.5)
    K = log_series(G)
    assert abs(K.const - math.log(2.5)) < TOL
    assert (K - K.const).max_abs_diff(log_series((1 / 2.5) * G)) < TOL
    with pytest.raises(ValueError):
        log_series(rand(rng, 2, 3, const=-1.0))


def _scalar_coeffs(F):
    return np.array([F[(0,) * n] / math.factorial(n) for n in range(F.n_max + 1)])


@pytest.mark.parametrize("N", range(1, 9))
def test_transforms_match_scalar_series_oracle(rng, N):
    # m = 1, w = 1: Z_F(t) = sum F_n t^n / n!, so multi-index transforms are scalar ones
    G = rand(rng, 1, N, const=1.0)
    a = _scalar_coeffs(G)
    assert np.max(np.abs(_scalar_coeffs(log_series(G)) - oracle.scalar_log(a))) < TOL
    assert np.max(np.abs(_scalar_coeffs(inverse_series(G)) - oracle.scalar_inverse(a))) < TOL
    K = rand(rng, 1, N, const=0.0)
    assert np.max(np.abs(_scalar_coeffs(exp_series(K)) - oracle.scalar_exp(_scalar_coeffs(K)))) < TOL
    h = rng.uniform(-1, 1, N + 1)
    hn = [h[n] * math.factorial(n) for n in range(N + 1)]
    want = oracle.scalar_compose(h, _scalar_coeffs(K))
    assert np.max(np.abs(_scalar_coeffs(compose(hn, K)) - want)) < TOL


def test_log_partition_weights_are_alternating_factorials():
    # G = 1 + x at one point: K_n = d^n/dt^n ln(1 + t) = (-1)^(n-1) (n-1)!
    G = SymmetricSeries(1, 8, {(): 1.0, (0,): 1.0})
    K = log_series(G)
    for n in range(1, 9):
        assert K[(0,) * n] == (-1) ** (n - 1) * math.factorial(n - 1)
        # the sign pattern (-1)^n (n-1)! is the wrong one
        assert K[(0,) * n] != (-1) ** n * math.factorial(n - 1)


def test_inverse_weights():
    # 1/(1 + t): n-th derivative (-1)^n n!, not (-1)^(n+1) n!
    G = SymmetricSeries(1, 6, {(): 1.0, (0,): 1.0})
    F = inverse_series(G)
    for n in range(7):
        assert F[(0,) * n] == (-1) ** n * math.factorial(n)


def test_inverse_defining_property(rng):
    assert inverse_series(SymmetricSeries.unit(2, 3)).items() == [((), 1.0)]
    for _ in range(5):
        G = rand(rng, 2, 4, const=rng.uniform(0.5, 2.0))
        assert wick_product(inverse_series(G), G).max_abs_diff(SymmetricSeries.unit(2, 4)) < TOL
    with pytest.raises(ValueError):
        inverse_series(rand(rng, 2, 2, const=0.0))


def test_log_directional_oracle(rng):
    B = random_base(rng, 3)
    G = rand(rng, 3, 5, const=1.0)
    K = log_series(G)
    for _ in range(5):
        j = rng.uniform(-1, 1, 3)
        a = oracle.directional_coefficients(G, j, B)
        assert np.max(np.abs(oracle.directional_coefficients(K, j, B) - oracle.scalar_log(a))) < TOL


# ------------------------------------------------------------ sum-integral


@pytest.mark.parametrize("p", [2, 3])
def test_sum_integral_lemma(rng, p):
    B = random_base(rng, 2)
    table = {}

    def func(*Xs):
        key = tuple(mi.canonical(X) for X in Xs)
        if key not in table:
            table[key] = rng.uniform(-1, 1)
        return table[key]

    n_max = 4 if p == 2 else 3
    lhs = sum_integral(func, p, B, n_max)
    rhs = decomposition_integral(func, p, B, n_max)
    assert abs(lhs - rhs) < TOL


# -------------------------------------------------------------- property


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    m=st.integers(1, 3),
    n=st.integers(0, 4),
)
def test_wick_and_eval_property(seed, m, n):
    rng = np.random.default_rng(seed)
    B = random_base(rng, m)
    F, G = rand(rng, m, n), rand(rng, m, n)
    assert wick_product(F, G).max_abs_diff(oracle.naive_wick(F, G)) < TOL
    j = rng.uniform(-1, 1, m)
    assert abs(eval_generating(F, j, B) - oracle.naive_eval(F, j, B)) < TOL
