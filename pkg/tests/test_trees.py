import math

import numpy as np
import pytest

from conftest import random_base, random_correlation, random_spd
from fieldcalc import multiindex as mi
from fieldcalc import oracle
from fieldcalc.combinatorics import Hierarchy, SizeLimitError, count_hierarchies, enumerate_hierarchies
from fieldcalc.gaussian import Metric
from fieldcalc.perturbation import Interaction, ModelSpec
from fieldcalc.series import BaseSpace, SymmetricSeries
from fieldcalc.trees import (
    ConvergenceError,
    hierarchy_weight,
    lower_source,
    picard_solve,
    stationary_log_z,
    tree_expand,
    tree_term,
    weighted_hierarchies,
)


def cubic_model(rng, m, lam=0.05):
    B = random_base(rng, m)
    g = random_correlation(rng, m)
    V = SymmetricSeries(m, 3, {X: rng.uniform(-1, 1) for X in mi.indices(m, 3)})
    return ModelSpec(B, Metric.from_matrix(g, B), Interaction(V, lam), 1, 2)


def free_model(rng, m):
    B = random_base(rng, m)
    return ModelSpec(B, Metric.from_matrix(random_spd(rng, m), B), Interaction(SymmetricSeries(m, 1)), 1, 2)


def test_lower_source(rng):
    B = BaseSpace.uniform(3)
    j = rng.uniform(-1, 1, 3)
    assert np.array_equal(lower_source(Metric.from_matrix(np.eye(3), B), j), j)
    model = free_model(rng, 3)
    assert np.array_equal(lower_source(model.metric, np.zeros(3)), np.zeros(3))
    want = np.array([sum(model.base.weights[y] * model.metric.g[x, y] * j[y] for y in range(3)) for x in range(3)])
    assert np.allclose(lower_source(model.metric, j), want, rtol=0, atol=1e-15)


def test_picard_trivial_cases(rng):
    model = free_model(rng, 2)
    j = rng.uniform(-1, 1, 2)
    psi, hist = picard_solve(model, j)
    assert np.array_equal(psi, lower_source(model.metric, j)) and len(hist) == 1
    psi, _ = picard_solve(cubic_model(rng, 2), np.zeros(2))
    assert np.array_equal(psi, np.zeros(2))


@pytest.mark.parametrize("j", [-1.0, 0.3, 2.0])
def test_picard_scalar_cubic_closed_form(j):
    # psi = j + (lam v / 2) psi^2 on one point with w = g = 1
    lam, v = 0.05, 1.5
    B = BaseSpace.uniform(1)
    V = SymmetricSeries(1, 3, {(0, 0, 0): v})
    model = ModelSpec(B, Metric.from_matrix([[1.0]], B), Interaction(V, lam), 1, 2)
    psi, _ = picard_solve(model, np.array([j]))
    want = (1 - math.sqrt(1 - 2 * lam * v * j)) / (lam * v)
    assert abs(psi[0] - want) < 1e-14


def test_picard_relaxes_on_oscillation():
    # linear force with slope -1.5: plain iteration oscillates and grows, the
    # relaxed update converges to psi = j / 2.5
    B = BaseSpace.uniform(1)
    V = SymmetricSeries(1, 2, {(0, 0): -1.5})
    model = ModelSpec(B, Metric.from_matrix([[1.0]], B), Interaction(V), 1, 2)
    psi, hist = picard_solve(model, np.array([1.0]))
    assert abs(psi[0] - 0.4) < 1e-14
    assert hist[1] > hist[0] and hist[2] > hist[1]


def test_picard_divergence_reported():
    B = BaseSpace.uniform(1)
    V = SymmetricSeries(1, 3, {(0, 0, 0): 1.0})
    model = ModelSpec(B, Metric.from_matrix([[1.0]], B), Interaction(V, 1.0), 1, 2)
    with pytest.raises(ConvergenceError) as exc:
        picard_solve(model, np.array([2.0]))
    assert exc.value.history


def test_picard_iteration_limit(rng):
    with pytest.raises(ConvergenceError, match="no convergence"):
        picard_solve(cubic_model(rng, 2), rng.uniform(-1, 1, 2), max_iter=2)


def test_single_leaf_is_lowered_source(rng):
    model = cubic_model(rng, 2)
    j = rng.uniform(-1, 1, 2)
    assert np.array_equal(tree_expand(model, j, 1), lower_source(model.metric, j))


@pytest.mark.parametrize("n", range(1, 6))
def test_hierarchy_term_count(rng, n):
    model = cubic_model(rng, 2)
    items = list(weighted_hierarchies(model, rng.uniform(-1, 1, 2), n))
    assert len(items) == model.m * count_hierarchies(n)
    assert all(np.isfinite(h.weight) and len(h.hierarchy.leaves()) == n for h in items)


def test_binary_vertex_kills_wider_nodes(rng):
    # a cubic vertex only feeds nodes with two children
    model = cubic_model(rng, 2)
    j = rng.uniform(-1, 1, 2)
    for H in enumerate_hierarchies(3):
        w = hierarchy_weight(model, H, j)
        if len(H.children) == 3:
            assert np.array_equal(w, np.zeros(2))


def test_tree_expansion_converges_to_fixed_point(rng):
    model = cubic_model(rng, 2)
    j = rng.uniform(-1, 1, 2)
    psi, _ = picard_solve(model, j)
    errs = [np.max(np.abs(tree_expand(model, j, k) - psi)) for k in range(1, 8)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    # the truncation error is the tail of the series, led by the next term
    for k in range(1, 7):
        nxt = np.max(np.abs(tree_term(model, j, k + 1)))
        assert 0.5 * nxt <= errs[k - 1] <= 2 * nxt


def test_stencil_error_is_the_predicted_leading_term():
    # the plain 5-point stencil misses c_3 by 5 h^2 c_5 (+ O(h^4)); the tree
    # expansion supplies c_5, so the whole discrepancy is accounted for
    rng = np.random.default_rng(11)
    model = cubic_model(rng, 2)
    j = rng.uniform(-1, 1, 2)
    h = 1e-2
    c = oracle.taylor_coefficients(lambda t: picard_solve(model, t * j)[0], h=h)
    pred = 5 * h**2 * tree_term(model, j, 5)
    assert np.max(np.abs(c[3] - tree_term(model, j, 3) - pred)) < 1e-10


@pytest.mark.parametrize("seed", range(8))
def test_order_by_order_against_picard(seed):
    # Richardson over h and 2h removes the h^2 stencil error on c_3, c_4
    rng = np.random.default_rng(100 + seed)
    model = cubic_model(rng, 1 + seed % 2)
    j = rng.uniform(-1, 1, model.m)

    def psi(t):
        return picard_solve(model, t * j)[0]

    a = oracle.taylor_coefficients(psi, h=1e-2)
    b = oracle.taylor_coefficients(psi, h=2e-2)
    for n in range(1, 5):
        c = (4 * a[n] - b[n]) / 3 if n >= 3 else a[n]
        assert np.max(np.abs(c - tree_term(model, j, n))) < 1e-8


def test_quartic_vertex_trees(rng):
    # mixed cubic + quartic vertex: ternary nodes contribute too
    B = random_base(rng, 2)
    V = SymmetricSeries(2, 4, {X: rng.uniform(-1, 1) for X in mi.indices_upto(2, 4) if len(X) >= 3})
    model = ModelSpec(B, Metric.from_matrix(random_correlation(rng, 2), B), Interaction(V, 0.05), 1, 2)
    j = rng.uniform(-1, 1, 2)
    psi, _ = picard_solve(model, j)
    errs = [np.max(np.abs(tree_expand(model, j, k) - psi)) for k in range(1, 8)]
    assert errs[-1] < 1e-4 * errs[0]
    assert any(np.any(hierarchy_weight(model, H, j)) for H in enumerate_hierarchies(3) if len(H.children) == 3)


def test_children_order_does_not_matter(rng):
    B = random_base(rng, 2)
    V = SymmetricSeries(2, 4, {X: rng.uniform(-1, 1) for X in mi.indices_upto(2, 4) if len(X) >= 3})
    model = ModelSpec(B, Metric.from_matrix(random_correlation(rng, 2), B), Interaction(V, 0.05), 1, 2)
    j = rng.uniform(-1, 1, 2)

    def flip(H):
        if H.is_leaf:
            return H
        return Hierarchy(children=tuple(flip(c) for c in reversed(H.children)))

    for H in enumerate_hierarchies(4):
        a = hierarchy_weight(model, H, j)
        b = hierarchy_weight(model, flip(H), j)
        assert np.max(np.abs(a - b)) < 1e-15


def test_zero_vertex_changes_nothing(rng):
    model = cubic_model(rng, 2)
    V = model.interaction.V
    V0 = SymmetricSeries(2, 4, {**dict(V.items()), (0, 0, 1, 1): 0.0})
    model0 = ModelSpec(model.base, model.metric, Interaction(V0, 0.05), 1, 2)
    j = rng.uniform(-1, 1, 2)
    assert np.array_equal(picard_solve(model, j)[0], picard_solve(model0, j)[0])
    assert np.array_equal(tree_expand(model, j, 4), tree_expand(model0, j, 4))


def test_tree_guard(rng):
    model = cubic_model(rng, 1)
    with pytest.raises(SizeLimitError):
        tree_expand(model, np.ones(1), 10)


def test_stationary_log_z_free(rng):
    model = free_model(rng, 3)
    assert stationary_log_z(model, np.zeros(3)).log_z == 0.0
    j = rng.uniform(-1, 1, 3)
    wj = model.base.weights * j
    sp = stationary_log_z(model, j)
    assert abs(sp.log_z - 0.5 * wj @ model.metric.g @ wj) < 1e-14


def test_stationary_log_z_residual_and_gradient(rng):
    # at the stationary point d logZ / dj_x = w_x psi_x
    for m in (1, 2):
        model = cubic_model(rng, m)
        j = rng.uniform(-1, 1, m)
        sp = stationary_log_z(model, j)
        assert sp.residual <= 1e-10
        h = 1e-5
        for x in range(m):
            e = np.zeros(m)
            e[x] = h
            fd = (stationary_log_z(model, j + e).log_z - stationary_log_z(model, j - e).log_z) / (2 * h)
            assert abs(fd - model.base.weights[x] * sp.psi[x]) < 1e-9
