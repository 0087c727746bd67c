import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dchsbm.clustering import (
    DEGENERATE,
    KMEANS,
    THRESHOLD,
    ZERO_ROWS,
    UnionFind,
    _mst_prim,
    canonical_labels,
    confusion_matrix,
    kmeans_rows,
    misclustering,
    threshold_cluster,
)
from dchsbm.diagnostics import RECOVERY_GATE
from dchsbm.projection import population_matrix
from dchsbm.spectral import dense_eigenpairs
from fixtures import random_params
from oracles import brute_misclustering, kmeans_cost, optimal_kmeans, single_linkage_components


def same_partition(a, b):
    return np.array_equal(canonical_labels(a), canonical_labels(b))


def noiseless_rows(params):
    return dense_eigenpairs(population_matrix(params).P, params.K).Ustar


# ---- k-means -----------------------------------------------------------


def test_kmeans_noiseless_rows():
    params = random_params(1, 30, 3, 3)
    res = kmeans_rows(noiseless_rows(params), 3, restarts=5, seed=2)
    assert res.algorithm == KMEANS
    assert misclustering(params.g, res.labels, 3) == 0
    assert res.objective == pytest.approx(0.0, abs=1e-20)
    assert not res.flags


def test_kmeans_one_dimensional():
    res = kmeans_rows(np.array([[0.0], [0], [0], [10], [10], [10]]), 2, restarts=3)
    assert res.labels.tolist() == [0, 0, 0, 1, 1, 1]
    assert res.objective == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_kmeans_matches_exhaustive_optimum(seed):
    rng = np.random.default_rng(seed)
    K = 2 + seed % 2
    n = 9 if K == 3 else 12
    centers = np.eye(K)
    truth = np.arange(n) % K
    # min center separation is sqrt(2); perturbation norm kept below sqrt(2)/4
    noise = rng.standard_normal((n, K))
    noise *= (rng.uniform(0, 0.99, n) * math.sqrt(2) / 4 / np.linalg.norm(noise, axis=1))[:, None]
    X = centers[truth] + noise
    best_cost, best = optimal_kmeans(X, K)
    assert same_partition(best, truth)
    res = kmeans_rows(X, K, restarts=10, seed=seed)
    assert same_partition(res.labels, truth)
    assert res.objective == pytest.approx(best_cost, rel=1e-10)
    assert kmeans_cost(X, res.labels) == pytest.approx(best_cost, rel=1e-10)


def test_kmeans_degenerate_flag():
    X = np.array([[1.0, 0.0]] * 4 + [[0.0, 1.0]] * 4)
    res = kmeans_rows(X, 3, restarts=2)
    assert DEGENERATE in res.flags
    assert set(res.labels.tolist()) <= {0, 1, 2}


def test_kmeans_zero_rows_assigned_and_flagged():
    X = np.array([[1.0, 0], [1, 0], [0, 1], [0, 1], [0, 0]])
    res = kmeans_rows(X, 2, restarts=2, zero_rows=frozenset({4}))
    assert ZERO_ROWS in res.flags
    assert res.zero_rows == frozenset({4})
    assert res.labels[:4].tolist() == [0, 0, 1, 1]
    assert res.labels[4] in (0, 1)


def test_kmeans_deterministic_and_restart_validation():
    X = np.random.default_rng(0).standard_normal((40, 3))
    a, b = kmeans_rows(X, 3, seed=5), kmeans_rows(X, 3, seed=5)
    assert a.labels.tolist() == b.labels.tolist() and a.objective == b.objective
    with pytest.raises(ValueError):
        kmeans_rows(X, 3, restarts=0)


# ---- thresholding ------------------------------------------------------


def test_threshold_two_tight_clusters():
    rng = np.random.default_rng(0)
    X = np.vstack([np.array([1.0, 0]) + 1e-6 * rng.standard_normal((5, 2)),
                   np.array([0.0, 1]) + 1e-6 * rng.standard_normal((5, 2))])
    res = threshold_cluster(X, 2)
    assert res.algorithm == THRESHOLD
    assert res.labels.tolist() == [0] * 5 + [1] * 5
    assert res.objective < 1e-5


def test_threshold_K_equals_n():
    X = np.random.default_rng(1).standard_normal((6, 2))
    res = threshold_cluster(X, 6)
    assert res.labels.tolist() == list(range(6))
    assert res.objective == 0.0


def test_threshold_noiseless_three_blocks():
    params = random_params(4, 24, 3, 3)
    res = threshold_cluster(noiseless_rows(params), 3)
    assert misclustering(params.g, res.labels, 3) == 0


@pytest.mark.parametrize("seed", range(20))
def test_threshold_is_single_linkage_cut(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 51))
    K = int(rng.integers(1, min(n, 6) + 1))
    X = rng.standard_normal((n, 3))
    res = threshold_cluster(X, K)
    assert np.array_equal(res.labels, single_linkage_components(X, K))
    # forcing the streaming MST path gives the same answer
    assert np.array_equal(threshold_cluster(X, K, pair_limit=0).labels, res.labels)


def test_mst_weight_matches_networkx():
    import networkx as nx

    X = np.random.default_rng(5).standard_normal((30, 2))
    G = nx.complete_graph(30)
    for i, j in G.edges:
        G[i][j]["weight"] = float(np.linalg.norm(X[i] - X[j]))
    ref = nx.minimum_spanning_tree(G).size(weight="weight")
    assert sum(d for d, _, _ in _mst_prim(X)) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 40), K=st.integers(1, 5))
def test_threshold_relabel_invariance(seed, n, K):
    K = min(K, n)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    perm = rng.permutation(n)
    base = threshold_cluster(X, K).labels
    moved = threshold_cluster(X[perm], K).labels
    assert same_partition(moved, base[perm])


def test_threshold_rejects_bad_K():
    with pytest.raises(ValueError):
        threshold_cluster(np.zeros((3, 2)), 4)


@pytest.mark.parametrize("seed", range(30))
def test_gate_ball_implies_exact_recovery(seed):
    """Rows within 1/(2 sqrt 2) of the normalised population rows are always separable."""
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 6))
    n = int(rng.integers(K * 3, 80))
    params = random_params(seed, n, K, 3)
    Ustar = noiseless_rows(params)
    delta = rng.standard_normal((n, K))
    radius = RECOVERY_GATE * rng.uniform(0, 0.999, n) ** (1 / K)
    delta *= (radius / np.linalg.norm(delta, axis=1))[:, None]
    O = np.linalg.qr(rng.standard_normal((K, K)))[0]
    Uhat_star = (Ustar + delta) @ O.T  # so that Uhat_star @ O - Ustar = delta
    assert np.max(np.linalg.norm(Uhat_star @ O - Ustar, axis=1)) < RECOVERY_GATE
    res = threshold_cluster(Uhat_star, K)
    assert misclustering(params.g, res.labels, K) == 0


# ---- misclustering -----------------------------------------------------


def test_misclustering_examples():
    assert misclustering([0, 0, 1, 1], [0, 0, 1, 1], 2) == 0
    assert misclustering([0, 0, 1, 1], [1, 1, 0, 0], 2) == 0
    assert misclustering([0, 0, 1, 1], [0, 1, 1, 1], 2) == 1


@settings(max_examples=100, deadline=None)
@given(data=st.data(), K=st.integers(1, 6), n=st.integers(1, 40))
def test_misclustering_properties(data, K, n):
    g = np.array(data.draw(st.lists(st.integers(0, K - 1), min_size=n, max_size=n)))
    gp = np.array(data.draw(st.lists(st.integers(0, K - 1), min_size=n, max_size=n)))
    sigma = np.array(data.draw(st.permutations(range(K))))
    base = misclustering(g, gp, K)
    assert base == brute_misclustering(g, gp, K)
    assert misclustering(g, sigma[gp], K) == base
    assert misclustering(g, gp, K, method="hungarian") == misclustering(g, gp, K, method="exhaustive")
    assert 0 <= base <= n


def test_misclustering_large_K_uses_hungarian():
    rng = np.random.default_rng(0)
    g = rng.integers(0, 12, 200)
    sigma = rng.permutation(12)
    gp = sigma[g]
    gp[:7] = (gp[:7] + 1) % 12
    assert misclustering(g, gp, 12) == 7
    with pytest.raises(ValueError):
        misclustering(g, gp, 12, method="bogus")


def test_confusion_matrix():
    C = confusion_matrix([0, 0, 1, 1], [0, 1, 1, 1], 2)
    assert C.tolist() == [[1, 1], [0, 2]]


def test_union_find_and_canonical_labels():
    uf = UnionFind(5)
    assert uf.union(3, 4) and uf.union(1, 3) and not uf.union(4, 1)
    assert uf.components == 3
    assert uf.labels().tolist() == [0, 1, 2, 1, 1]
    assert canonical_labels([5, 5, 2, 7, 2]).tolist() == [0, 0, 1, 2, 1]
