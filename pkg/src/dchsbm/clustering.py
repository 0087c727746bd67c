"""Spectral clustering of normalised rows: k-means, pair thresholding,
and the permutation-minimised misclustering count."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .seeding import stream

KMEANS = "KMEANS"
THRESHOLD = "THRESHOLD"
DEGENERATE = "DEGENERATE"
ZERO_ROWS = "ZERO_ROWS"
# above this n the pair list is never materialised; the MST path is used instead
PAIR_SORT_MAX_N = 8192
EXHAUSTIVE_MAX_K = 8


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    labels: np.ndarray
    algorithm: str
    objective: float
    flags: frozenset = frozenset()
    zero_rows: frozenset = frozenset()
    extra: dict = field(default_factory=dict)


def canonical_labels(labels) -> np.ndarray:
    """Relabel so clusters are numbered by their smallest member."""
    labels = np.asarray(labels)
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(len(first), dtype=np.int64)
    remap[order] = np.arange(len(first))
    return remap[np.unique(labels, return_inverse=True)[1]]


# --------------------------------------------------------------------------
# k-means


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(X, K, rng):
    n = len(X)
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers[k] = X[idx]
        d2 = np.minimum(d2, ((X - centers[k]) ** 2).sum(axis=1))
    return centers


def _lloyd(X, centers, max_iter):
    labels = None
    cost = np.inf
    for _ in range(max_iter):
        D = _sq_dists(X, centers)
        new_labels = np.argmin(D, axis=1)
        new_cost = float(D[np.arange(len(X)), new_labels].sum())
        # assignment and centroid steps can only lower the cost
        assert new_cost <= cost + 1e-9 * (1.0 + abs(cost)), "k-means cost increased"
        cost = new_cost
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(len(centers)):
            members = labels == k
            if members.any():
                centers[k] = X[members].mean(axis=0)
    return labels, cost, centers


def kmeans_rows(Ustar, K: int, restarts: int = 20, seed: int = 0, zero_rows=None,
                max_iter: int = 300) -> ClusteringResult:
    """Best-of-restarts Lloyd iterations with k-means++ seeding.

    ``zero_rows`` (the embedding's flagged rows) are excluded from fitting and
    then attached to the nearest final center; they are flagged.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    X = np.asarray(Ustar, dtype=float)
    n = len(X)
    zero = np.zeros(n, dtype=bool)
    if zero_rows:
        zero[sorted(zero_rows)] = True
    flags = set()
    if zero.any():
        flags.add(ZERO_ROWS)
    fit = X[~zero]
    if len(fit) == 0:
        return ClusteringResult(np.zeros(n, dtype=np.int64), KMEANS, 0.0, frozenset(flags | {DEGENERATE}),
                                frozenset(np.flatnonzero(zero).tolist()))
    if len(np.unique(fit, axis=0)) < K:
        flags.add(DEGENERATE)

    best = None
    for r in range(restarts):
        rng = stream(seed, "kmeans", r)
        centers = _kmeans_pp(fit, K, rng)
        labels, cost, centers = _lloyd(fit, centers, max_iter)
        if best is None or cost < best[0]:
            best = (cost, r, labels, centers)
    cost, _, fit_labels, centers = best

    labels = np.empty(n, dtype=np.int64)
    labels[~zero] = fit_labels
    if zero.any():
        labels[zero] = np.argmin(_sq_dists(X[zero], centers), axis=1)
    if len(np.unique(labels)) < K:
        flags.add(DEGENERATE)
    return ClusteringResult(canonical_labels(labels), KMEANS, float(cost), frozenset(flags),
                            frozenset(np.flatnonzero(zero).tolist()), {"restart": best[1]})


# --------------------------------------------------------------------------
# thresholding


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.components = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.components -= 1
        return True

    def labels(self) -> np.ndarray:
        return canonical_labels([self.find(i) for i in range(len(self.parent))])


def _row_distances(X, i):
    return np.sqrt(((X[i + 1:] - X[i]) ** 2).sum(axis=1))


def _sorted_pairs(X, chunk: int = 1 << 16):
    """Yield all pairs i < j as (dist, i, j) in (dist, i, j) order.

    Only the distance vector and its sort order are materialised; the flat
    pair index is decoded back to (i, j) chunk by chunk.
    """
    n = len(X)
    if n < 2:
        return
    d = np.concatenate([_row_distances(X, i) for i in range(n - 1)])
    # pairs are laid out in (i, j) order, so a stable sort on distance gives (dist, i, j)
    order = np.argsort(d, kind="stable")
    starts = np.concatenate([[0], np.cumsum(np.arange(n - 1, 0, -1))])
    for lo in range(0, len(order), chunk):
        k = order[lo: lo + chunk]
        i = np.searchsorted(starts, k, side="right") - 1
        j = k - starts[i] + i + 1
        yield from zip(d[k].tolist(), i.tolist(), j.tolist())


def _mst_prim(X):
    """Minimum spanning tree of the complete Euclidean graph, O(n) memory.

    Edges compare by (dist, min(i, j), max(i, j)), a strict total order, so the
    tree is the one Kruskal would build on the sorted pair list.
    """
    n = len(X)
    in_tree = np.zeros(n, dtype=bool)
    best_d = np.full(n, np.inf)
    best_lo = np.full(n, n, dtype=np.int64)
    best_hi = np.full(n, n, dtype=np.int64)
    best_from = np.full(n, -1, dtype=np.int64)
    edges = []
    u = 0
    for _ in range(n - 1):
        in_tree[u] = True
        d = np.sqrt(((X - X[u]) ** 2).sum(axis=1))
        idx = np.arange(n)
        lo = np.minimum(idx, u)
        hi = np.maximum(idx, u)
        better = (d < best_d) | ((d == best_d) & ((lo < best_lo) | ((lo == best_lo) & (hi < best_hi))))
        better &= ~in_tree
        best_d[better] = d[better]
        best_lo[better] = lo[better]
        best_hi[better] = hi[better]
        best_from[better] = u
        cand = np.flatnonzero(~in_tree)
        order = np.lexsort((best_hi[cand], best_lo[cand], best_d[cand]))
        v = int(cand[order[0]])
        edges.append((float(best_d[v]), int(best_lo[v]), int(best_hi[v])))
        u = v
    edges.sort()
    return edges


def threshold_cluster(Ustar, K: int, pair_limit: int = PAIR_SORT_MAX_N) -> ClusteringResult:
    """Add node pairs in ascending distance order until exactly K components remain.

    Ties are broken by (i, j).  Components are numbered by their smallest node.
    ``objective`` is the distance of the last merging pair (0 when K = n).
    """
    X = np.asarray(Ustar, dtype=float)
    n = len(X)
    if not 1 <= K <= n:
        raise ValueError(f"K={K} outside [1, n={n}]")
    uf = UnionFind(n)
    last = 0.0
    if uf.components > K:
        if n <= pair_limit:
            for dist, i, j in _sorted_pairs(X):
                if uf.union(i, j):
                    last = dist
                    if uf.components == K:
                        break
        else:
            for dist, i, j in _mst_prim(X)[: n - K]:
                uf.union(i, j)
                last = dist
    return ClusteringResult(uf.labels(), THRESHOLD, float(last))


# --------------------------------------------------------------------------
# misclustering


def confusion_matrix(g, g_prime, K: int) -> np.ndarray:
    g = np.asarray(g, dtype=np.int64)
    gp = np.asarray(g_prime, dtype=np.int64)
    if g.shape != gp.shape:
        raise ValueError("label vectors differ in length")
    C = np.zeros((K, K), dtype=np.int64)
    np.add.at(C, (g, gp), 1)
    return C


def misclustering(g, g_prime, K: int, method: str = "auto") -> int:
    """min over label permutations sigma of #{i : g_i != sigma(g'_i)}."""
    C = confusion_matrix(g, g_prime, K)
    n = int(C.sum())
    if method == "auto":
        method = "exhaustive" if K <= EXHAUSTIVE_MAX_K else "hungarian"
    if method == "exhaustive":
        perms = np.array(list(itertools.permutations(range(K))))
        # perms[p, b] = sigma(b); matched = sum_b C[sigma(b), b]
        matched = C[perms, np.arange(K)].sum(axis=1).max()
    elif method == "hungarian":
        rows, cols = linear_sum_assignment(C, maximize=True)
        matched = C[rows, cols].sum()
    else:
        raise ValueError(f"unknown method {method!r}")
    return n - int(matched)
