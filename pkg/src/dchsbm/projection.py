"""Weighted clique-expansion adjacency and the population matrix P = E[A]."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .model import GeneralAffinity, Hypergraph, ModelParams

POPULATION_MAX_N = 5000
EXACT_MAX_N = 100


class SparseSymMatrix:
    """Symmetric sparse matrix stored by its upper triangle (i <= j).

    ``entries`` maps canonical (i, j) keys to weights; they may be Fractions
    when built through the exact path.  Float storage backs ``matvec``.
    """

    def __init__(self, n: int, entries: dict | None = None, *, upper: sp.spmatrix | None = None):
        self.n = int(n)
        self._entries = None
        if upper is not None:
            up = sp.triu(sp.csr_matrix(upper, shape=(n, n), dtype=float)).tocsr()
            up.sum_duplicates()
            up.eliminate_zeros()
            self._upper = up
        else:
            clean = {}
            for (i, j), w in (entries or {}).items():
                i, j = (i, j) if i <= j else (j, i)
                if not (0 <= i and j < self.n):
                    raise IndexError(f"entry ({i}, {j}) outside dimension {self.n}")
                clean[(int(i), int(j))] = clean.get((int(i), int(j)), 0) + w
            self._entries = {k: w for k, w in clean.items() if w != 0}
            if self._entries:
                ij = np.array(list(self._entries), dtype=np.int64)
                vals = np.array([float(w) for w in self._entries.values()])
                self._upper = sp.csr_matrix((vals, (ij[:, 0], ij[:, 1])), shape=(n, n))
            else:
                self._upper = sp.csr_matrix((n, n))
        diag = sp.diags(self._upper.diagonal())
        self._full = (self._upper + self._upper.T - diag).tocsr()
        self._full.sort_indices()

    @property
    def entries(self) -> dict:
        if self._entries is None:
            coo = self._upper.tocoo()
            order = np.lexsort((coo.col, coo.row))
            self._entries = {
                (int(coo.row[k]), int(coo.col[k])): float(coo.data[k]) for k in order
            }
        return self._entries

    @property
    def nnz(self) -> int:
        return self._upper.nnz

    @property
    def shape(self):
        return (self.n, self.n)

    @property
    def csr(self) -> sp.csr_matrix:
        """Full symmetric CSR matrix (float)."""
        return self._full

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self._full @ x

    def __matmul__(self, x):
        return self._full @ x

    def row(self, i: int) -> dict:
        lo, hi = self._full.indptr[i], self._full.indptr[i + 1]
        return dict(zip(self._full.indices[lo:hi].tolist(), self._full.data[lo:hi].tolist()))

    def rows(self):
        for i in range(self.n):
            yield i, self.row(i)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self._full.sum(axis=1)).ravel()

    def to_dense(self) -> np.ndarray:
        return self._full.toarray()

    def frobenius(self) -> float:
        return float(np.sqrt((self._full.data**2).sum()))

    def is_exact(self) -> bool:
        return self._entries is not None and any(isinstance(w, Fraction) for w in self._entries.values())


def _pair_positions(m: int):
    return list(itertools.combinations(range(m), 2))


def weighted_adjacency(H: Hypergraph, exact: bool = False) -> SparseSymMatrix:
    """Clique expansion with 1/(|e|-1) weights.

    Off-diagonal A_ij = sum_e a_ei a_ej / (|e|-1); diagonal
    A_ii = sum_e a_ei (a_ei - 1) / (|e|-1).  Each hyperedge contributes
    1/(|e|-1) per position pair holding two distinct nodes and 2/(|e|-1) per
    position pair holding the same node twice.  With ``exact=True`` the
    weights are Fractions (n <= 100).
    """
    if exact:
        if H.n > EXACT_MAX_N:
            raise ValueError(f"exact construction limited to n <= {EXACT_MAX_N}")
        acc: dict = {}
        for e in H.edges:
            w = Fraction(1, len(e) - 1)
            for s, t in _pair_positions(len(e)):
                u, v = e[s], e[t]
                acc[(u, v)] = acc.get((u, v), 0) + (2 * w if u == v else w)
        return SparseSymMatrix(H.n, acc)

    rows_i, cols_i, vals = [], [], []
    for m, E in H.by_size().items():
        for s, t in _pair_positions(m):
            u, v = E[:, s], E[:, t]
            rows_i.append(u)
            cols_i.append(v)
            vals.append(np.where(u == v, 2.0, 1.0) / (m - 1))
    if not vals:
        return SparseSymMatrix(H.n, upper=sp.csr_matrix((H.n, H.n)))
    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows_i), np.concatenate(cols_i))), shape=(H.n, H.n)
    )
    return SparseSymMatrix(H.n, upper=coo.tocsr())


def block_matrix(params: ModelParams) -> np.ndarray:
    """B_rs = sum_m m * sum_{k_3..k_m} (prod_l n_{k_l}) * Phi(r, s, k_3, ..., k_m)."""
    K = params.K
    sizes = params.sizes.astype(float)
    B = np.zeros((K, K))
    for m in range(2, params.M + 1):
        for r in range(K):
            for s in range(r, K):
                total = 0.0
                for rest in itertools.product(range(K), repeat=m - 2):
                    phi = params.affinity.value((r, s) + rest)
                    if phi:
                        total += float(np.prod(sizes[list(rest)])) * phi
                B[r, s] += m * total
    return np.triu(B) + np.triu(B, 1).T


@dataclass(frozen=True, eq=False)
class PopulationModel:
    P: np.ndarray
    B: np.ndarray
    Z: np.ndarray
    phi: np.ndarray
    theta_tilde: np.ndarray

    @property
    def n(self) -> int:
        return self.P.shape[0]


def population_matrix(params: ModelParams) -> PopulationModel:
    """Factored population matrix P = diag(theta) Z B Z^T diag(theta).

    Exact expectation of the adjacency when repeated nodes are allowed and
    the identifiability constraint holds.
    """
    if params.n > POPULATION_MAX_N:
        raise ValueError(f"dense population matrix limited to n <= {POPULATION_MAX_N}")
    B = block_matrix(params)
    g, theta = params.g, params.theta
    Z = np.zeros((params.n, params.K))
    Z[np.arange(params.n), g] = 1.0
    P = np.outer(theta, theta) * B[np.ix_(g, g)]
    phi = np.sqrt(np.bincount(g, weights=theta**2, minlength=params.K)[: params.K])
    return PopulationModel(P, B, Z, phi, theta / phi[g])


def dchppm_block_matrix(params: ModelParams) -> np.ndarray:
    """Closed form for DCHPPM: sum_m m alpha_m ((p-q) n_r^{m-2} delta_rs + q n^{m-2})."""
    aff = params.affinity
    if isinstance(aff, GeneralAffinity):
        raise TypeError("closed form needs a DCHPPM affinity")
    sizes = params.sizes.astype(float)
    n = float(params.n)
    B = np.zeros((params.K, params.K))
    for m in range(2, params.M + 1):
        a = aff.alpha_of(m)
        B += m * a * ((aff.p - aff.q) * np.diag(sizes ** (m - 2)) + aff.q * n ** (m - 2))
    return B
