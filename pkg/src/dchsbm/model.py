"""DCHSBM parameters, hyperedge probabilities and exact samplers.

Nodes and community labels are 0-based throughout the library; the text
formats in :mod:`dchsbm.io` convert to 1-based ids.  A hyperedge is a sorted
tuple of node ids in which a node may repeat.
"""
from __future__ import annotations

import heapq
import itertools
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidParameters
from .seeding import stream

IDENTIFIABILITY_RTOL = 1e-9
# rounding slack when comparing a probability against 1
PROB_SLACK = 1e-12
EXACT_ENUMERATION_LIMIT = 10**7


# --------------------------------------------------------------------------
# affinity functions


@dataclass(frozen=True)
class DCHPPM:
    """All-or-nothing affinity: ``alpha_m * ((p - q) * [all labels equal] + q)``."""

    p: float
    q: float
    alpha: Mapping[int, float]

    def __post_init__(self):
        object.__setattr__(self, "alpha", {int(m): float(a) for m, a in dict(self.alpha).items()})

    def alpha_of(self, m: int) -> float:
        return self.alpha.get(m, 0.0)

    def value(self, labels: Sequence[int]) -> float:
        m = len(labels)
        same = all(x == labels[0] for x in labels)
        return self.alpha_of(m) * ((self.p - self.q) * same + self.q)

    def values(self, label_rows: np.ndarray, K: int) -> np.ndarray:
        m = label_rows.shape[1]
        same = np.all(label_rows == label_rows[:, :1], axis=1)
        return self.alpha_of(m) * np.where(same, self.p, self.q)

    def max_value(self, m: int, K: int) -> float:
        if K == 1:
            return self.alpha_of(m) * self.p
        return self.alpha_of(m) * max(self.p, self.q)

    def scaled(self, factor: float) -> "DCHPPM":
        return DCHPPM(self.p, self.q, {m: a * factor for m, a in self.alpha.items()})


@dataclass(frozen=True)
class GeneralAffinity:
    """Affinity table keyed by the sorted label multiset of a hyperedge.

    Missing keys mean ``Phi = 0``.  Build from arbitrary (unsorted) keys with
    :meth:`from_mapping`, which rejects tables that are not symmetric.
    """

    table: Mapping[tuple, float]

    def __post_init__(self):
        clean = {}
        for key, val in dict(self.table).items():
            key = tuple(int(x) for x in key)
            if list(key) != sorted(key):
                raise InvalidParameters(f"affinity key {key} is not sorted; use from_mapping")
            if val < 0:
                raise InvalidParameters(f"negative affinity {val} for labels {key}")
            clean[key] = float(val)
        object.__setattr__(self, "table", clean)

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple, float]) -> "GeneralAffinity":
        table: dict[tuple, float] = {}
        for key, val in mapping.items():
            canon = tuple(sorted(int(x) for x in key))
            if canon in table and table[canon] != float(val):
                raise InvalidParameters(
                    f"asymmetric affinity: labels {canon} map to {table[canon]} and {val}"
                )
            table[canon] = float(val)
        return cls(table)

    @classmethod
    def from_function(cls, K: int, M: int, fn) -> "GeneralAffinity":
        """Tabulate ``fn(labels)`` over every sorted label multiset of size 2..M."""
        table = {}
        for m in range(2, M + 1):
            for key in itertools.combinations_with_replacement(range(K), m):
                table[key] = float(fn(key))
        return cls(table)

    def value(self, labels: Sequence[int]) -> float:
        return self.table.get(tuple(sorted(int(x) for x in labels)), 0.0)

    def values(self, label_rows: np.ndarray, K: int) -> np.ndarray:
        m = label_rows.shape[1]
        lookup = _affinity_lookup(self, m, K)
        rows = np.sort(label_rows, axis=1)
        code = np.zeros(len(rows), dtype=np.int64)
        for c in range(m):
            code = code * K + rows[:, c]
        return lookup[code]

    def max_value(self, m: int, K: int) -> float:
        vals = [v for key, v in self.table.items() if len(key) == m]
        return max(vals, default=0.0)


@lru_cache(maxsize=64)
def _affinity_lookup_cached(items: tuple, m: int, K: int) -> np.ndarray:
    lookup = np.zeros(K**m)
    for key, val in items:
        if len(key) != m or max(key) >= K:
            continue
        code = 0
        for x in key:
            code = code * K + x
        lookup[code] = val
    return lookup


def _affinity_lookup(aff: GeneralAffinity, m: int, K: int) -> np.ndarray:
    return _affinity_lookup_cached(tuple(sorted(aff.table.items())), m, K)


# --------------------------------------------------------------------------
# parameters and validation


@dataclass(frozen=True, eq=False)
class ModelParams:
    n: int
    K: int
    M: int
    g: np.ndarray
    theta: np.ndarray
    affinity: DCHPPM | GeneralAffinity
    include_repeats: bool = True

    def __post_init__(self):
        g = np.asarray(self.g, dtype=np.int64).copy()
        theta = np.asarray(self.theta, dtype=float).copy()
        g.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "theta", theta)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.g, minlength=self.K)[: self.K]

    def with_affinity(self, affinity) -> "ModelParams":
        return ModelParams(self.n, self.K, self.M, self.g, self.theta, affinity, self.include_repeats)


@dataclass
class ValidationReport:
    ok: bool
    violations: list[str]
    sizes: np.ndarray
    # permutation[old_label] = new_label; identity unless sizes were unsorted
    permutation: np.ndarray
    params: ModelParams | None = None
    max_probability: float = float("nan")

    def raise_if_invalid(self):
        if not self.ok:
            raise InvalidParameters("; ".join(self.violations))


def relabel(params: ModelParams, permutation: np.ndarray) -> ModelParams:
    perm = np.asarray(permutation)
    aff = params.affinity
    if isinstance(aff, GeneralAffinity):
        aff = GeneralAffinity.from_mapping({tuple(perm[list(k)]): v for k, v in aff.table.items()})
    return ModelParams(params.n, params.K, params.M, perm[params.g], params.theta, aff, params.include_repeats)


def validate(params: ModelParams) -> ValidationReport:
    """Check every model invariant; relabel communities so n_1 >= ... >= n_K.

    Never raises: violations are collected in the report.  ``report.params`` is
    the canonically relabelled parameter set when the structural checks pass.
    """
    bad = []
    n, K, M = params.n, params.K, params.M
    g, theta = params.g, params.theta
    if K < 1:
        bad.append(f"K={K} must be >= 1")
    if M < 2:
        bad.append(f"M={M} must be >= 2")
    if g.shape != (n,) or theta.shape != (n,):
        bad.append(f"labels/theta must have length n={n}")
        return ValidationReport(False, bad, np.zeros(max(K, 0), dtype=int), np.arange(max(K, 0)))
    if n and (g.min() < 0 or g.max() >= K):
        bad.append("labels outside [0, K)")
        return ValidationReport(False, bad, np.zeros(max(K, 0), dtype=int), np.arange(max(K, 0)))

    sizes = params.sizes
    if np.any(sizes == 0):
        bad.append(f"empty communities: {np.flatnonzero(sizes == 0).tolist()}")
    if not np.all(np.isfinite(theta)) or np.any(theta <= 0):
        bad.append("theta must be finite and > 0")
    sums = np.bincount(g, weights=theta, minlength=K)[:K]
    off = np.abs(sums - sizes) > IDENTIFIABILITY_RTOL * np.maximum(sizes, 1)
    if np.any(off):
        ks = np.flatnonzero(off)
        bad.append(
            "identifiability violated: sum of theta over community "
            + ", ".join(f"{k}: {sums[k]:.12g} != {sizes[k]}" for k in ks)
        )

    aff = params.affinity
    if isinstance(aff, DCHPPM):
        if not aff.p > aff.q > 0:
            bad.append(f"DCHPPM needs p > q > 0 (got p={aff.p}, q={aff.q})")
        if any(a < 0 for a in aff.alpha.values()):
            bad.append("DCHPPM alpha_m must be >= 0")
        extra = sorted(m for m in aff.alpha if not 2 <= m <= M)
        if extra:
            bad.append(f"alpha given for sizes outside [2, M]: {extra}")
    else:
        wrong = [k for k in aff.table if not 2 <= len(k) <= M or (k and max(k) >= K)]
        if wrong:
            bad.append(f"affinity keys outside sizes 2..M or labels 0..K-1: {wrong[:5]}")

    # stable sort: larger communities first, ties keep label order
    order = np.argsort(-sizes, kind="stable")
    perm = np.empty(K, dtype=np.int64)
    perm[order] = np.arange(K)
    canon = params if np.array_equal(perm, np.arange(K)) else relabel(params, perm)

    pmax = float("nan")
    if not bad:
        pmax = max_edge_probability(canon)
        if pmax > 1 + PROB_SLACK:
            bad.append(f"some hyperedge probability exceeds 1 (max {pmax:.6g})")
    return ValidationReport(not bad, bad, sizes[order], perm, canon if not bad else None, pmax)


def _best_weight(thetas_desc: np.ndarray, c: int, repeats: bool) -> float:
    """max of prod theta_i^a_i / a_i! over a with sum a = c (log-concave => greedy)."""
    if c == 0:
        return 1.0
    if not repeats:
        if c > len(thetas_desc):
            return 0.0
        return float(np.prod(thetas_desc[:c]))
    top = thetas_desc[:c]
    heap = [(-t, i) for i, t in enumerate(top)]
    heapq.heapify(heap)
    counts = [0] * len(top)
    val = 1.0
    for _ in range(c):
        gain, i = heapq.heappop(heap)
        val *= -gain
        counts[i] += 1
        heapq.heappush(heap, (-top[i] / (counts[i] + 1), i))
    return val


def max_edge_probability(params: ModelParams, m: int | None = None) -> float:
    """Exact maximum of b_e * pi(theta_e) * Phi(g_e) over all hyperedges (of size m)."""
    K = params.K
    by_comm = [np.sort(params.theta[params.g == k])[::-1] for k in range(K)]
    best = 0.0
    sizes = [m] if m is not None else range(2, params.M + 1)
    for mm in sizes:
        fact = math.factorial(mm)
        for key in itertools.combinations_with_replacement(range(K), mm):
            phi = params.affinity.value(key)
            if phi == 0:
                continue
            w = fact * phi
            for k, c in Counter(key).items():
                w *= _best_weight(by_comm[k], c, params.include_repeats)
            best = max(best, w)
    return best


# --------------------------------------------------------------------------
# combinatorics


def ordering_count(e: Sequence[int], M: int | None = None) -> int:
    """Number of distinct orderings of multiset e: |e|! / prod_k a_ek!."""
    size = len(e)
    if size < 2 or (M is not None and size > M):
        raise ValueError(f"hyperedge size {size} outside [2, {M if M is not None else 'M'}]")
    out = math.factorial(size)
    for mult in Counter(e).values():
        out //= math.factorial(mult)
    return out


def _ordering_counts(rows: np.ndarray) -> np.ndarray:
    """Vectorised ordering_count for sorted rows."""
    h, m = rows.shape
    run = np.ones(h, dtype=np.int64)
    denom = np.ones(h, dtype=np.float64)
    for c in range(1, m):
        run = np.where(rows[:, c] == rows[:, c - 1], run + 1, 1)
        denom *= run
    return math.factorial(m) / denom


def _has_repeats(rows: np.ndarray) -> np.ndarray:
    if rows.shape[1] < 2:
        return np.zeros(len(rows), dtype=bool)
    return np.any(rows[:, 1:] == rows[:, :-1], axis=1)


def edge_probabilities(params: ModelParams, rows: np.ndarray) -> np.ndarray:
    """b_e * pi(theta_e) * Phi(g_e) for each sorted row of an (h, m) node array."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        return np.zeros(len(rows))
    prob = _ordering_counts(rows) * np.prod(params.theta[rows], axis=1)
    prob *= params.affinity.values(params.g[rows], params.K)
    if not params.include_repeats:
        prob[_has_repeats(rows)] = 0.0
    return prob


def edge_probability(params: ModelParams, e: Sequence[int]) -> float:
    e = tuple(sorted(int(x) for x in e))
    if not 2 <= len(e) <= params.M:
        raise ValueError(f"hyperedge size {len(e)} outside [2, {params.M}]")
    if not params.include_repeats and len(set(e)) < len(e):
        return 0.0
    prob = ordering_count(e) * float(np.prod(params.theta[list(e)])) * params.affinity.value(params.g[list(e)])
    if prob > 1 + PROB_SLACK:
        raise InvalidParameters(f"edge {e} has probability {prob:.6g} > 1; parameter scale invalid")
    return prob


@lru_cache(maxsize=256)
def _tail_counts(n: int, r: int) -> np.ndarray:
    """S[v] = number of size-r multisets over {v, ..., n-1}, v = 0..n."""
    total = math.comb(n + r - 1, r)
    if total >= 2**62:
        raise OverflowError(f"C({n + r - 1}, {r}) does not fit the int64 index space")
    out = np.array([math.comb(n - v + r - 1, r) for v in range(n + 1)], dtype=np.int64)
    out.setflags(write=False)
    return out


def multiset_count(n: int, m: int) -> int:
    return math.comb(n + m - 1, m)


def unrank_many(indices, n: int, m: int) -> np.ndarray:
    """Lexicographic unranking of many indices at once -> (len, m) array."""
    idx = np.array(indices, dtype=np.int64, copy=True).reshape(-1)
    total = multiset_count(n, m)
    if idx.size and (idx.min() < 0 or idx.max() >= total):
        raise IndexError(f"multiset index outside [0, {total})")
    out = np.empty((idx.size, m), dtype=np.int64)
    lo = np.zeros(idx.size, dtype=np.int64)
    for t in range(m):
        S = _tail_counts(n, m - t)
        neg = -S
        start = S[lo]
        target = start - idx
        x = np.searchsorted(neg, -target, side="right") - 1
        idx -= start - S[x]
        out[:, t] = x
        lo = x
    return out


def unrank_multiset(index: int, n: int, m: int) -> tuple:
    """The index-th size-m multiset over range(n) in lexicographic order."""
    total = multiset_count(n, m)
    if not 0 <= index < total:
        raise IndexError(f"index {index} outside [0, {total})")
    return tuple(int(x) for x in unrank_many([index], n, m)[0])


def rank_multiset(e: Sequence[int], n: int) -> int:
    e = sorted(int(x) for x in e)
    m = len(e)
    rank = 0
    lo = 0
    for t, x in enumerate(e):
        S = _tail_counts(n, m - t)
        rank += int(S[lo] - S[x])
        lo = x
    return rank


# --------------------------------------------------------------------------
# hypergraphs


@dataclass(eq=False)
class Hypergraph:
    n: int
    edges: list = field(default_factory=list)

    def __post_init__(self):
        self.edges = [tuple(sorted(int(x) for x in e)) for e in self.edges]
        seen = set()
        for e in self.edges:
            if len(e) < 2:
                raise ValueError(f"hyperedge {e} has size < 2")
            if e[0] < 0 or e[-1] >= self.n:
                raise ValueError(f"hyperedge {e} has node ids outside [0, {self.n})")
            if e in seen:
                raise ValueError(f"duplicate hyperedge {e}")
            seen.add(e)

    def __eq__(self, other):
        return isinstance(other, Hypergraph) and self.n == other.n and self.edges == other.edges

    def __len__(self):
        return len(self.edges)

    @staticmethod
    def runs(e) -> list[tuple[int, int]]:
        """(node, multiplicity) runs of a sorted hyperedge."""
        return [(node, len(list(grp))) for node, grp in itertools.groupby(e)]

    def by_size(self) -> dict[int, np.ndarray]:
        groups: dict[int, list] = {}
        for e in self.edges:
            groups.setdefault(len(e), []).append(e)
        return {m: np.array(es, dtype=np.int64) for m, es in sorted(groups.items())}

    @property
    def max_size(self) -> int:
        return max((len(e) for e in self.edges), default=0)


def hyperdegrees(H: Hypergraph) -> np.ndarray:
    """d_i = sum_e a_ei h_e."""
    d = np.zeros(H.n, dtype=np.int64)
    for rows in H.by_size().values():
        d += np.bincount(rows.ravel(), minlength=H.n)
    return d


# --------------------------------------------------------------------------
# samplers


@lru_cache(maxsize=16)
def _all_multisets(n: int, m: int) -> np.ndarray:
    arr = np.array(list(itertools.combinations_with_replacement(range(n), m)), dtype=np.int64)
    arr.setflags(write=False)
    return arr.reshape(-1, m)


def _require_valid(params: ModelParams) -> None:
    report = validate(params)
    report.raise_if_invalid()


def sample_exact(params: ModelParams, seed: int, check: bool = True) -> Hypergraph:
    """Enumerate every possible hyperedge and flip its Bernoulli coin.

    Only for small instances: C(n+M-1, M) must stay below 10^7.
    """
    if check:
        _require_valid(params)
    if multiset_count(params.n, params.M) > EXACT_ENUMERATION_LIMIT:
        raise ValueError(
            f"exact enumeration of C({params.n + params.M - 1}, {params.M}) hyperedges is too large"
        )
    edges = []
    for m in range(2, params.M + 1):
        rows = _all_multisets(params.n, m)
        prob = edge_probabilities(params, rows)
        rng = stream(seed, "exact", m)
        hit = rng.random(len(rows)) < prob
        edges.extend(map(tuple, rows[hit].tolist()))
    return Hypergraph(params.n, edges)


class SamplerEfficiencyWarning(RuntimeWarning):
    pass


def sample_scalable(params: ModelParams, seed: int, check: bool = True, chunk: int = 1 << 16) -> Hypergraph:
    """Exact Bernoulli sampling by geometric skips over the multiset index space.

    For each size m every hyperedge probability is bounded by
    pbar = m! * theta_max^m * Phi_max(m).  Candidate indices arrive as a
    Bernoulli(pbar) process (geometric gaps); each candidate is unranked and
    kept with probability p_e / pbar, so every hyperedge is included
    independently with probability exactly p_e.
    """
    if check:
        _require_valid(params)
    n = params.n
    tmax = float(params.theta.max()) if n else 0.0
    edges = []
    for m in range(2, params.M + 1):
        pbar = math.factorial(m) * tmax**m * params.affinity.max_value(m, params.K)
        if pbar <= 0:
            continue
        # pbar >= 1 degenerates to visiting every index
        pbar = min(pbar, 1.0)
        total = multiset_count(n, m)
        rng = stream(seed, "scalable", m)
        # sized so one chunk usually covers the walk; bounds int64 cumsum growth
        step = int(min(chunk, 2 * total * pbar + 64))
        pos = -1
        accepted = []
        visited = 0
        mass = 0.0
        while True:
            gaps = rng.geometric(pbar, size=step)
            cand = pos + np.cumsum(gaps, dtype=np.int64)
            inside = cand[cand < total]
            if inside.size:
                rows = unrank_many(inside, n, m)
                prob = edge_probabilities(params, rows)
                if np.any(prob > pbar * (1 + 1e-9)):
                    raise AssertionError("edge probability exceeds sampling envelope")
                keep = rng.random(inside.size) * pbar < prob
                accepted.append(rows[keep])
                visited += inside.size
                mass += float(prob.sum())
            if inside.size < step:
                break
            pos = int(cand[-1])
        if visited >= 1000 and mass / (visited * pbar) < 1e-4:
            warnings.warn(
                f"size-{m} acceptance ratio {mass / (visited * pbar):.2e}: sampler inefficient for these parameters",
                SamplerEfficiencyWarning,
                stacklevel=2,
            )
        for rows in accepted:
            edges.extend(map(tuple, rows.tolist()))
    return Hypergraph(n, edges)


def expected_edge_counts(params: ModelParams) -> dict[tuple, float]:
    """Expected number of hyperedges per sorted label pattern, by enumeration."""
    out: dict[tuple, float] = {}
    for m in range(2, params.M + 1):
        rows = _all_multisets(params.n, m)
        prob = edge_probabilities(params, rows)
        pats = np.sort(params.g[rows], axis=1)
        for key in itertools.combinations_with_replacement(range(params.K), m):
            mask = np.all(pats == np.array(key), axis=1)
            out[key] = float(prob[mask].sum())
    return out


def pattern_counts(H: Hypergraph, g: np.ndarray) -> Counter:
    """Number of hyperedges per sorted label pattern."""
    g = np.asarray(g)
    return Counter(tuple(sorted(g[list(e)].tolist())) for e in H.edges)
