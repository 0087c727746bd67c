"""Random model parameters and symmetric matrices for tests."""
import numpy as np
import scipy.sparse as sp

from dchsbm.model import DCHPPM, GeneralAffinity, ModelParams, max_edge_probability


def scale_affinity(aff, factor):
    if isinstance(aff, DCHPPM):
        return aff.scaled(factor)
    return GeneralAffinity({k: v * factor for k, v in aff.table.items()})


def random_params(seed, n, K, M, general=False, hetero=True, target=0.6, include_repeats=True):
    """Valid DCHSBM with heterogeneous theta; affinity scaled so max P(h_e=1) = target."""
    rng = np.random.default_rng(seed)
    g = rng.permutation(np.arange(n) % K)
    sizes = np.bincount(g, minlength=K).astype(float)
    psi = rng.uniform(0.5, 2.0, n) if hetero else np.ones(n)
    theta = sizes[g] * psi / np.bincount(g, weights=psi, minlength=K)[g]
    if general:
        vals = {}
        aff = GeneralAffinity.from_function(K, M, lambda key: vals.setdefault(key, rng.uniform(0.1, 1.0)))
    else:
        q = rng.uniform(0.1, 1.0)
        aff = DCHPPM(q * rng.uniform(1.5, 10), q, {m: rng.uniform(0.2, 1.0) for m in range(2, M + 1)})
    params = ModelParams(n, K, M, g, theta, aff, include_repeats)
    top = max_edge_probability(params)
    if top == 0:  # no admissible hyperedge at all (n = 1 without repeats)
        return params
    return params.with_affinity(scale_affinity(aff, target / top))


def random_symmetric(seed):
    """Mixed battery: dense Gaussian, sparse, low rank plus noise, graph-like."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 201))
    kind = seed % 4
    if kind == 0:
        X = rng.standard_normal((n, n))
        A = (X + X.T) / 2
    elif kind == 1:
        X = sp.random(n, n, density=min(1.0, 8 / n), random_state=seed).toarray()
        A = X + X.T
    elif kind == 2:
        r = int(rng.integers(1, 6))
        V = np.linalg.qr(rng.standard_normal((n, r)))[0]
        A = V @ np.diag(rng.uniform(5, 20, r) * rng.choice([-1, 1], r)) @ V.T
        noise = rng.standard_normal((n, n)) * 0.01
        A += (noise + noise.T) / 2
    else:
        X = (rng.random((n, n)) < 0.1).astype(float)
        A = np.triu(X, 1) + np.triu(X, 1).T
    K = int(rng.integers(1, min(8, n) + 1))
    return A, K
