"""Theory-facing quantities: assumption checks, condition values, and the
observed deviations ||A - P|| and ||Uhat sgn(H) - U||_{2,inf}."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .model import ModelParams
from .projection import PopulationModel, population_matrix
from .errors import NumericalError
from .spectral import SpectralEmbedding, dense_eigenpairs, leading_eigenpairs, sign_align, two_to_infinity

FULL_RANK_RTOL = 1e-10
# the analytically exact gate: below it, thresholding recovers every label
RECOVERY_GATE = 1 / (2 * math.sqrt(2))


@dataclass(frozen=True)
class AssumptionReport:
    M: int
    size_ratio: float
    kappa: float
    lambda_1: float
    lambda_K: float
    gamma: float
    d: float
    cond1: float
    cond2: float
    full_rank: bool
    max_P: float
    n: int
    K: int
    c0: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DeviationStats:
    spec_dev: float
    spec_ratio: float
    two_inf_dev: float
    two_inf_normalized: float
    row_norm_two_inf: float
    frobenius_dev: float

    def as_dict(self) -> dict:
        return asdict(self)


class PowerIterationWarning(RuntimeWarning):
    pass


def expected_degree_bound(P: np.ndarray, c0: float = 1.0) -> float:
    """d = max{n * max_ij P_ij, c0 * log n}."""
    n = P.shape[0]
    return max(n * float(P.max()), c0 * math.log(n))


def assumption_report(params: ModelParams, c0: float = 1.0, population: PopulationModel | None = None,
                      embedding: SpectralEmbedding | None = None) -> AssumptionReport:
    pop = population if population is not None else population_matrix(params)
    emb = embedding if embedding is not None else dense_eigenpairs(pop.P, params.K)
    n, K = params.n, params.K
    lam = emb.eigenvalues
    lam1, lamK = float(abs(lam[0])), float(abs(lam[-1]))
    full_rank = lamK > FULL_RANK_RTOL * lam1 if lam1 > 0 else False
    sizes = params.sizes
    tt = pop.theta_tilde
    gamma = float(tt.max() / tt.min())
    d = expected_degree_bound(pop.P, c0)
    rate = math.sqrt(d * math.log(n))
    cond2 = gamma * rate / lamK if lamK > 0 else math.inf
    return AssumptionReport(
        M=params.M,
        size_ratio=float(sizes.max() / sizes.min()),
        kappa=lam1 / lamK if lamK > 0 else math.inf,
        lambda_1=lam1,
        lambda_K=lamK,
        gamma=gamma,
        d=d,
        cond1=cond2 * K**1.5,
        cond2=cond2,
        full_rank=bool(full_rank),
        max_P=float(pop.P.max()),
        n=n,
        K=K,
        c0=c0,
    )


def _power_norm(D: np.ndarray, tol: float, max_iter: int, seed: int):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(D.shape[0])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(max_iter):
        y = D @ x
        ny = np.linalg.norm(y)
        if ny == 0:
            x = rng.standard_normal(D.shape[0])
            x /= np.linalg.norm(x)
            continue
        z = D @ (y / ny)
        new = float(np.linalg.norm(z))
        x = z / new
        if abs(new - est) <= tol * new:
            return new
        est = new
    return est


def spectral_norm(D: np.ndarray, tol: float = 1e-10, max_iter: int = 20000, seed: int = 0):
    """||D||_2 of a symmetric matrix.

    Returns (estimate, lower, upper, converged).  The estimate is the largest
    |Ritz value| from the Lanczos solver; its residual r brackets an
    eigenvalue in [est - r, est + r].  ``upper`` is also capped by
    min(Frobenius, max row l1 norm).  Power iteration is the fallback when
    Lanczos fails to converge.
    """
    D = np.asarray(D, dtype=float)
    cap = min(float(np.linalg.norm(D)), float(np.abs(D).sum(axis=1).max()) if D.size else 0.0)
    if cap == 0.0:
        return 0.0, 0.0, 0.0, True
    try:
        emb = leading_eigenpairs(D, 1, tol=tol, seed=seed)
    except NumericalError:
        est = _power_norm(D, tol, max_iter, seed)
        return est, 0.0, cap, False
    est = float(abs(emb.eigenvalues[0]))
    r = float(emb.residuals[0])
    return est, max(est - r, 0.0), min(est + r, cap), r <= 10 * tol * max(est, 1e-300)


def spectral_deviation(A, P: np.ndarray, d: float):
    """(||A - P||, ||A - P|| / sqrt(d))."""
    Ad = A.to_dense() if hasattr(A, "to_dense") else np.asarray(A, dtype=float)
    if Ad.shape != P.shape:
        raise ValueError("A and P differ in shape")
    dev, lo, hi, ok = spectral_norm(Ad - P)
    if not ok:
        warnings.warn(
            f"power iteration did not converge: ||A-P|| in [{lo:.6g}, {hi:.6g}]",
            PowerIterationWarning,
            stacklevel=2,
        )
    return dev, dev / math.sqrt(d)


def twoinf_deviation(emb_A: SpectralEmbedding, emb_P: SpectralEmbedding, report: AssumptionReport,
                     spec=(math.nan, math.nan)) -> DeviationStats:
    """Align Uhat to U with sgn(Uhat^T U) and measure the row-wise deviations."""
    if emb_A.K != emb_P.K:
        raise ValueError("embeddings differ in K")
    O = sign_align(emb_A.U, emb_P.U)
    diff = emb_A.U @ O - emb_P.U
    two_inf = two_to_infinity(diff)
    rate = math.sqrt(report.d * math.log(report.n)) / report.lambda_K if report.lambda_K > 0 else math.inf
    scale = rate * two_to_infinity(emb_P.U)
    return DeviationStats(
        spec_dev=float(spec[0]),
        spec_ratio=float(spec[1]),
        two_inf_dev=two_inf,
        two_inf_normalized=two_inf / scale if scale > 0 else math.inf,
        row_norm_two_inf=two_to_infinity(emb_A.Ustar @ O - emb_P.Ustar),
        frobenius_dev=float(np.linalg.norm(diff)),
    )


def davis_kahan_bound(spec_dev: float, lambda_K: float, K: int) -> float:
    """2 sqrt(2K) ||A - P|| / |lambda_K|, a bound on min_O ||Uhat O - U||_F."""
    return 2 * math.sqrt(2 * K) * spec_dev / lambda_K if lambda_K > 0 else math.inf
