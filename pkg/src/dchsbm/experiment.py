"""Seeded Monte-Carlo sweeps over DCHPPM density scales.

A sweep draws one degree vector theta for the whole experiment (it is a
model parameter), then for every (scale, trial) samples a hypergraph,
projects it, embeds it and clusters it with the enabled algorithms.
Per-trial randomness is derived from (master seed, scale, trial) only, so a
trial's record does not depend on which other trials run, or on how many
workers run them.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache

import numpy as np
from threadpoolctl import threadpool_limits

from .clustering import KMEANS, THRESHOLD, kmeans_rows, misclustering, threshold_cluster
from .diagnostics import (
    RECOVERY_GATE,
    assumption_report,
    davis_kahan_bound,
    spectral_deviation,
    twoinf_deviation,
)
from .errors import ConfigError, InvalidParameters
from .model import DCHPPM, ModelParams, hyperdegrees, max_edge_probability, sample_scalable, validate
from .projection import PopulationModel, population_matrix, weighted_adjacency
from .seeding import derive_seed, stream
from .spectral import SpectralEmbedding, dense_eigenpairs, leading_eigenpairs

UNIFORM = "UNIFORM"
HETEROGENEOUS = "HETEROGENEOUS"
ALGORITHMS = (KMEANS, THRESHOLD)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 600
    K: int = 2
    M: int = 3
    p: float = 10.0
    q: float = 1.0
    density_scales: tuple = (2.0, 4.0, 8.0, 16.0, 32.0, 64.0)
    theta_mode: str = UNIFORM
    trials: int = 10
    master_seed: int = 2024
    algorithms: tuple = ALGORITHMS
    balance_edge_sizes: bool = True
    # explicit alpha_2..alpha_M, used when balance_edge_sizes is false
    alphas: tuple = ()
    include_repeats: bool = True
    kmeans_restarts: int = 20
    c0: float = 1.0
    eig_tol: float = 1e-10

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.n < 2:
            problems.append("n must be >= 2")
        if not 1 <= self.K <= self.n:
            problems.append("K must be in [1, n]")
        if self.M < 2:
            problems.append("M must be >= 2")
        if not self.p > self.q > 0:
            problems.append("need p > q > 0")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if not self.density_scales or any(not s > 0 for s in self.density_scales):
            problems.append("density_scales must be non-empty and positive")
        if self.theta_mode not in (UNIFORM, HETEROGENEOUS):
            problems.append(f"theta_mode must be {UNIFORM} or {HETEROGENEOUS}")
        if not self.algorithms or any(a not in ALGORITHMS for a in self.algorithms):
            problems.append(f"algorithms must be a non-empty subset of {ALGORITHMS}")
        if not self.balance_edge_sizes and len(self.alphas) != self.M - 1:
            problems.append("alphas must list alpha_2..alpha_M when balance_edge_sizes is false")
        if self.kmeans_restarts < 1:
            problems.append("kmeans_restarts must be >= 1")
        if not self.c0 > 0:
            problems.append("c0 must be > 0")
        if problems:
            raise ConfigError("; ".join(problems))
        return self


# --------------------------------------------------------------------------
# flat key = value config files

_LIST_KEYS = {"density_scales": float, "algorithms": str, "alphas": float}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines ('#' comments, comma-separated lists)."""
    base = base or ExperimentConfig()
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _LIST_KEYS:
                conv = _LIST_KEYS[key]
                items = [s.strip() for s in val.split(",") if s.strip()]
                values[key] = tuple(conv(s).upper() if conv is str else conv(s) for s in items)
            elif types[key] == "bool":
                values[key] = _parse_bool(val)
            elif types[key] == "int":
                values[key] = int(val)
            elif types[key] == "float":
                values[key] = float(val)
            else:
                values[key] = val.upper()
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return replace(base, **values).validate()


def format_config(config: ExperimentConfig) -> str:
    lines = []
    for f in fields(ExperimentConfig):
        val = getattr(config, f.name)
        if isinstance(val, tuple):
            val = ", ".join(str(v) for v in val)
        elif isinstance(val, bool):
            val = "true" if val else "false"
        lines.append(f"{f.name} = {val}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------
# model construction


def equal_blocks(n: int, K: int) -> np.ndarray:
    """Contiguous labels with sizes differing by at most one, largest first."""
    sizes = [n // K + (1 if k < n % K else 0) for k in range(K)]
    return np.repeat(np.arange(K), sizes)


def make_theta(mode: str, n: int, K: int, g, seed: int) -> np.ndarray:
    """UNIFORM: theta = 1.  HETEROGENEOUS: psi ~ U[1, 2], rescaled per community
    so that sum_{i in k} theta_i = n_k."""
    g = np.asarray(g)
    if mode == UNIFORM:
        return np.ones(n)
    if mode != HETEROGENEOUS:
        raise ConfigError(f"unknown theta mode {mode!r}")
    psi = stream(seed, "theta").uniform(1.0, 2.0, size=n)
    sizes = np.bincount(g, minlength=K).astype(float)
    sums = np.bincount(g, weights=psi, minlength=K)
    return sizes[g] * psi / sums[g]


def _elementary_symmetric(x: np.ndarray, m: int) -> float:
    e = np.zeros(m + 1)
    e[0] = 1.0
    for v in x:
        e[1:] = e[1:] + v * e[:-1]
    return float(e[m])


def expected_size_counts(n, K, M, p, q, theta, g, include_repeats=True) -> np.ndarray:
    """W_m with E[#hyperedges of size m] = alpha_m * W_m, for m = 2..M.

    With repeats the sum over multisets of b_e pi(theta_e) f(g_e) equals the
    sum over ordered tuples, which factors through the community sizes:
    W_m = q n^m + (p - q) sum_k n_k^m.  Without repeats it is
    m! (q e_m(theta) + (p - q) sum_k e_m(theta_k)), e_m elementary symmetric.
    """
    theta = np.asarray(theta, dtype=float)
    g = np.asarray(g)
    out = []
    for m in range(2, M + 1):
        if include_repeats:
            sums = np.bincount(g, weights=theta, minlength=K)
            out.append(q * float(theta.sum()) ** m + (p - q) * float((sums**m).sum()))
        else:
            total = _elementary_symmetric(theta, m)
            within = sum(_elementary_symmetric(theta[g == k], m) for k in range(K))
            out.append(math.factorial(m) * (q * total + (p - q) * within))
    return np.array(out)


def balance_alphas(n, K, M, p, q, theta, g, scale: float = 1.0, include_repeats: bool = True) -> dict:
    """alpha_m giving equal expected hyperedge counts for every size m.

    At scale 1 the expected average hyperdegree sum_m m E_m / n equals 1, so
    ``scale`` is the expected average hyperdegree itself.
    """
    W = expected_size_counts(n, K, M, p, q, theta, g, include_repeats)
    per_size = n / sum(range(2, M + 1))
    alphas = {m: scale * per_size / W[m - 2] for m in range(2, M + 1)}
    params = ModelParams(n, K, M, g, theta, DCHPPM(p, q, alphas), include_repeats)
    pmax = max_edge_probability(params)
    if pmax > 1 + 1e-12:
        raise InvalidParameters(f"infeasible density: a hyperedge probability reaches {pmax:.4g} > 1")
    return alphas


@dataclass(frozen=True, eq=False)
class SweepContext:
    g: np.ndarray
    theta: np.ndarray
    base_alphas: dict
    base_population: PopulationModel
    base_embedding: SpectralEmbedding

    def params(self, config: ExperimentConfig, scale: float) -> ModelParams:
        alphas = {m: a * scale for m, a in self.base_alphas.items()}
        return ModelParams(config.n, config.K, config.M, self.g, self.theta,
                           DCHPPM(config.p, config.q, alphas), config.include_repeats)

    def population(self, scale: float) -> PopulationModel:
        # every alpha_m is multiplied by the scale, so P and B scale linearly
        pop = self.base_population
        return PopulationModel(pop.P * scale, pop.B * scale, pop.Z, pop.phi, pop.theta_tilde)

    def population_embedding(self, scale: float) -> SpectralEmbedding:
        emb = self.base_embedding
        return replace(emb, eigenvalues=emb.eigenvalues * scale, residuals=emb.residuals * scale)


@lru_cache(maxsize=8)
def sweep_context(config: ExperimentConfig) -> SweepContext:
    g = equal_blocks(config.n, config.K)
    theta = make_theta(config.theta_mode, config.n, config.K, g, derive_seed(config.master_seed, "theta"))
    if config.balance_edge_sizes:
        W = expected_size_counts(config.n, config.K, config.M, config.p, config.q, theta, g,
                                 config.include_repeats)
        per_size = config.n / sum(range(2, config.M + 1))
        alphas = {m: per_size / W[m - 2] for m in range(2, config.M + 1)}
    else:
        alphas = {m: float(a) for m, a in zip(range(2, config.M + 1), config.alphas)}
    params = ModelParams(config.n, config.K, config.M, g, theta, DCHPPM(config.p, config.q, alphas),
                         config.include_repeats)
    pop = population_matrix(params)
    return SweepContext(g, theta, alphas, pop, dense_eigenpairs(pop.P, config.K))


# --------------------------------------------------------------------------
# trials

RECORD_FIELDS = (
    "scale", "trial", "seed", "avg_expected_degree", "num_edges", "max_degree_sampled",
    "err_kmeans", "err_threshold", "err_rate_kmeans", "err_rate_threshold",
    "lambda_K", "lambda_hat_K", "kappa", "gamma", "d", "cond1", "cond2", "full_rank",
    "spec_dev", "spec_ratio", "two_inf_dev", "two_inf_normalized", "row_norm_two_inf",
    "frobenius_dev", "davis_kahan_bound", "below_gate", "zero_rows", "kmeans_cost",
    "threshold_distance", "flags", "error",
)


@dataclass
class TrialRecord:
    scale: float
    trial: int
    seed: int
    avg_expected_degree: float = math.nan
    num_edges: int = -1
    max_degree_sampled: int = -1
    err_kmeans: int = -1
    err_threshold: int = -1
    err_rate_kmeans: float = math.nan
    err_rate_threshold: float = math.nan
    lambda_K: float = math.nan
    lambda_hat_K: float = math.nan
    kappa: float = math.nan
    gamma: float = math.nan
    d: float = math.nan
    cond1: float = math.nan
    cond2: float = math.nan
    full_rank: bool = False
    spec_dev: float = math.nan
    spec_ratio: float = math.nan
    two_inf_dev: float = math.nan
    two_inf_normalized: float = math.nan
    row_norm_two_inf: float = math.nan
    frobenius_dev: float = math.nan
    davis_kahan_bound: float = math.nan
    below_gate: bool = False
    zero_rows: int = 0
    kmeans_cost: float = math.nan
    threshold_distance: float = math.nan
    flags: str = ""
    error: str = ""
    wall_time_ms: int = 0


def trial_seed(master_seed: int, scale: float, trial: int) -> int:
    return derive_seed(master_seed, "trial", repr(float(scale)), int(trial))


def run_trial(config: ExperimentConfig, scale: float, trial: int, context: SweepContext | None = None,
              with_labels: bool = False):
    """One (scale, trial) cell of the sweep.  Failures are recorded, never raised."""
    ctx = context if context is not None else sweep_context(config)
    seed = trial_seed(config.master_seed, scale, trial)
    rec = TrialRecord(scale=float(scale), trial=int(trial), seed=seed)
    labels = {}
    start = time.perf_counter()
    flags = []
    try:
        with threadpool_limits(limits=1):
            params = ctx.params(config, scale)
            pop = ctx.population(scale)
            emb_P = ctx.population_embedding(scale)
            report = assumption_report(params, config.c0, population=pop, embedding=emb_P)
            rec.avg_expected_degree = float(pop.P.sum() / config.n)
            rec.lambda_K, rec.kappa, rec.gamma, rec.d = report.lambda_K, report.kappa, report.gamma, report.d
            rec.cond1, rec.cond2, rec.full_rank = report.cond1, report.cond2, report.full_rank

            H = sample_scalable(params, derive_seed(seed, "sample"), check=False)
            rec.num_edges = len(H)
            rec.max_degree_sampled = int(hyperdegrees(H).max()) if config.n else 0
            A = weighted_adjacency(H)
            emb_A = leading_eigenpairs(A, config.K, tol=config.eig_tol, seed=derive_seed(seed, "eigen"))
            rec.lambda_hat_K = float(abs(emb_A.eigenvalues[-1]))
            lam1 = float(abs(emb_A.eigenvalues[0]))
            if A.nnz == 0 or rec.lambda_hat_K <= 1e-10 * max(lam1, 1e-300):
                flags.append("DEGENERATE_EIGENGAP")
            if emb_A.degenerate:
                flags.append("EIGEN_TIE")
            rec.zero_rows = len(emb_A.zero_rows)

            if KMEANS in config.algorithms:
                res = kmeans_rows(emb_A.Ustar, config.K, config.kmeans_restarts,
                                  seed=derive_seed(seed, "kmeans"), zero_rows=emb_A.zero_rows)
                rec.err_kmeans = misclustering(ctx.g, res.labels, config.K)
                rec.err_rate_kmeans = rec.err_kmeans / config.n
                rec.kmeans_cost = res.objective
                flags.extend(f"KMEANS_{f}" for f in sorted(res.flags))
                labels[KMEANS] = res.labels
            if THRESHOLD in config.algorithms:
                res = threshold_cluster(emb_A.Ustar, config.K)
                rec.err_threshold = misclustering(ctx.g, res.labels, config.K)
                rec.err_rate_threshold = rec.err_threshold / config.n
                rec.threshold_distance = res.objective
                labels[THRESHOLD] = res.labels

            dev, ratio = spectral_deviation(A, pop.P, report.d)
            stats = twoinf_deviation(emb_A, emb_P, report, spec=(dev, ratio))
            rec.spec_dev, rec.spec_ratio = stats.spec_dev, stats.spec_ratio
            rec.two_inf_dev, rec.two_inf_normalized = stats.two_inf_dev, stats.two_inf_normalized
            rec.row_norm_two_inf, rec.frobenius_dev = stats.row_norm_two_inf, stats.frobenius_dev
            rec.davis_kahan_bound = davis_kahan_bound(dev, report.lambda_K, config.K)
            rec.below_gate = bool(stats.row_norm_two_inf < RECOVERY_GATE)
    except Exception as exc:  # recorded, the sweep goes on
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.flags = ";".join(flags)
    rec.wall_time_ms = int(round((time.perf_counter() - start) * 1000))
    if with_labels:
        return rec, labels
    return rec


def _run_cell(args):
    config, scale, trial = args
    return run_trial(config, scale, trial)


@dataclass
class SummaryRow:
    scale: float
    algorithm: str
    trials: int
    failures: int
    avg_expected_degree: float
    mean_err_rate: float
    std_err_rate: float
    se_err_rate: float
    exact_recovery: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: list = field(default_factory=list)


def summarize(config: ExperimentConfig, records) -> list:
    rows = []
    for scale in config.density_scales:
        cell = [r for r in records if r.scale == float(scale)]
        for alg in config.algorithms:
            key = "err_rate_kmeans" if alg == KMEANS else "err_rate_threshold"
            vals = np.array([getattr(r, key) for r in cell if not r.error])
            k = len(vals)
            std = float(vals.std(ddof=1)) if k > 1 else 0.0
            rows.append(SummaryRow(
                scale=float(scale),
                algorithm=alg,
                trials=len(cell),
                failures=len(cell) - k,
                avg_expected_degree=float(np.mean([r.avg_expected_degree for r in cell])) if cell else math.nan,
                mean_err_rate=float(vals.mean()) if k else math.nan,
                std_err_rate=std,
                se_err_rate=std / math.sqrt(k) if k else math.nan,
                exact_recovery=float(np.mean(vals == 0)) if k else math.nan,
            ))
    return rows


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    config.validate()
    ctx = sweep_context(config)
    for scale in config.density_scales:
        # every trial at this scale shares the parameters; reject p_e > 1 up front
        validate(ctx.params(config, float(scale))).raise_if_invalid()
    cells = [(config, float(s), t) for s in config.density_scales for t in range(config.trials)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_cell, cells, chunksize=1))
    else:
        records = [run_trial(c, s, t, ctx) for c, s, t in cells]
    records.sort(key=lambda r: (config.density_scales.index(r.scale), r.trial))
    return ExperimentResult(config, records, summarize(config, records))


# --------------------------------------------------------------------------
# CSV output; floats use repr so identical runs give identical bytes


def _fmt(val) -> str:
    if isinstance(val, bool):
        return "1" if val else "0"
    if isinstance(val, float):
        return repr(val)
    return str(val)


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])
    return buf.getvalue()


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = [f.name for f in fields(SummaryRow)]
    w.writerow(names)
    for row in rows:
        w.writerow([_fmt(v) for v in asdict(row).values()])
    return buf.getvalue()


def timings_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scale", "trial", "wall_time_ms"])
    for r in records:
        w.writerow([_fmt(r.scale), r.trial, r.wall_time_ms])
    return buf.getvalue()
