"""Component-count selection by coherence metrics, plus a synthetic oracle.

Three coherence measures are evaluated over a candidate range of K
with Monte Carlo restarts: mean pairwise cosine similarity of the
normalized destination rows (CaoJuan2009, minimized), the symmetric KL
divergence between the spectrum of D̃ and the mixture weights induced
by row masses (Arun2010, minimized), and mean pairwise Jensen–Shannon
divergence (Deveaud2014, maximized, stored negated so that every
metric is minimized after per-metric min-max scaling).  A topic-model
generative sampler provides ground-truth corpora for validating the
selection end to end.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DataError, FlowError, NumericError
from .nmf import NmfModel, nmf_fit, normalize

log = logging.getLogger(__name__)

CAO = "CaoJuan2009"
ARUN = "Arun2010"
DEVEAUD = "Deveaud2014"
ALL_METRICS = (CAO, ARUN, DEVEAUD)

# Multiplier for the 99% band around metric means (normal approximation).
BAND_99 = 2.576

DEFAULT_RUNS = 20

# Initialization jitter used for restarts during selection: the double-SVD
# init is deterministic, so distinct seeds only matter through this.
SELECT_JITTER = 0.02

_EPS = 1e-12


@dataclass(frozen=True)
class SyntheticCorpus:
    """Topic-model draw: mixtures theta (docs×topics), term distributions
    phi (topics×vocab), and the sampled count matrix."""

    true_K: int
    theta: np.ndarray
    phi: np.ndarray
    counts: np.ndarray
    alpha: float
    beta: float
    doc_length: int
    seed: int

    @property
    def lambda_matrix(self) -> np.ndarray:
        """Per-cell term probability Σ_k theta_dk·phi_kv."""
        return self.theta @ self.phi


def generate_lda(
    D: int, V: int, K: int, alpha: float, beta: float, doc_length: int, seed: int
) -> SyntheticCorpus:
    """Sample a synthetic corpus from the standard topic-model process.

    phi_k ~ Dirichlet(beta·1_V), theta_d ~ Dirichlet(alpha·1_K); each of
    the ``doc_length`` words of document d picks a topic from theta_d
    and a term from the topic's phi.  Words are drawn in multinomial
    batches, which is distributionally identical to per-word sampling.
    """
    if min(D, V, K, doc_length) < 1:
        raise DataError("all corpus dimensions must be at least 1")
    if alpha <= 0 or beta <= 0:
        raise DataError("Dirichlet hyperparameters must be positive")
    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(np.full(V, beta), size=K)
    theta = rng.dirichlet(np.full(K, alpha), size=D)
    counts = np.zeros((D, V), dtype=np.int64)
    for d in range(D):
        topic_counts = rng.multinomial(doc_length, theta[d])
        for k in np.nonzero(topic_counts)[0]:
            counts[d] += rng.multinomial(topic_counts[k], phi[k])
    return SyntheticCorpus(
        true_K=K, theta=theta, phi=phi, counts=counts,
        alpha=alpha, beta=beta, doc_length=doc_length, seed=seed,
    )


def coherence_cao(model: NmfModel) -> float:
    """Mean pairwise cosine similarity of normalized destination rows.

    Low values mean well-separated components; undefined at K = 1.
    """
    if model.K < 2:
        raise DataError("cosine coherence needs at least 2 components")
    _, D_tilde, _ = normalize(model)
    norms = np.linalg.norm(D_tilde, axis=1)
    total = 0.0
    for k, l in combinations(range(model.K), 2):
        total += float(D_tilde[k] @ D_tilde[l]) / (norms[k] * norms[l])
    return total / (model.K * (model.K - 1) / 2)


def _symmetric_kl(p: np.ndarray, q: np.ndarray) -> float:
    p_safe = np.maximum(p, _EPS)
    q_safe = np.maximum(q, _EPS)
    return float(p @ np.log(p_safe / q_safe) + q @ np.log(q_safe / p_safe))


def coherence_arun(X: np.ndarray, model: NmfModel) -> float:
    """Divergence between the spectrum of D̃ and the induced mixture weights.

    Compares the L1-normalized singular values of the destination
    factor with the L1-normalized vector ℓᵀS̃, where ℓ holds the row
    sums of the fitted matrix (document lengths); both live on the
    K-simplex.  Zero at K = 1 by construction.
    """
    S_tilde, D_tilde, _ = normalize(model)
    sigma = np.linalg.svd(D_tilde, compute_uv=False)
    lengths = np.asarray(X, dtype=np.float64).sum(axis=1)
    mix = lengths @ S_tilde
    sig_total, mix_total = float(sigma.sum()), float(mix.sum())
    if sig_total <= 0 or mix_total <= 0:
        raise NumericError("degenerate factors in spectral coherence")
    return _symmetric_kl(sigma / sig_total, mix / mix_total)


def _js_divergence(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)
    m_safe = np.maximum(m, _EPS)
    left = float(p @ np.log(np.maximum(p, _EPS) / m_safe)) * 0.5
    right = float(q @ np.log(np.maximum(q, _EPS) / m_safe)) * 0.5
    return left + right


def coherence_deveaud(model: NmfModel) -> float:
    """Mean pairwise Jensen–Shannon divergence of destination rows.

    High values mean well-separated components (ln 2 per fully disjoint
    pair); callers that minimize uniformly should negate.
    """
    if model.K < 2:
        raise DataError("divergence coherence needs at least 2 components")
    _, D_tilde, _ = normalize(model)
    total = 0.0
    for k, l in combinations(range(model.K), 2):
        total += _js_divergence(D_tilde[k], D_tilde[l])
    return total / (model.K * (model.K - 1) / 2)


@dataclass(frozen=True)
class MetricCurve:
    """One metric across the K-range: raw means, their standard errors,
    and the min-max scaled means actually compared."""

    name: str
    mean: tuple[float, ...]
    se: tuple[float, ...]
    scaled: tuple[float, ...]
    chosen_k: int
    constant: bool

    def band99(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        lo = tuple(m - BAND_99 * s for m, s in zip(self.mean, self.se))
        hi = tuple(m + BAND_99 * s for m, s in zip(self.mean, self.se))
        return lo, hi


@dataclass(frozen=True)
class CoherenceReport:
    k_values: tuple[int, ...]
    runs_per_k: int
    curves: dict[str, MetricCurve]
    consensus_k: int
    failures: tuple[tuple[int, int], ...]  # (k, seed) pairs that failed


def _evaluate(X, k, seed, metrics, jitter, fit_opts):
    model = nmf_fit(X, k, seed, jitter=jitter, **fit_opts)
    values = {}
    for name in metrics:
        if name == CAO:
            values[name] = coherence_cao(model)
        elif name == ARUN:
            values[name] = coherence_arun(X, model)
        elif name == DEVEAUD:
            # maximized by construction; negated so lower is better
            values[name] = -coherence_deveaud(model)
    return values


def _minmax(values: np.ndarray) -> tuple[np.ndarray, bool]:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0:
        return np.zeros_like(values), True
    return (values - lo) / (hi - lo), False


def select_k(
    X: np.ndarray,
    k_range,
    runs_per_k: int = DEFAULT_RUNS,
    seeds=None,
    metrics=ALL_METRICS,
    *,
    jitter: float = SELECT_JITTER,
    n_jobs: int = 1,
    **fit_opts,
) -> CoherenceReport:
    """Score every candidate K with repeated jittered fits and pick one.

    Each K is fitted once per seed (``seeds`` defaults to 0..R−1); the
    per-metric means over runs are min-max scaled across the K-range
    and the smallest argmin wins per metric.  The consensus choice is
    the spectral metric's (the most stable of the three); if it was not
    requested, the first listed metric decides.  Failed fits are
    excluded and reported; a K with no surviving run is an error.
    """
    k_values = sorted(set(int(k) for k in k_range))
    if not k_values:
        raise DataError("empty K range")
    metrics = tuple(metrics)
    unknown = set(metrics) - set(ALL_METRICS)
    if unknown:
        raise DataError(f"unknown metrics {sorted(unknown)}")
    if not metrics:
        raise DataError("no metrics requested")
    if k_values[0] < 2 and (CAO in metrics or DEVEAUD in metrics):
        raise DataError(
            "K=1 is incompatible with pairwise coherence metrics; "
            "drop it from the range or use the spectral metric alone"
        )
    if runs_per_k < 1:
        raise DataError("runs_per_k must be at least 1")
    if seeds is None:
        seeds = list(range(runs_per_k))
    seeds = [int(s) for s in seeds]
    if len(seeds) != runs_per_k:
        raise DataError(f"need {runs_per_k} seeds, got {len(seeds)}")
    if len(set(seeds)) != len(seeds):
        raise DataError("seeds must be distinct")

    jobs = [(k, seed) for k in k_values for seed in seeds]
    results: dict[tuple[int, int], dict[str, float]] = {}
    failures: list[tuple[int, int]] = []

    def run(job):
        k, seed = job
        return job, _evaluate(X, k, seed, metrics, jitter, fit_opts)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = []
            for job in jobs:
                outcomes.append((job, pool.submit(run, job)))
            for job, fut in outcomes:
                try:
                    _, values = fut.result()
                    results[job] = values
                except FlowError as exc:
                    failures.append(job)
                    log.warning("fit failed for K=%d seed=%d: %s", *job, exc)
    else:
        for job in jobs:
            try:
                _, values = run(job)
                results[job] = values
            except FlowError as exc:
                failures.append(job)
                log.warning("fit failed for K=%d seed=%d: %s", *job, exc)

    curves: dict[str, MetricCurve] = {}
    per_metric_mean = {}
    for name in metrics:
        means, ses = [], []
        for k in k_values:
            vals = [results[(k, s)][name] for s in seeds if (k, s) in results]
            if not vals:
                raise NumericError(f"all {runs_per_k} fits failed for K={k}")
            arr = np.asarray(vals)
            means.append(float(arr.mean()))
            ses.append(
                float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
            )
        per_metric_mean[name] = (np.asarray(means), np.asarray(ses))

    for name in metrics:
        means, ses = per_metric_mean[name]
        scaled, constant = _minmax(means)
        chosen = k_values[int(np.argmin(scaled))]
        curves[name] = MetricCurve(
            name=name,
            mean=tuple(means.tolist()),
            se=tuple(ses.tolist()),
            scaled=tuple(scaled.tolist()),
            chosen_k=chosen,
            constant=constant,
        )
        if constant:
            log.warning("metric %s is constant over the K range", name)

    consensus = curves[ARUN].chosen_k if ARUN in curves else curves[metrics[0]].chosen_k
    return CoherenceReport(
        k_values=tuple(k_values),
        runs_per_k=runs_per_k,
        curves=curves,
        consensus_k=consensus,
        failures=tuple(failures),
    )
