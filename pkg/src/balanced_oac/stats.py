"""Closed-form error predictors and the Monte-Carlo BMSE harness."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats as _sps

from .baselines import GoldenbaumConfig
from .numerals import CodecConfig, counts_from_numerals, encode, quantize, symbol_set
from .phy import PhyConfig
from .schemes import aggregate, resources_per_gradient

__all__ = [
    "BmseBreakdown",
    "McEstimate",
    "Histogram",
    "matched_v_max",
    "theoretical_var_given_counts",
    "classical_mse",
    "theoretical_bmse",
    "printed_channel_factor",
    "sample_gradients",
    "error_samples",
    "mc_bmse",
    "error_histogram",
    "worker_count",
]

DISTRIBUTIONS = ("uniform", "gaussian")
GAUSSIAN_VAR = 0.2
WORKERS_ENV = "BOAC_WORKERS"


@dataclass(frozen=True)
class BmseBreakdown:
    sigma2_channel: float
    sigma2_quan: float
    total: float
    e_channel: float
    e_quan: float


@dataclass(frozen=True)
class McEstimate:
    mean: float
    ci_halfwidth: float
    trials: int


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    skewness: float
    trials: int


def matched_v_max(beta: int, digits: int) -> float:
    """Range for which ``v_max + step/2 == 1``, i.e. unit-range inputs are
    never overloaded."""
    n = beta**digits
    return (n - 1) / n


def _counts_matrix(counts, codec: CodecConfig) -> np.ndarray:
    c = np.asarray(counts, dtype=np.float64)
    if c.shape[-1] == codec.beta:
        c = c[..., :-1]  # drop the zero symbol
    if c.shape[-1] != codec.beta - 1:
        raise ValueError(f"counts need {codec.beta - 1} entries per position")
    return np.broadcast_to(c, (codec.digits, codec.beta - 1))


def theoretical_var_given_counts(counts, codec: CodecConfig, phy: PhyConfig) -> float:
    """Variance of the gradient estimate for fixed symbol counts.

    ``counts`` is either one vector shared by every numeral position or a
    ``(D, beta-1)`` array, most significant position first.
    """
    c = _counts_matrix(counts, codec)
    beta, D = codec.beta, codec.digits
    s = phy.noise_var / phy.energy(beta)
    a2 = [a * a for a in symbol_set(beta)[:-1]]
    terms = []
    for row, i in zip(c, range(D - 1, -1, -1)):
        w = beta ** (2 * i)
        terms.extend(a2[ell] * (row[ell] + s) ** 2 * w for ell in range(beta - 1))
    K, R = phy.num_eds, phy.num_antennas
    return codec.v_max**2 / (codec.xi**2 * R * K**2) * math.fsum(terms)


def classical_mse(grads, codec: CodecConfig, phy: PhyConfig) -> float:
    """Variance for the counts induced by ``grads`` plus the squared
    quantization bias of their mean."""
    g = np.asarray(grads, dtype=np.float64)
    x = encode(g, codec)
    counts = np.array([counts_from_numerals(x, i, codec.beta)
                       for i in range(codec.digits - 1, -1, -1)])
    bias = np.mean(quantize(g, codec)) - np.mean(g)
    return theoretical_var_given_counts(counts, codec, phy) + bias**2


def theoretical_bmse(codec: CodecConfig, phy: PhyConfig) -> BmseBreakdown:
    """BMSE for inputs uniform on ``[-v'_max, v'_max]``.

    Every symbol count is then Binomial(K, 1/beta); averaging the
    fixed-count variance over that law gives the channel term.
    """
    beta, D = codec.beta, codec.digits
    K, R = phy.num_eds, phy.num_antennas
    s = phy.noise_var / phy.energy(beta)
    n = beta**D
    shape = (n + 1) / (n - 1)
    inner = math.fsum([
        1 / (3 * beta),
        ((beta - 1) / (3 * beta) + 2 * s / 3) / K,
        beta * s * s / (3 * K * K),
    ])
    e_channel = inner * shape / R
    e_quan = 1 / (3 * K * (n - 1) ** 2)
    v2 = codec.v_max**2
    return BmseBreakdown(v2 * e_channel, v2 * e_quan, v2 * e_channel + v2 * e_quan,
                         e_channel, e_quan)


def printed_channel_factor(codec: CodecConfig, phy: PhyConfig) -> float:
    """Channel factor in its commonly quoted simplified form.

    Differs from :func:`theoretical_bmse` in the ``1/K`` term, which reads
    ``beta/(beta-1)`` here instead of ``(beta-1)/beta``; kept for
    comparison only.
    """
    beta, D = codec.beta, codec.digits
    K, R = phy.num_eds, phy.num_antennas
    n = beta**D
    lead = (1 + beta * phy.noise_var / (K * (beta - 1))) ** 2 / beta
    return (lead + beta / (K * (beta - 1))) * (n + 1) / (n - 1) / (3 * R)


def sample_gradients(distribution: str, shape, rng) -> np.ndarray:
    if distribution == "uniform":
        return rng.uniform(-1.0, 1.0, size=shape)
    if distribution == "gaussian":
        return rng.normal(0.0, math.sqrt(GAUSSIAN_VAR), size=shape)
    raise ValueError(f"unknown distribution {distribution!r}")


def worker_count() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _block_size(scheme, codec, phy, goldenbaum) -> int:
    per = max(resources_per_gradient(scheme, codec, goldenbaum), 1)
    size = 2**22 // (phy.num_eds * per * phy.num_antennas)
    return int(min(max(size, 64), 8192))


def _block_errors(args):
    scheme, codec, phy, goldenbaum, distribution, seed, block, n = args
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))
    g = sample_gradients(distribution, (phy.num_eds, n), rng)
    est = aggregate(g, scheme, rng, phy=phy, codec=codec, goldenbaum=goldenbaum)
    return est - g.mean(axis=0)


def error_samples(scheme: str, codec: Optional[CodecConfig], phy: PhyConfig,
                  distribution: str, trials: int, seed: int,
                  goldenbaum: Optional[GoldenbaumConfig] = None,
                  workers: Optional[int] = None) -> np.ndarray:
    """Per-trial errors ``ghat - gbar`` with fresh inputs, fading and noise.

    Trials are split into fixed blocks, each seeded from ``(seed, block)``,
    so the result does not depend on the number of workers.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    size = _block_size(scheme, codec, phy, goldenbaum)
    jobs = []
    for b, start in enumerate(range(0, trials, size)):
        n = min(size, trials - start)
        jobs.append((scheme, codec, phy, goldenbaum, distribution, seed, b, n))
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_block_errors, jobs))
    else:
        parts = [_block_errors(j) for j in jobs]
    return np.concatenate(parts)


def mc_bmse(scheme: str, codec: Optional[CodecConfig], phy: PhyConfig,
            distribution: str = "uniform", trials: int = 100_000, seed: int = 0,
            goldenbaum: Optional[GoldenbaumConfig] = None,
            workers: Optional[int] = None) -> McEstimate:
    """Monte-Carlo BMSE with a 95% normal-approximation confidence half-width."""
    err2 = error_samples(scheme, codec, phy, distribution, trials, seed, goldenbaum, workers) ** 2
    half = 1.96 * err2.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    return McEstimate(float(np.mean(err2)), float(half), int(trials))


def error_histogram(scheme: str, codec: Optional[CodecConfig], phy: PhyConfig,
                    distribution: str = "uniform", trials: int = 50_000, bins: int = 100,
                    seed: int = 0, goldenbaum: Optional[GoldenbaumConfig] = None,
                    value_range=(-1.0, 1.0), workers: Optional[int] = None) -> Histogram:
    err = error_samples(scheme, codec, phy, distribution, trials, seed, goldenbaum, workers)
    counts, edges = np.histogram(err, bins=bins, range=value_range)
    return Histogram(edges, counts, float(_sps.skew(err)), int(trials))
