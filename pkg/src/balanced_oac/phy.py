"""Frequency-domain multiple-access channel, subcarrier-activation transmitter
and non-coherent energy receiver.

Two code paths share the receiver math:

* the grid path (:func:`resource_map`, :func:`modulate`, :func:`sample_channel`,
  :func:`superpose`, :func:`estimate_gradient`) builds an explicit
  ``(S, M, R)`` resource grid and is meant for inspection and small cases;
* the batched path (:func:`superpose_numerals`, :func:`over_the_air_average`)
  draws fading only for active resource elements, which is exact in
  distribution for the i.i.d. Rayleigh model and fast enough for Monte-Carlo.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .numerals import CodecConfig, DomainError, decode, symbol_index, symbol_set

__all__ = [
    "CapacityError",
    "UnsupportedSizeError",
    "PhyConfig",
    "ChannelRealization",
    "resource_map",
    "capacity",
    "modulate",
    "sample_channel",
    "superpose",
    "estimate_count",
    "estimate_count_ml",
    "estimate_gradient",
    "numeral_means",
    "superpose_numerals",
    "over_the_air_average",
    "grid_to_json",
]


class CapacityError(ValueError):
    pass


class UnsupportedSizeError(ValueError):
    pass


@dataclass(frozen=True)
class PhyConfig:
    """Uplink parameters.

    ``symbol_energy=None`` means the scheme default (``beta - 1`` for the
    balanced scheme).  ``sync_spread`` is in seconds; the signal bandwidth
    is ``num_subcarriers * subcarrier_spacing``.
    """

    num_eds: int = 25
    num_antennas: int = 1
    noise_var: float = 0.01
    symbol_energy: Optional[float] = None
    num_subcarriers: int = 1200
    num_symbols: int = 1
    sync_error_samples: int = 0
    fft_size: int = 2048
    sync_spread: float = 0.0
    subcarrier_spacing: float = 15e3
    clip_counts: bool = False

    def __post_init__(self):
        for name in ("num_eds", "num_antennas", "num_subcarriers", "num_symbols", "fft_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.noise_var < 0:
            raise ValueError("noise_var must be non-negative")
        if self.symbol_energy is not None and self.symbol_energy <= 0:
            raise ValueError("symbol_energy must be positive")
        if self.sync_error_samples < 0 or self.sync_spread < 0:
            raise ValueError("sync errors must be non-negative")

    def energy(self, beta: int) -> float:
        return float(beta - 1) if self.symbol_energy is None else float(self.symbol_energy)

    @property
    def bandwidth(self) -> float:
        return self.num_subcarriers * self.subcarrier_spacing

    @property
    def snr_db(self) -> float:
        return float("inf") if self.noise_var == 0 else -10 * np.log10(self.noise_var)


@dataclass(frozen=True)
class ChannelRealization:
    """Fading coefficients ``h[k, r, t, f]`` including the sync-error phase,
    plus the per-device timing offsets (in samples) that produced it."""

    coefficients: np.ndarray
    offsets: np.ndarray


def _per_gradient(beta: int, digits: int) -> int:
    return (beta - 1) * digits


def capacity(beta: int, digits: int, cfg: PhyConfig) -> int:
    """Gradients that fit in one slot of ``num_symbols`` OFDM symbols."""
    return (cfg.num_subcarriers // _per_gradient(beta, digits)) * cfg.num_symbols


def resource_map(q: int, beta: int, digits: int, cfg: PhyConfig) -> np.ndarray:
    """Time-frequency pairs ``(t, f)`` used by gradient ``q``.

    Row ``i * (beta - 1) + l`` is the subcarrier of symbol ``a_l`` for the
    numeral at power ``i``.  Gradients occupy adjacent blocks, filling the
    subcarriers of one OFDM symbol before moving to the next.
    """
    per = _per_gradient(beta, digits)
    m_par = cfg.num_subcarriers // per
    if m_par == 0 or not 0 <= q < m_par * cfg.num_symbols:
        raise CapacityError(
            f"gradient index {q} exceeds capacity {m_par * cfg.num_symbols} "
            f"({per} subcarriers per gradient)"
        )
    t, slot = divmod(q, m_par)
    f = slot * per + np.arange(per)
    return np.stack([np.full(per, t), f], axis=1)


def modulate(seq, rset: np.ndarray, beta: int, energy: float, rng) -> Dict[Tuple[int, int], complex]:
    """Active resource elements for one numeral sequence (MSB first).

    Each nonzero numeral lights exactly one of its ``beta - 1`` subcarriers
    with ``sqrt(energy)`` times a random unit-circle symbol; zero numerals
    transmit nothing.
    """
    seq = np.asarray(seq, dtype=np.int64)
    digits = seq.shape[0]
    if len(rset) != _per_gradient(beta, digits):
        raise DomainError("modulate: resource set does not match the numeral count")
    out = {}
    for i in range(digits):
        x = seq[digits - 1 - i]
        if x == 0:
            continue
        ell = int(symbol_index(x, beta))
        t, f = rset[i * (beta - 1) + ell]
        phase = np.exp(2j * np.pi * rng.random())
        out[(int(t), int(f))] = np.sqrt(energy) * phase
    return out


def _timing_offsets(cfg: PhyConfig, rng, size: int) -> np.ndarray:
    dft_start = rng.uniform(0.0, cfg.sync_error_samples, size=size)
    arrival = rng.uniform(0.0, cfg.sync_spread * cfg.bandwidth, size=size)
    return dft_start + arrival


def _cn(rng, shape, var=1.0) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def active_fading(rng, k_idx, f_idx, num_eds: int, width: int, R: int,
                  shared: bool) -> np.ndarray:
    """Fading ``(n, R)`` for active elements ``(k_idx[i], f_idx[i])``.

    With ``shared`` one ``(K, width, R)`` realization is drawn per call and
    every OFDM symbol slot reuses it; otherwise each element gets its own.
    """
    if not shared:
        return _cn(rng, (len(k_idx), R))
    return _cn(rng, (num_eds, width, R))[k_idx, f_idx]


def sample_channel(cfg: PhyConfig, rng) -> ChannelRealization:
    """Unit-power i.i.d. Rayleigh fading per resource element with a linear
    phase ``exp(-j 2 pi f delta_k / N_fft)`` from each device's timing offset."""
    K, R, S, M = cfg.num_eds, cfg.num_antennas, cfg.num_symbols, cfg.num_subcarriers
    h = _cn(rng, (K, R, S, M))
    delta = _timing_offsets(cfg, rng, K)
    phase = np.exp(-2j * np.pi * np.outer(delta, np.arange(M)) / cfg.fft_size)
    return ChannelRealization(h * phase[:, None, None, :], delta)


def superpose(tx_maps: Sequence[Dict[Tuple[int, int], complex]], chan: ChannelRealization,
              cfg: PhyConfig, rng) -> np.ndarray:
    """Received grid ``y[t, f, :] = sum_k h[k, :, t, f] x_k[t, f] + w``."""
    K, S, M = cfg.num_eds, cfg.num_symbols, cfg.num_subcarriers
    if len(tx_maps) != K:
        raise DomainError(f"superpose: expected {K} transmit maps, got {len(tx_maps)}")
    x = np.zeros((K, S, M), dtype=np.complex128)
    for k, tx in enumerate(tx_maps):
        for (t, f), sym in tx.items():
            x[k, t, f] = sym
    y = np.einsum("krsm,ksm->smr", chan.coefficients, x)
    if cfg.noise_var > 0:
        y = y + _cn(rng, y.shape, cfg.noise_var)
    return y


def estimate_count(y, energy: float, noise_var: float, clip: Optional[int] = None):
    """Relaxed ML count estimate ``||y||^2 / (E_s R) - sigma^2 / E_s`` over the
    last axis.  Unbiased; may be negative or fractional unless ``clip`` (the
    device count) is given."""
    y = np.asarray(y)
    R = y.shape[-1]
    power = np.sum(y.real**2 + y.imag**2, axis=-1)
    khat = power / (energy * R) - noise_var / energy
    if clip is not None:
        khat = np.clip(khat, 0, clip)
    return khat


def estimate_count_ml(y, num_eds: int, energy: float, noise_var: float) -> np.ndarray:
    """Exhaustive constrained ML counts for observations of shape ``(..., L, R)``.

    Searches every integer vector with entries in ``0..K`` summing to at most
    ``K``.  Only meant as a small-size reference.
    """
    y = np.asarray(y)
    L, R = y.shape[-2], y.shape[-1]
    K = int(num_eds)
    if (K + 1) ** L > 10**6:
        raise UnsupportedSizeError(f"search space (K+1)^L = {(K + 1) ** L} exceeds 10^6")
    power = np.sum(y.real**2 + y.imag**2, axis=-1)  # (..., L)
    n = np.arange(K + 1)
    var = energy * n + noise_var  # per-count variance of each complex entry
    with np.errstate(divide="ignore", invalid="ignore"):
        cost = 2 * R * np.log(var / 2) + 2 * power[..., None] / var
    if noise_var == 0:
        # the zero-count likelihood is a point mass: silence forces n=0,
        # any energy rules n=0 out
        silent = power == 0
        cost[silent] = np.inf
        cost[..., 0] = np.where(silent, 0.0, np.inf)
    cands = np.array([c for c in itertools.product(range(K + 1), repeat=L) if sum(c) <= K])
    total = np.zeros(power.shape[:-1] + (len(cands),))
    for ell in range(L):
        total = total + cost[..., ell, :][..., cands[:, ell]]
    best = np.argmin(total, axis=-1)
    return cands[best]


def numeral_means(khat, beta: int, num_eds: int):
    """Average numeral ``(1/K) sum_l a_l Khat_l`` over the last axis."""
    a = np.asarray(symbol_set(beta)[:-1], dtype=np.float64)
    return np.asarray(khat) @ a / num_eds


def estimate_gradient(grid: np.ndarray, rsets: Sequence[np.ndarray], codec: CodecConfig,
                      cfg: PhyConfig) -> np.ndarray:
    """Estimate each gradient from the received grid and its resource set."""
    beta, D = codec.beta, codec.digits
    energy = cfg.energy(beta)
    clip = cfg.num_eds if cfg.clip_counts else None
    out = np.empty(len(rsets))
    for q, rset in enumerate(rsets):
        y = grid[rset[:, 0], rset[:, 1]].reshape(D, beta - 1, -1)  # power index order
        khat = estimate_count(y, energy, cfg.noise_var, clip)
        mu = numeral_means(khat, beta, cfg.num_eds)[::-1]  # MSB first
        out[q] = decode(mu, codec)
    return out


def _bincount_complex(index, values, length) -> np.ndarray:
    # values: (n, R) complex -> (length, R)
    R = values.shape[1]
    out = np.empty((length, R), dtype=np.complex128)
    for r in range(R):
        out[:, r] = np.bincount(index, weights=values[:, r].real, minlength=length)
        out[:, r] += 1j * np.bincount(index, weights=values[:, r].imag, minlength=length)
    return out


def superpose_numerals(numerals, codec: CodecConfig, cfg: PhyConfig, rng,
                       first_gradient: int = 0, shared_fading: bool = False) -> np.ndarray:
    """Transmit ``numerals`` of shape ``(K, Q, D)`` through the channel.

    Returns the received vectors as ``(Q, D, beta - 1, R)`` with the ``D``
    axis most significant first.  ``first_gradient`` offsets the subcarrier
    layout so chunks of a longer gradient vector land on the right tones.
    ``shared_fading`` makes gradients mapped to the same subcarriers in
    different OFDM symbols see the same channel.
    """
    x = np.asarray(numerals, dtype=np.int64)
    K, Q, D = x.shape
    beta, R = codec.beta, cfg.num_antennas
    if K != cfg.num_eds:
        raise DomainError(f"expected numerals from {cfg.num_eds} devices, got {K}")
    if D != codec.digits:
        raise DomainError(f"expected {codec.digits} numerals per gradient, got {D}")
    L = beta - 1
    energy = cfg.energy(beta)
    idx = symbol_index(x, beta)
    k_act, q_act, d_act = np.nonzero(idx < L)
    l_act = idx[k_act, q_act, d_act]
    n_act = k_act.size

    per = L * D
    m_par = max(cfg.num_subcarriers // per, 1)
    power_idx = D - 1 - d_act
    f = ((first_gradient + q_act) % m_par) * per + power_idx * L + l_act
    h = active_fading(rng, k_act, f, K, m_par * per, R, shared_fading)
    rand = np.exp(2j * np.pi * rng.random(n_act))
    delta = _timing_offsets(cfg, rng, K)
    sync = np.exp(-2j * np.pi * f * delta[k_act] / cfg.fft_size)
    contrib = (np.sqrt(energy) * rand * sync)[:, None] * h

    flat = (q_act * D + d_act) * L + l_act
    y = _bincount_complex(flat, contrib, Q * D * L)
    if cfg.noise_var > 0:
        y += _cn(rng, y.shape, cfg.noise_var)
    return y.reshape(Q, D, L, R)


def over_the_air_average(numerals, codec: CodecConfig, cfg: PhyConfig, rng,
                         first_gradient: int = 0, shared_fading: bool = False) -> np.ndarray:
    """End-to-end estimate of the mean quantized gradient for each ``q``."""
    y = superpose_numerals(numerals, codec, cfg, rng, first_gradient, shared_fading)
    clip = cfg.num_eds if cfg.clip_counts else None
    khat = estimate_count(y, cfg.energy(codec.beta), cfg.noise_var, clip)
    return decode(numeral_means(khat, codec.beta, cfg.num_eds), codec)


def grid_to_json(grid: np.ndarray) -> str:
    """Small-grid debug dump: nested ``[re, im]`` pairs indexed ``[t][f][r]``."""
    if grid.size > 100_000:
        raise ValueError("grid too large for a JSON dump")
    return json.dumps(np.stack([grid.real, grid.imag], axis=-1).tolist())
