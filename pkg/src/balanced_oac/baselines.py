"""Non-coherent comparison schemes.

Goldenbaum's scheme sends ``sqrt(a*v + b)`` on a random QPSK sequence and
recovers the sum from the received energy; FSK majority vote lights one of
two subcarriers by gradient sign and compares energies at the receiver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phy import PhyConfig, _bincount_complex, _cn, active_fading

__all__ = [
    "GoldenbaumConfig",
    "goldenbaum_tx",
    "goldenbaum_rx",
    "goldenbaum_aggregate",
    "FSKMV_ENERGY",
    "fskmv_sign",
    "fskmv_tx",
    "fskmv_rx",
    "fskmv_aggregate",
]

_QPSK = np.array([1, -1, 1j, -1j])

# Each FSK-MV gradient uses 2 subcarriers, only one of which is active.
FSKMV_ENERGY = 2.0


@dataclass(frozen=True)
class GoldenbaumConfig:
    """Sequence length ``seq_len`` and range ``v_max`` of the analog scheme.

    The pre-processing map is ``eps(v) = a*v + b`` with ``a = 1/v_max`` and
    ``b = 1``, so ``eps`` spans ``[0, 2]`` for every ``v_max``.
    """

    seq_len: int = 12
    v_max: float = 1.0

    def __post_init__(self):
        if int(self.seq_len) < 1:
            raise ValueError("seq_len must be >= 1")
        if not self.v_max > 0:
            raise ValueError("v_max must be positive")

    @property
    def a(self) -> float:
        return 1.0 / self.v_max

    @property
    def b(self) -> float:
        return 1.0

    def eps(self, v):
        return self.a * np.clip(v, -self.v_max, self.v_max) + self.b

    def with_v_max(self, v_max: float) -> "GoldenbaumConfig":
        return GoldenbaumConfig(self.seq_len, v_max)


def goldenbaum_tx(v, cfg: GoldenbaumConfig, rng) -> np.ndarray:
    """Transmit sequence(s) for value(s) ``v``; trailing axis of length ``seq_len``."""
    v = np.asarray(v, dtype=np.float64)
    amp = np.sqrt(cfg.eps(v))
    theta = _QPSK[rng.integers(0, 4, size=v.shape + (cfg.seq_len,))]
    return amp[..., None] * theta


def goldenbaum_rx(y, num_eds: int, noise_var: float, cfg: GoldenbaumConfig):
    """Estimate the mean from received sequences of shape ``(..., L, R)``.

    Energy is averaged over the sequence and the antennas, the noise power is
    removed, the affine map is inverted and the mean is clamped to the
    input range.
    """
    y = np.asarray(y)
    energy = np.mean(y.real**2 + y.imag**2, axis=(-2, -1)) - noise_var
    total = (energy - num_eds * cfg.b) / cfg.a
    return np.clip(total / num_eds, -cfg.v_max, cfg.v_max)


def goldenbaum_aggregate(grads, cfg: GoldenbaumConfig, phy: PhyConfig, rng,
                         shared_fading: bool = False) -> np.ndarray:
    """Mean estimate for each column of ``grads`` (shape ``(K, Q)``)."""
    g = np.asarray(grads, dtype=np.float64)
    K, Q = g.shape
    L, R = cfg.seq_len, phy.num_antennas
    x = goldenbaum_tx(g, cfg, rng)  # (K, Q, L)
    if shared_fading:
        m_par = max(phy.num_subcarriers // L, 1)
        f = (np.arange(Q) % m_par)[:, None] * L + np.arange(L)
        h = _cn(rng, (K, m_par * L, R))[:, f]
    else:
        h = _cn(rng, (K, Q, L, R))
    y = np.einsum("kqlr,kql->qlr", h, x)
    if phy.noise_var > 0:
        y += _cn(rng, y.shape, phy.noise_var)
    return goldenbaum_rx(y, K, phy.noise_var, cfg)


def fskmv_sign(g):
    """Vote of each gradient entry; zero votes +1."""
    return np.where(np.asarray(g) >= 0, 1, -1)


def fskmv_tx(sign, energy: float = FSKMV_ENERGY) -> np.ndarray:
    """``(x_plus, x_minus)`` for a +1 / -1 vote."""
    if sign not in (-1, 1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    amp = np.sqrt(energy)
    return np.array([amp, 0.0]) if sign == 1 else np.array([0.0, amp])


def fskmv_rx(y_plus, y_minus):
    """Majority vote by energy comparison over the last (antenna) axis; ties
    go to +1."""
    y_plus, y_minus = np.asarray(y_plus), np.asarray(y_minus)
    e_plus = np.sum(y_plus.real**2 + y_plus.imag**2, axis=-1)
    e_minus = np.sum(y_minus.real**2 + y_minus.imag**2, axis=-1)
    out = np.where(e_plus >= e_minus, 1, -1)
    return int(out) if out.ndim == 0 else out


def fskmv_aggregate(grads, phy: PhyConfig, rng, shared_fading: bool = False) -> np.ndarray:
    """Over-the-air majority vote of the signs of each column of ``grads``."""
    g = np.asarray(grads, dtype=np.float64)
    K, Q = g.shape
    R = phy.num_antennas
    tone = (fskmv_sign(g) == -1).astype(np.int64)  # 0: plus tone, 1: minus tone
    flat = (np.arange(Q)[None, :] * 2 + tone).ravel()
    m_par = max(phy.num_subcarriers // 2, 1)
    k_idx = np.repeat(np.arange(K), Q)
    h = active_fading(rng, k_idx, flat % (2 * m_par), K, 2 * m_par, R, shared_fading)
    y = _bincount_complex(flat, np.sqrt(FSKMV_ENERGY) * h, 2 * Q)
    if phy.noise_var > 0:
        y += _cn(rng, y.shape, phy.noise_var)
    y = y.reshape(Q, 2, R)
    return fskmv_rx(y[:, 0], y[:, 1]).astype(np.float64)
