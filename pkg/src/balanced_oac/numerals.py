"""Balanced (signed-digit) number system codec.

A real value is clamped to ``[-v_max, v_max]``, mapped to an integer in
``[0, 2*xi]`` and expanded in base ``beta``; shifting every digit by
``(beta - 1) / 2`` gives numerals in the symmetric symbol set.  Numeral
sequences are stored most-significant-first, ``(x_{D-1}, ..., x_0)``, along
the last array axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "InvalidConfigError",
    "DomainError",
    "CodecConfig",
    "symbol_set",
    "encode",
    "decode",
    "quantize",
    "average_numerals",
    "counts_from_numerals",
]


class InvalidConfigError(ValueError):
    """Raised for parameter combinations the codec cannot represent."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.reason = message
        super().__init__(f"{field}: {message}")


class DomainError(ValueError):
    """Raised for inputs outside an operation's domain."""


def _check_beta(beta) -> int:
    if isinstance(beta, bool) or int(beta) != beta:
        raise InvalidConfigError("beta", f"base must be an integer, got {beta!r}")
    beta = int(beta)
    if beta < 3 or beta % 2 == 0:
        raise InvalidConfigError("beta", f"base must be odd and >= 3, got {beta}")
    return beta


@dataclass(frozen=True)
class CodecConfig:
    """One balanced quantizer: base ``beta``, ``digits`` numerals, range ``v_max``."""

    beta: int
    digits: int
    v_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta", _check_beta(self.beta))
        if isinstance(self.digits, bool) or int(self.digits) != self.digits or self.digits < 1:
            raise InvalidConfigError("digits", f"must be a positive integer, got {self.digits!r}")
        object.__setattr__(self, "digits", int(self.digits))
        if self.beta ** self.digits >= 2**62:
            raise InvalidConfigError("digits", "beta**digits overflows 64-bit integers")
        if not np.isfinite(self.v_max) or self.v_max <= 0:
            raise InvalidConfigError("v_max", f"must be a positive finite real, got {self.v_max!r}")
        object.__setattr__(self, "v_max", float(self.v_max))

    @property
    def levels(self) -> int:
        """Number of reconstruction levels, ``beta**D``."""
        return self.beta**self.digits

    @property
    def xi(self) -> int:
        return (self.levels - 1) // 2

    @property
    def step(self) -> float:
        """Quantization step size."""
        return 2.0 * self.v_max / (self.levels - 1)

    @property
    def v_max_prime(self) -> float:
        """Edge of the no-overload region, ``v_max + step/2``."""
        return self.v_max + self.step / 2

    @property
    def weights(self) -> np.ndarray:
        """Positional weights ``beta**i`` in most-significant-first order."""
        return self.beta ** np.arange(self.digits - 1, -1, -1, dtype=np.int64)

    def with_v_max(self, v_max: float) -> "CodecConfig":
        return CodecConfig(self.beta, self.digits, v_max)


def symbol_set(beta: int) -> tuple:
    """Ordered symbols ``(a_0, ..., a_{beta-1})``; the last one is zero.

    >>> symbol_set(5)
    (-1, 1, -2, 2, 0)
    """
    beta = _check_beta(beta)
    out = []
    for j in range(beta):
        if j == beta - 1:
            out.append(0)
        elif j % 2:
            out.append((j + 1) // 2)
        else:
            out.append(-(j + 2) // 2)
    return tuple(out)


def symbol_index(numerals, beta: int) -> np.ndarray:
    """Inverse of :func:`symbol_set`: map numerals to their index ``j``."""
    x = np.asarray(numerals, dtype=np.int64)
    j = np.where(x > 0, 2 * x - 1, -2 * x - 2)
    return np.where(x == 0, beta - 1, j)


def encode(v, cfg: CodecConfig) -> np.ndarray:
    """Encode real value(s) into balanced numerals.

    Returns an integer array with a trailing axis of length ``cfg.digits``,
    most significant numeral first.  Values outside ``[-v_max, v_max]`` are
    clamped.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise DomainError("encode: input contains non-finite values")
    xi = cfg.xi
    clamped = np.clip(v, -cfg.v_max, cfg.v_max)
    level = np.floor(xi / cfg.v_max * clamped + xi + 0.5).astype(np.int64)
    level = np.clip(level, 0, 2 * xi)
    unbalanced = (level[..., None] // cfg.weights) % cfg.beta
    return unbalanced - (cfg.beta - 1) // 2


def decode(numerals, cfg: CodecConfig):
    """Map a (possibly fractional) numeral sequence back to the real line."""
    x = np.asarray(numerals, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != cfg.digits:
        raise DomainError(
            f"decode: expected {cfg.digits} numerals along the last axis, got shape {x.shape}"
        )
    out = (cfg.v_max / cfg.xi) * (x @ cfg.weights.astype(np.float64))
    return float(out) if out.ndim == 0 else out


def quantize(v, cfg: CodecConfig):
    """Mid-tread uniform quantization, ``decode(encode(v))``."""
    return decode(encode(v, cfg), cfg)


def average_numerals(seqs) -> np.ndarray:
    """Position-wise mean over devices (axis 0) of numeral sequences."""
    try:
        x = np.asarray(seqs, dtype=np.float64)
    except ValueError as exc:
        raise DomainError("average_numerals: sequences have mixed lengths") from exc
    if x.ndim < 2 or x.shape[0] == 0:
        raise DomainError("average_numerals: need a non-empty list of sequences")
    return x.mean(axis=0)


def counts_from_numerals(seqs, position: int, beta: int) -> np.ndarray:
    """Number of devices sending each symbol ``a_0 .. a_{beta-1}`` at ``position``.

    ``position`` is the power index ``i`` (0 is the least significant
    numeral).  Entry ``beta-1`` counts the zero symbol, which occupies no
    subcarrier.
    """
    beta = _check_beta(beta)
    x = np.asarray(seqs, dtype=np.int64)
    if x.ndim != 2:
        raise DomainError("counts_from_numerals: expected a (K, D) array of numerals")
    D = x.shape[1]
    if not 0 <= position < D:
        raise DomainError(f"counts_from_numerals: position {position} outside 0..{D - 1}")
    half = (beta - 1) // 2
    column = x[:, D - 1 - position]
    if np.any(np.abs(column) > half):
        raise DomainError("counts_from_numerals: numeral outside the symbol set")
    return np.bincount(symbol_index(column, beta), minlength=beta)
