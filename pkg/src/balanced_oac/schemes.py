"""Dispatch of one aggregation round to the selected scheme."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .baselines import GoldenbaumConfig, fskmv_aggregate, goldenbaum_aggregate
from .numerals import CodecConfig, encode
from .phy import PhyConfig, over_the_air_average

SCHEMES = ("balanced", "goldenbaum", "fskmv", "ideal")


def resources_per_gradient(scheme: str, codec: Optional[CodecConfig] = None,
                           goldenbaum: Optional[GoldenbaumConfig] = None) -> int:
    """Subcarriers consumed by one gradient entry."""
    if scheme == "balanced":
        return (codec.beta - 1) * codec.digits
    if scheme == "goldenbaum":
        return goldenbaum.seq_len
    if scheme == "fskmv":
        return 2
    if scheme == "ideal":
        return 0
    raise ValueError(f"unknown scheme {scheme!r}")


def aggregate(grads, scheme: str, rng, *, phy: Optional[PhyConfig] = None,
              codec: Optional[CodecConfig] = None,
              goldenbaum: Optional[GoldenbaumConfig] = None,
              shared_fading: bool = False) -> np.ndarray:
    """Estimate the column means of ``grads`` (shape ``(K, Q)``).

    ``fskmv`` returns the majority-vote sign vector instead of a mean.
    ``shared_fading`` reuses one channel realization across OFDM symbol
    slots, as in a training round.
    """
    g = np.asarray(grads, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("grads must have shape (K, Q)")
    if scheme == "ideal":
        return g.mean(axis=0)
    if scheme == "balanced":
        return over_the_air_average(encode(g, codec), codec, phy, rng,
                                    shared_fading=shared_fading)
    if scheme == "goldenbaum":
        return goldenbaum_aggregate(g, goldenbaum, phy, rng, shared_fading)
    if scheme == "fskmv":
        return fskmv_aggregate(g, phy, rng, shared_fading)
    raise ValueError(f"unknown scheme {scheme!r}")
