"""Shape of the aggregation error: symmetric for balanced numerals, skewed
for the analog energy scheme until the channel hardens.

Run:  python demos/04_error_skewness.py
"""

import numpy as np

from balanced_oac import CodecConfig, PhyConfig
from balanced_oac.baselines import GoldenbaumConfig
from balanced_oac.stats import error_histogram, matched_v_max

codec = CodecConfig(7, 2, matched_v_max(7, 2))
gold = GoldenbaumConfig(seq_len=12)


def sketch(h, width=50):
    # coarse text histogram over 20 bins
    c = h.counts.reshape(20, -1).sum(axis=1)
    for left, n in zip(h.edges[::5], c):
        print(f"  {left:+.2f} {'#' * int(width * n / c.max())}")


for R in (1, 25):
    phy = PhyConfig(num_eds=25, num_antennas=R, noise_var=0.01)
    b = error_histogram("balanced", codec, phy, trials=50_000, seed=1, value_range=(-0.5, 0.5))
    g = error_histogram("goldenbaum", None, phy, trials=50_000, seed=2, goldenbaum=gold,
                        value_range=(-0.5, 0.5))
    print(f"R={R}: skewness balanced {b.skewness:+.3f}, Goldenbaum {g.skewness:+.3f}")
    if R == 1:
        print(" balanced"); sketch(b)
        print(" Goldenbaum"); sketch(g)
