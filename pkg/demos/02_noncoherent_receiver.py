"""Energy-based count estimation and the end-to-end gradient estimate.

Each nonzero numeral lights one subcarrier, and the receiver turns the
received energy on that subcarrier into an estimate of how many devices
sent the symbol.  No channel knowledge is used.

Run:  python demos/02_noncoherent_receiver.py
"""

import numpy as np

from balanced_oac import CodecConfig, PhyConfig, average_numerals, decode, encode
from balanced_oac.phy import estimate_count, over_the_air_average, resource_map, superpose_numerals

codec = CodecConfig(5, 2, 1.0)
print("resource set of gradient 1:", resource_map(1, 5, 2, PhyConfig())[:, 1])

rng = np.random.default_rng(1)
K, n = 25, 20_000
for R in (1, 4, 25):
    phy = PhyConfig(num_eds=K, num_antennas=R, noise_var=0.01)
    # everybody sends the same value, so each position has 25 devices on one symbol
    x = encode(np.full((K, n), 0.37), codec)
    y = superpose_numerals(x, codec, phy, rng)
    khat = estimate_count(y, phy.energy(5), phy.noise_var)
    active = khat[:, 0, :].max(axis=-1)  # the lit subcarrier of the top numeral
    print(f"R={R:2d}: mean Khat {active.mean():6.3f}, var {active.var():7.3f}, "
          f"predicted var {(25 + 0.01 / 4) ** 2 / R:7.3f}")

phy = PhyConfig(num_eds=K, num_antennas=25, noise_var=0.01, sync_error_samples=3,
                sync_spread=55.6e-9)
g = rng.uniform(-1, 1, (K, 5))
x = encode(g, codec)
est = np.mean([over_the_air_average(x, codec, phy, rng) for _ in range(2000)], axis=0)
print("true quantized mean     :", np.round(decode(average_numerals(x), codec), 4))
print("mean of 2000 OTA rounds :", np.round(est, 4))
