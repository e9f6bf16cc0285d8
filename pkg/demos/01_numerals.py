"""Balanced numerals: encoding, decoding and averaging across devices.

Run:  python demos/01_numerals.py
"""

import numpy as np

from balanced_oac import CodecConfig, average_numerals, counts_from_numerals, decode, encode, symbol_set

cfg = CodecConfig(beta=5, digits=3, v_max=1.0)
print("symbol set, base 5:", symbol_set(5))
print(f"xi = {cfg.xi}, step = {cfg.step:.5f}")

# Two devices hold 0.28 and -0.86.
x = encode([0.28, -0.86], cfg)
print("numerals (most significant first):")
print(x)
print("reconstructions:", decode(x, cfg), "(17/62 and -53/62)")

# The receiver only needs the position-wise average of the numerals.
mu = average_numerals(x)
print("average numerals:", mu)
print("decoded average :", decode(mu, cfg), " mean of reconstructions:", decode(x, cfg).mean())

# Per position, the average follows from how many devices sent each symbol.
for i in range(cfg.digits - 1, -1, -1):
    print(f"position {i}: counts {counts_from_numerals(x, i, 5)}")

# Quantization error never exceeds half a step inside the range.
rng = np.random.default_rng(0)
v = rng.uniform(-1, 1, 100_000)
err = np.abs(decode(encode(v, cfg), cfg) - v)
print(f"max |error| over 1e5 values: {err.max():.5f}  (half step {cfg.step / 2:.5f})")
