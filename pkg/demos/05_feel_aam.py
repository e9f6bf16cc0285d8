"""Federated training over the simulated uplink.

Compares error-free averaging, balanced numerals with a fixed range,
balanced numerals with the adaptive absolute maximum, and sign majority
voting on a heterogeneous split.  About a minute on one core.

Run:  python demos/05_feel_aam.py
"""

from dataclasses import replace

import numpy as np

from balanced_oac.feel import FeelConfig, train

base = FeelConfig(rounds=300)
runs = {
    "ideal": replace(base, scheme="ideal"),
    "balanced, v_max=1": base,
    "balanced + AAM": replace(base, aam_enabled=True),
    "heterogeneous, balanced + AAM": replace(base, aam_enabled=True, partition="heterogeneous"),
    "heterogeneous, FSK-MV": replace(base, scheme="fskmv", partition="heterogeneous"),
}
for name, cfg in runs.items():
    tr = train(cfg, seed=0)
    tail = tr[-30:]
    acc = np.mean([t.test_accuracy for t in tail])
    loss = np.mean([t.loss for t in tail])
    print(f"{name:32s} accuracy {acc:.3f}  loss {loss:.4f}  final v_max {tr[-1].v_max_used:.3g}")

# Under AAM the per-coordinate error follows v_max^2.
tr = train(replace(base, aam_enabled=True), seed=0)[1:]
x = np.array([t.v_max_used**2 for t in tr])
y = np.array([t.bmse_proxy for t in tr])
slope = np.polyfit(x, y, 1)[0]
print(f"error vs v_max^2: slope {slope:.4f}, R^2 {np.corrcoef(x, y)[0, 1] ** 2:.3f}")
