"""Aggregation error against the number of receive antennas.

Closed form next to simulation for uniform inputs, plus Gaussian inputs and
Goldenbaum's analog scheme at equal resource use.  Trials are reduced so the
script runs in about a minute; the acceptance suite uses 1e5.

Run:  python demos/03_bmse_vs_antennas.py
"""

from balanced_oac import CodecConfig, PhyConfig
from balanced_oac.baselines import GoldenbaumConfig
from balanced_oac.stats import matched_v_max, mc_bmse, theoretical_bmse

TRIALS = 20_000
print(f"{'scheme':>10} {'beta':>4} {'D':>2} {'R':>3} {'uniform':>9} {'theory':>9} {'gaussian':>9}")
for beta, D in [(3, 1), (5, 2), (7, 2)]:
    codec = CodecConfig(beta, D, matched_v_max(beta, D))
    for R in (1, 5, 25):
        phy = PhyConfig(num_eds=25, num_antennas=R, noise_var=0.01)
        uni = mc_bmse("balanced", codec, phy, "uniform", TRIALS, seed=R).mean
        gau = mc_bmse("balanced", codec, phy, "gaussian", TRIALS, seed=R).mean
        th = theoretical_bmse(codec, phy).total
        print(f"{'balanced':>10} {beta:4d} {D:2d} {R:3d} {uni:9.5f} {th:9.5f} {gau:9.5f}")

gold = GoldenbaumConfig(seq_len=12)
for R in (1, 5, 25):
    phy = PhyConfig(num_eds=25, num_antennas=R, noise_var=0.01)
    uni = mc_bmse("goldenbaum", None, phy, "uniform", TRIALS, seed=R, goldenbaum=gold).mean
    print(f"{'goldenbaum':>10} {'L=12':>7} {R:3d} {uni:9.5f}")
