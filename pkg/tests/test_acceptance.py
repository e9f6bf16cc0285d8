"""Acceptance gate: one test per primary criterion, each printing a
PASS/FAIL line (collected again in the terminal summary)."""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from balanced_oac import (
    CodecConfig,
    PhyConfig,
    average_numerals,
    counts_from_numerals,
    decode,
    encode,
    quantize,
)
from balanced_oac import cli
from balanced_oac.baselines import GoldenbaumConfig
from balanced_oac.feel import FeelConfig, train
from balanced_oac.phy import estimate_count, estimate_count_ml, superpose_numerals
from balanced_oac.stats import error_histogram, matched_v_max, mc_bmse, theoretical_bmse

pytestmark = pytest.mark.acceptance


def test_codec_fidelity(criterion):
    worst = 0.0
    for beta in (3, 5, 7):
        for D in (1, 2, 3):
            cfg = CodecConfig(beta, D, 1.0)
            v = np.random.default_rng(beta * 10 + D).uniform(-1, 1, 100_000)
            worst = max(worst, np.max(np.abs(quantize(v, cfg) - v)) / (cfg.step / 2))
    b5 = CodecConfig(5, 3, 1.0)
    examples = (
        encode(0.28, b5).tolist() == [1, -2, 2]
        and encode(-0.86, b5).tolist() == [-2, -1, 2]
        and decode([1, -2, 2], b5) * 62 == pytest.approx(17, abs=1e-12)
        and decode([-2, -1, 2], b5) * 62 == pytest.approx(-53, abs=1e-12)
        and decode(average_numerals([[1, -2, 2], [-2, -1, 2]]), b5) * 62
        == pytest.approx(-18, abs=1e-12)
    )
    ok = worst <= 1 + 1e-12 and examples
    assert criterion("codec fidelity", ok,
                     f"max |err|/(step/2) = {worst:.6f}, worked examples exact = {examples}")


def test_averaging_identity(criterion):
    rng = np.random.default_rng(1)
    worst = 0.0
    for K in (1, 2, 25):
        for beta, D in [(3, 1), (3, 3), (5, 2), (5, 3), (7, 2), (7, 3)]:
            cfg = CodecConfig(beta, D, 1.0)
            x = encode(rng.uniform(-1.2, 1.2, (10_000, K)), cfg)  # cohorts on axis 0
            lhs = decode(x.mean(axis=1), cfg)
            rhs = decode(x, cfg).mean(axis=1)
            worst = max(worst, np.max(np.abs(lhs - rhs)))
    assert criterion("averaging identity", worst <= 1e-12, f"max deviation {worst:.2e}")


def test_estimator_laws(criterion):
    E_s, s2, n = 4.0, 0.01, 1_000_000
    rng = np.random.default_rng(2)
    bad = []
    worst_var = 0.0
    for k in (0, 1, 5, 25):
        for R in (1, 4, 25):
            # K_l unit-modulus symbols through i.i.d. Rayleigh paths add up to a
            # complex Gaussian of variance E_s K_l; noise adds s2
            sd = math.sqrt((E_s * k + s2) / 2)
            y = sd * (rng.standard_normal((n, R)) + 1j * rng.standard_normal((n, R)))
            khat = estimate_count(y, E_s, s2)
            var = (k + s2 / E_s) ** 2 / R
            mean_ok = abs(khat.mean() - k) <= 3 * math.sqrt(var / n)
            rel = abs(khat.var() / var - 1)
            worst_var = max(worst_var, rel)
            if not (mean_ok and rel <= 0.03):
                bad.append((k, R))
    assert criterion("estimator laws", not bad,
                     f"worst variance deviation {worst_var:.4f}, failing (K_l, R) = {bad}")


def test_closed_form_matches_simulation(criterion):
    worst, where = 0.0, None
    t0 = time.time()
    for beta in (3, 5, 7):
        for D in (1, 2):
            codec = CodecConfig(beta, D, matched_v_max(beta, D))
            for R in (1, 5, 10, 25):
                phy = PhyConfig(num_eds=25, num_antennas=R, noise_var=0.01)
                sim = mc_bmse("balanced", codec, phy, "uniform", 100_000, seed=100 + R)
                th = theoretical_bmse(codec, phy).total
                rel = abs(sim.mean / th - 1)
                if rel > worst:
                    worst, where = rel, (beta, D, R, sim.mean, th)
    ok = worst <= 0.05
    assert criterion("closed form vs simulation", ok,
                     f"worst relative gap {worst:.4f} at (beta, D, R, sim, theory) = {where}; "
                     f"{time.time() - t0:.0f}s")


def test_gaussian_inputs_below_uniform_theory(criterion):
    parts, ok = [], True
    for D in (1, 2):
        codec = CodecConfig(3, D, matched_v_max(3, D))
        phy = PhyConfig(num_eds=25, num_antennas=1, noise_var=0.01)
        sim = mc_bmse("balanced", codec, phy, "gaussian", 100_000, seed=40 + D).mean
        th = theoretical_bmse(codec, phy).total
        ok &= sim < th and abs(sim / 0.07 - 1) <= 0.30
        parts.append(f"beta=3 D={D}: gaussian {sim:.4f} vs uniform theory {th:.4f}")
    assert criterion("gaussian inputs", ok, "; ".join(parts))


def test_error_skewness(criterion):
    codec = CodecConfig(7, 2, matched_v_max(7, 2))
    gold = GoldenbaumConfig(seq_len=12, v_max=1.0)
    phy1 = PhyConfig(num_eds=25, num_antennas=1, noise_var=0.01)
    phy25 = replace(phy1, num_antennas=25)
    prop = error_histogram("balanced", codec, phy1, trials=50_000, seed=5).skewness
    g1 = error_histogram("goldenbaum", None, phy1, trials=50_000, seed=6, goldenbaum=gold).skewness
    g25 = error_histogram("goldenbaum", None, phy25, trials=50_000, seed=7, goldenbaum=gold).skewness
    ok = abs(prop) < 0.1 and abs(g1) >= 3 * abs(prop) and abs(g25) < abs(g1)
    assert criterion("error skewness", ok,
                     f"proposed {prop:+.4f}, Goldenbaum R=1 {g1:+.4f}, Goldenbaum R=25 {g25:+.4f}")


def _tail(traces, field):
    n = max(1, len(traces) // 10)
    return float(np.mean([getattr(t, field) for t in traces[-n:]]))


def test_feel_desk_scale(criterion):
    t0 = time.time()
    base = FeelConfig(rounds=300, codec=CodecConfig(5, 2, 1.0))
    hom = dict(
        ideal=train(replace(base, scheme="ideal"), seed=0),
        aam=train(replace(base, aam_enabled=True), seed=0),
        fixed=train(base, seed=0),
    )
    het_base = replace(base, partition="heterogeneous")
    het = dict(
        aam=train(replace(het_base, aam_enabled=True), seed=0),
        fskmv=train(replace(het_base, scheme="fskmv"), seed=0),
    )
    acc = {k: _tail(v, "test_accuracy") for k, v in hom.items()}
    loss = {k: _tail(v, "loss") for k, v in hom.items()}
    het_acc = {k: _tail(v, "test_accuracy") for k, v in het.items()}
    aam_rounds = hom["aam"][1:]  # round 0 uses the configured range, not AAM
    x = np.array([t.v_max_used**2 for t in aam_rounds])
    y = np.array([t.bmse_proxy for t in aam_rounds])
    r2 = float(np.corrcoef(x, y)[0, 1] ** 2)
    elapsed = time.time() - t0
    checks = {
        "a": acc["ideal"] - acc["aam"] <= 0.03,
        "b": loss["fixed"] > loss["ideal"],
        "c": acc["aam"] > acc["fixed"],
        "d": het_acc["aam"] > het_acc["fskmv"],
        "e": r2 >= 0.8,
        "runtime": elapsed <= 15 * 60,
    }
    detail = (f"acc ideal {acc['ideal']:.3f} / aam {acc['aam']:.3f} / fixed {acc['fixed']:.3f}; "
              f"loss ideal {loss['ideal']:.4f} / fixed {loss['fixed']:.4f}; "
              f"heterogeneous aam {het_acc['aam']:.3f} vs fskmv {het_acc['fskmv']:.3f}; "
              f"R^2 {r2:.3f}; {elapsed:.0f}s; "
              + " ".join(f"{k}={'ok' if v else 'no'}" for k, v in checks.items()))
    assert criterion("desk-scale FEEL", all(checks.values()), detail)


def test_determinism(criterion, tmp_path, capsys):
    runs = {
        "encode": ["--v", "0.28", "--beta", "5", "--digits", "3"],
        "decode": ["--numerals", "1,-2,2", "--beta", "5", "--digits", "3"],
        "mse": ["--set", "trials=3000", "--set", "phy.sync_error_samples=3"],
        "hist": ["--set", "trials=3000", "--set", "scheme=\"goldenbaum\""],
        "train": ["--set", "train.rounds=5", "--set", "train.aam_enabled=true"],
        "sweep": ["--set", "trials=500",
                  "--set", 'sweep.grid={"codec.beta": [3, 7], "scheme": ["balanced", "goldenbaum"]}'],
    }
    same = {}
    for cmd, extra in runs.items():
        files = {}
        for rep in ("a", "b"):
            out = tmp_path / cmd / rep
            assert cli.main([cmd, "--seed", "3", "--out", str(out)] + extra) == 0
            files[rep] = {p.relative_to(out): p.read_bytes() for p in out.rglob("*.csv")}
        same[cmd] = bool(files["a"]) and files["a"] == files["b"]
    capsys.readouterr()
    assert criterion("determinism", all(same.values()),
                     ", ".join(f"{k} {'identical' if v else 'DIFFERS'}" for k, v in same.items()))


def test_constrained_ml_agreement(criterion):
    K, beta, R, s2, n = 3, 3, 25, 1e-3, 10_000
    codec = CodecConfig(beta, 1, 1.0)
    phy = PhyConfig(num_eds=K, num_antennas=R, noise_var=s2)
    rng = np.random.default_rng(9)
    x = rng.integers(-1, 2, size=(K, n, 1))  # uniform numerals per device
    y = superpose_numerals(x, codec, phy, rng)[:, 0]  # (n, beta-1, R)
    E_s = phy.energy(beta)
    relaxed = np.clip(np.rint(estimate_count(y, E_s, s2)), 0, K).astype(int)
    ml = estimate_count_ml(y, K, E_s, s2)
    truth = np.stack([np.array([counts_from_numerals(x[:, t], 0, beta)[:-1]]) for t in range(n)])[:, 0]
    agree = float(np.mean(np.all(relaxed == ml, axis=1)))
    per_count = float(np.mean(relaxed == ml))
    detail = (f"vector agreement {agree:.4f} (per-count {per_count:.4f}); "
              f"ML exact {np.mean(np.all(ml == truth, axis=1)):.4f}, "
              f"relaxed exact {np.mean(np.all(relaxed == truth, axis=1)):.4f}")
    assert criterion("constrained-ML agreement", agree >= 0.95, detail)
