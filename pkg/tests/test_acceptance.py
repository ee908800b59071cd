"""Acceptance criteria, one test each, run at their stated tolerances.

Every test prints a single ``[PASS]``/``[FAIL]`` line (collected into the
pytest terminal summary as well). Run directly with
``python tests/test_acceptance.py`` to get just those lines.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from kinopt import _kernels
from kinopt.dsmc import DsmcConfig, DsmcSimulation, smooth
from kinopt.exp import ExperimentConfig, SyntheticSpec, bench_overhead, run_condensation
from kinopt.kinetic import (
    CollisionMode,
    KineticConfig,
    PreconditionError,
    check_stable_phase,
    hard_collision,
    thm3_oracle,
)
from kinopt.linalg import make_rng
from kinopt.metrics import cosine_matrix, neuron_similarity, weight_correlation
from kinopt.net import Network, gradient_check

from reference import cosine_matrix_loops, neuron_similarity_loops, weight_correlation_loops

REPORT: list[str] = []


def report(cid, title, ok, detail, elapsed, limit):
    within = elapsed < limit
    line = f"[{'PASS' if ok and within else 'FAIL'}] {cid} {title}: {detail}; {elapsed:.1f} s (limit {limit} s)"
    REPORT.append(line)
    print(line, flush=True)
    return ok and within


# 1 -----------------------------------------------------------------------------


def test_c01_pairwise_conservation():
    t0 = time.perf_counter()
    rng = make_rng(1, "acceptance.c1")
    cfg = KineticConfig(mode=CollisionMode.HARD, coll_coef=1.0)
    dims = (1, 2, 8, 512)
    per_dim = 100_000 // len(dims)
    worst_p = worst_e = 0.0
    collided = 0
    for d in dims:
        for _ in range(per_dim):
            w = 0.1 * rng.standard_normal((2, d))
            g = rng.standard_normal((2, d))
            if _kernels.hard_pairs(w, g, cfg.coll_coef, False)[0].size != 1:
                continue
            # an accepted pair may scatter back onto itself, so count acceptances, not changes
            collided += 1
            out = hard_collision(w, g, cfg, rng)
            worst_p = max(worst_p, float(np.max(np.abs(out.sum(axis=0) - g.sum(axis=0)))))
            e0 = float(np.sum(g * g))
            worst_e = max(worst_e, abs(float(np.sum(out * out)) - e0) / e0)
    elapsed = time.perf_counter() - t0
    ok = collided == 100_000 and worst_p < 1e-12 and worst_e < 1e-12
    detail = f"{collided}/100000 pairs accepted, max momentum abs err {worst_p:.2e}, max energy rel err {worst_e:.2e}"
    assert report("C1", "pairwise conservation", ok, detail, elapsed, 10)


# 2 -----------------------------------------------------------------------------


def test_c02_identity_at_zero_coefficient():
    t0 = time.perf_counter()
    cfg = ExperimentConfig(epochs=100)  # full batch: one step per epoch
    base = run_condensation(cfg, seed=0)
    same = []
    for mode in ("soft", "hard"):
        ko = run_condensation(dataclasses.replace(cfg, kinetic=KineticConfig(mode=mode, coll_coef=0.0)), seed=0)
        params = all(np.array_equal(a, b) for a, b in zip(base.network.parameters(), ko.network.parameters()))
        losses = [r.train_loss for r in base.records] == [r.train_loss for r in ko.records]
        same.append(params and losses)
    elapsed = time.perf_counter() - t0
    detail = f"bit-identical over 100 steps: soft={same[0]}, hard={same[1]}"
    assert report("C2", "identity at coll_coef=0", all(same), detail, elapsed, 5)


# 3, 4 ---------------------------------------------------------------------------


def stable_instances(rng, count, d, *, hard):
    """Gaussian two-neuron (w, g) draws kept only if the stable-phase conditions hold."""
    out = []
    while len(out) < count:
        w = rng.standard_normal((2, d))
        g = rng.standard_normal((2, d))
        try:
            check_stable_phase(w, g, hard=hard)
        except PreconditionError:
            continue
        out.append((w, g))
    return out


def test_c03_soft_oracle():
    t0 = time.perf_counter()
    rng = make_rng(3, "acceptance.c3")
    cfg = KineticConfig(mode="soft", coll_coef=0.1, soft_zero_diagonal=True)
    below = 0
    for w, g in stable_instances(rng, 1000, 5, hard=False):
        rep = thm3_oracle(w, g, 1e-6, cfg)
        below += rep.cos_collision < rep.cos_plain
    elapsed = time.perf_counter() - t0
    rate = below / 1000
    detail = f"collision step below plain step in {below}/1000 instances ({rate:.1%}, need >= 99%)"
    assert report("C3", "soft-mode correlation oracle", rate >= 0.99, detail, elapsed, 10)


def test_c04_hard_oracle():
    t0 = time.perf_counter()
    rng = make_rng(4, "acceptance.c4")
    draws = make_rng(4, "acceptance.c4.draws")
    cfg = KineticConfig(mode="hard", coll_coef=1.0)
    below = 0
    for w, g in stable_instances(rng, 200, 5, hard=True):
        rep = thm3_oracle(w, g, 1e-6, cfg, n_draws=10_000, rng=draws)
        below += rep.cos_collision < rep.cos_plain
    elapsed = time.perf_counter() - t0
    rate = below / 200
    detail = f"mean over 10^4 draws below plain step in {below}/200 instances ({rate:.1%}, need >= 95%)"
    assert report("C4", "hard-mode correlation oracle", rate >= 0.95, detail, elapsed, 60)


# 5 -----------------------------------------------------------------------------


def test_c05_condensation_experiment():
    t0 = time.perf_counter()
    base_cfg = ExperimentConfig(activation="tanh", dims=(5, 50, 1), init_std=0.005, epochs=100)
    seeds = range(5)
    wins = {}
    for mode in ("soft", "hard"):
        cfg = dataclasses.replace(base_cfg, kinetic=KineticConfig(mode=mode, coll_coef=0.1))
        count = 0
        for s in seeds:
            a = run_condensation(base_cfg, seed=s).records[-1]
            b = run_condensation(cfg, seed=s).records[-1]
            count += b.weight_correlation < a.weight_correlation and b.neuron_similarity < a.neuron_similarity
        wins[mode] = count
    elapsed = time.perf_counter() - t0
    ok = wins["soft"] >= 4 and wins["hard"] >= 3
    detail = f"both metrics lower: soft {wins['soft']}/5 (need 4), hard {wins['hard']}/5 (need 3)"
    assert report("C5", "condensation experiment", ok, detail, elapsed, 120)


# 6 -----------------------------------------------------------------------------


def test_c06_dsmc_h_theorem():
    t0 = time.perf_counter()
    cfg = DsmcConfig(n_particles=10_000, init="equal_speed", n_steps=2000)
    sim = DsmcSimulation(cfg)
    e0 = sim.system.kinetic_energy(cfg.mass)
    rows = sim.run()
    h = smooth([r["H"] for r in rows], 10)
    drop = h[0] - h[-1]
    # largest climb of the smoothed series above its running minimum
    rise = float(np.max(h - np.minimum.accumulate(h)))
    ks = rows[-1]["mb_distance"]
    drift = abs(rows[-1]["kinetic_energy"] - e0) / e0
    elapsed = time.perf_counter() - t0
    ok = drop > 0 and rise <= 0.02 * drop and ks < 0.05 and drift < 1e-10
    detail = (f"H drop {drop:.4f}, worst smoothed rise {rise / drop:.2%} of drop, "
              f"final KS {ks:.4f}, energy drift {drift:.1e}")
    assert report("C6", "DSMC H-theorem", ok, detail, elapsed, 60)


# 7 -----------------------------------------------------------------------------


def test_c07_dsmc_candidate_rate():
    t0 = time.perf_counter()
    cfg = DsmcConfig(n_particles=200, cells=(2, 1, 1), diameter=0.1, init="maxwell", seed=7)
    sim = DsmcSimulation(cfg)
    steps = 10_000
    for _ in range(steps):
        sim.step(track_expected=True)
    measured = sim.stats.collisions / steps
    expected = sim.stats.expected_collisions / steps
    rel = measured / expected - 1.0
    elapsed = time.perf_counter() - t0
    detail = f"{measured:.4f} collisions/step vs expected {expected:.4f} ({rel:+.3%}, need within 5%)"
    assert report("C7", "DSMC candidate count", abs(rel) <= 0.05, detail, elapsed, 60)


# 8 -----------------------------------------------------------------------------


def test_c08_overhead():
    t0 = time.perf_counter()
    small = ExperimentConfig()
    ratios = {}
    for mode in ("soft", "hard"):
        cfg = dataclasses.replace(small, kinetic=KineticConfig(mode=mode, coll_coef=0.1))
        base, ko = bench_overhead(cfg, steps=1000, warmup=100)
        ratios[f"{mode} 50x5"] = ko / base
    # 512 neurons with 1024 inputs, one batch of 128 samples per step
    large = ExperimentConfig(dims=(1024, 512, 1), data=SyntheticSpec(n_samples=128, input_dim=1024),
                             kinetic=KineticConfig(mode="soft", coll_coef=0.1))
    base, ko = bench_overhead(large, steps=200, warmup=20)
    ratios["soft 512x1024"] = ko / base
    elapsed = time.perf_counter() - t0
    limits = {"soft 50x5": 1.10, "hard 50x5": 1.10, "soft 512x1024": 1.25}
    ok = all(ratios[k] <= limits[k] for k in limits)
    detail = ", ".join(f"{k} {ratios[k]:.3f}x (<= {limits[k]})" for k in limits)
    assert report("C8", "collision overhead", ok, detail, elapsed, 120)


# 9 -----------------------------------------------------------------------------


def test_c09_gradient_check():
    t0 = time.perf_counter()
    worst = {}
    for kind in ("tanh", "xtanh", "sigmoid", "softplus"):
        rng = make_rng(9, f"acceptance.c9.{kind}")
        worst[kind] = 0.0
        for _ in range(5):
            dims = [int(d) for d in rng.integers(1, 9, size=int(rng.integers(2, 5)))]
            net = Network.from_dims(dims, kind, rng=rng, init_std=0.5)
            x = rng.standard_normal((4, dims[0]))
            y = rng.standard_normal((4, dims[-1]))
            worst[kind] = max(worst[kind], gradient_check(net, x, y, h=1e-5))
    elapsed = time.perf_counter() - t0
    ok = all(v < 1e-6 for v in worst.values())
    detail = "max rel err " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    assert report("C9", "gradient correctness", ok, detail, elapsed, 5)


# 10 ----------------------------------------------------------------------------


def test_c10_metrics_reference():
    t0 = time.perf_counter()
    rng = make_rng(10, "acceptance.c10")
    worst = 0.0
    for _ in range(100):
        n, d = int(rng.integers(1, 30)), int(rng.integers(1, 20))
        w = rng.standard_normal((n, d))
        c = cosine_matrix(w)
        ref = cosine_matrix_loops(w.tolist())
        worst = max(
            worst,
            float(np.max(np.abs(c - np.array(ref)))),
            abs(weight_correlation(c) - weight_correlation_loops(ref)),
            abs(neuron_similarity(c) - neuron_similarity_loops(ref)),
        )
    elapsed = time.perf_counter() - t0
    assert report("C10", "metrics vs loop reference", worst < 1e-12, f"max abs diff {worst:.1e}", elapsed, 5)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
