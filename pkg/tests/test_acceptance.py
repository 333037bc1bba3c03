"""Acceptance gate: one test per criterion, each at its stated tolerance and runtime.

A summary line per criterion is printed at the end of the pytest run.
"""

import json
import math
import random
import time

import numpy as np
import pytest

from baiwrc import experiments as ex
from baiwrc.cli import main
from baiwrc.complexity import (
    ceil_log2,
    h1_det,
    h2_det,
    h2_sto,
    refined_h,
    upper_bound_value,
)
from baiwrc.harness import estimate_failure, run_trial, simulate, trial_seed
from baiwrc.model import ArmModel, Bernoulli, Deterministic, Instance, Uniform
from baiwrc.strategies import ShrrPolicy

from .oracles import shrr_unit_oracle


def random_consumption(rng, shared):
    d = rng.uniform(0.02, 1.0)
    if shared:
        return rng.choice([Bernoulli(d), Deterministic(d)])
    lo = rng.uniform(0.0, d)
    return rng.choice([Bernoulli(d), Deterministic(d), Uniform(lo, min(1.0, 2 * d - lo))])


def random_instance(rng, K, L, budget_hi):
    means = rng.sample(range(1, 1000), K)
    arms = []
    for k in range(K):
        shared = rng.random() < 0.25
        arms.append(ArmModel(Bernoulli(means[k] / 1000),
                             [random_consumption(rng, shared) for _ in range(L)],
                             "shared_uniform" if shared else "independent"))
    return Instance(arms, [rng.uniform(0.0, budget_hi) for _ in range(L)])


def test_criterion_1_feasibility(record_property):
    rng = random.Random(20240601)
    start = time.perf_counter()
    trials = violations = 0
    for i in range(50):
        inst = random_instance(rng, rng.randint(2, 64), rng.randint(1, 3), 40.0)
        for j in range(200):
            # check_feasibility asserts the running totals after every pull
            res = run_trial(inst, "shrr", trial_seed(i, j), check_feasibility=True)
            violations += any(t > c for t, c in zip(res.consumption, inst.budgets))
            trials += 1
    elapsed = time.perf_counter() - start
    record_property("trials", trials)
    record_property("violations", violations)
    record_property("seconds", round(elapsed, 1))
    assert trials == 10**4 and violations == 0
    assert elapsed < 60


def test_criterion_2_golden_refined_values(record_property):
    start = time.perf_counter()
    worst = 0.0
    for K in range(4, 13):
        h1, h2 = refined_h(ex.gen_appendixB5_family(K, 100.0)[0])
        worst = max(worst, abs(h2[0] - 32) / 32, abs(h1[0] - 16 * K) / (16 * K))
    elapsed = time.perf_counter() - start
    record_property("max_rel_err", f"{worst:.1e}")
    assert worst <= 1e-9
    assert elapsed < 1


def test_criterion_3_deterministic_reduction(record_property):
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        K, L = int(rng.integers(2, 33)), int(rng.integers(1, 4))
        r = rng.choice(np.arange(1, 1000), size=K, replace=False) / 1000
        d = rng.uniform(0.001, 1.0, size=(L, K))
        law = Bernoulli if rng.random() < 0.5 else Deterministic
        inst = Instance([ArmModel(Bernoulli(r[k]), [law(d[j, k]) for j in range(L)])
                         for k in range(K)], [1.0] * L)
        zero = h2_sto(inst, envelope=[(0.0, 0.0)] * L)
        det = h2_det(inst)
        worst = max(worst, float(np.max(np.abs(zero - det) / det)))
        _, tilde = refined_h(inst, sort_arms=True)
        # K=2 makes the three quantities equal up to rounding
        slack = 1 + 1e-12
        assert np.all(tilde <= det * slack) and np.all(det <= h1_det(inst) * slack)
    elapsed = time.perf_counter() - start
    record_property("max_rel_err", f"{worst:.1e}")
    record_property("seconds", round(elapsed, 2))
    assert worst <= 1e-12
    assert elapsed < 5


def test_criterion_4_figure1_divergence(record_property):
    start = time.perf_counter()
    n = 10**5
    points = {}
    for inv_d in (2, 4, 8, 16):
        det, sto = ex.gen_figure1_pair(1.0 / inv_d)
        points[inv_d] = (estimate_failure(det, "shrr", n, base_seed=inv_d),
                         estimate_failure(sto, "shrr", n, base_seed=1000 + inv_d))
    elapsed = time.perf_counter() - start
    for inv_d, (a, b) in points.items():
        record_property(f"1/d={inv_d}", f"det {a.p_hat:.4f} sto {b.p_hat:.4f}")
    det16, sto16 = points[16]
    ordered = all(a.p_hat <= b.p_hat for a, b in points.values())
    disjoint = det16.ci_hi < sto16.ci_lo
    assert elapsed < 300
    assert ordered, "deterministic consumption should fail no more often than Bernoulli"
    assert disjoint


def bound_instances():
    """20 small instances whose budgets put the general upper bound near 0.45."""
    # wide gaps keep each trial short enough for 2e6 trials in the time limit
    rewards = [(0.9, 0.1), (0.95, 0.05), (0.98, 0.02), (0.97, 0.1), (0.97, 0.03, 0.02)]
    laws = [
        lambda: [Deterministic(1.0)],
        lambda: [Uniform(0.8, 1.0)],
        lambda: [Deterministic(0.9), Uniform(0.85, 1.0)],
        lambda: [Uniform(0.9, 1.0), Uniform(0.7, 1.0)],
    ]
    out = []
    for i in range(20):
        r = rewards[i % len(rewards)]
        make = laws[(i // len(rewards)) % len(laws)]
        arms = [ArmModel(Bernoulli(x), make()) for x in r]
        probe = Instance(arms, [1.0] * len(arms[0].consumption))
        K, L = probe.n_arms, probe.n_resources
        needed = 4 * ceil_log2(K) * math.log(2 * L * K * math.log2(K) / 0.45)
        out.append(Instance(arms, list(needed * h2_sto(probe) * 1.001)))
    return out


def test_criterion_5_bound_dominance(record_property):
    start = time.perf_counter()
    worst_margin = math.inf
    for i, inst in enumerate(bound_instances()):
        bound = upper_bound_value(inst)[0]
        assert bound < 0.5
        stats = estimate_failure(inst, "shrr", 10**5, base_seed=500 + i)
        worst_margin = min(worst_margin, min(1.0, bound) - stats.ci_hi)
        assert stats.ci_hi <= min(1.0, bound), (i, stats, bound)
    elapsed = time.perf_counter() - start
    record_property("min(bound - wilson_hi)", f"{worst_margin:.4f}")
    record_property("seconds", round(elapsed, 1))
    assert elapsed < 600


def test_criterion_6_baseline_comparison(record_property):
    start = time.perf_counter()
    policies = ["shrr", "uniform", "ucb", "atlucb", "dsh"]
    worse, overlaps = [], []
    for shape in ex.REWARD_SHAPES:
        inst = ex.gen_synthetic(ex.SetupSpec(shape, "HmL", "Correlated", 64, 1, [750]))
        stats = {p: estimate_failure(inst, p, 500, base_seed=trial_seed(6, len(shape)))
                 for p in policies}
        s = stats["shrr"]
        record_property(shape, " ".join(f"{p}={stats[p].p_hat:.3f}" for p in policies))
        for p in policies[1:]:
            b = stats[p]
            if s.p_hat > b.p_hat:
                worse.append(f"{shape}/{p}")
            if not (s.ci_hi < b.ci_lo):
                overlaps.append(f"{shape}/{p}")
    elapsed = time.perf_counter() - start
    # overlapping intervals are only a caveat: the criterion compares point estimates
    record_property("overlapping_intervals", ",".join(overlaps) or "none")
    record_property("seconds", round(elapsed, 1))
    assert not worse, worse
    assert elapsed < 900


def test_criterion_7_theorem2_structure(record_property):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for _ in range(200):
        K, L = int(rng.integers(2, 13)), int(rng.integers(1, 4))
        # dyadic rewards make 1 - r and every gap exact in floating point
        rest = np.sort(rng.integers(1, 512, size=K - 1))[::-1] / 1024
        r = [0.5, *rest]
        d = -np.sort(-rng.uniform(0.01, 0.5, size=(L, K)), axis=1)
        law = ex.theorem2_uniform if rng.random() < 0.5 else ex.theorem2_deterministic
        fam = ex.gen_theorem2_family(r, law(d), [10.0] * L)
        for q in fam[1:]:
            for k in range(K):
                assert q.arms[k].consumption == fam[0].arms[k].consumption
        values = np.array([h2_det(q) for q in fam])
        assert np.array_equal(values[0], values.max(axis=0))
    elapsed = time.perf_counter() - start
    record_property("seconds", round(elapsed, 2))
    assert elapsed < 5


def test_criterion_8_reproducibility(tmp_path, record_property):
    inst = ex.gen_synthetic(ex.SetupSpec("Trap", "HmL", "Correlated", 16, 1, [60]))
    path = tmp_path / "inst.json"
    path.write_text(inst.to_json())
    outputs = {}
    for threads in (1, 2, 4):
        csv_path = tmp_path / f"trials_{threads}.csv"
        for policy in ("shrr", "ucb"):
            assert main(["run", "--instance", str(path), "--policy", policy, "--trials", "200",
                         "--seed", "11", "--threads", str(threads),
                         "--emit-trials", str(csv_path), "--out", str(tmp_path / "o.json")]) == 0
            outputs.setdefault(("run", policy), set()).add(csv_path.read_bytes())
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"generator": "figure1", "grid": {"inv_d": [2, 4, 8]},
                                   "policies": ["shrr", "uniform"], "trials": 300, "seed": 5}))
        out = tmp_path / f"sweep_{threads}.csv"
        assert main(["sweep", "--config", str(cfg), "--threads", str(threads),
                     "--out", str(out)]) == 0
        outputs.setdefault(("sweep",), set()).add(out.read_bytes())
    record_property("distinct_outputs", {"/".join(k): len(v) for k, v in outputs.items()})
    assert all(len(v) == 1 for v in outputs.values())


def test_criterion_9_fixed_budget_degeneration(record_property):
    checked = 0
    for K in (2, 3, 4, 5, 8, 16):
        for m in (10, 37):
            C = m * ceil_log2(K)
            rng = random.Random(K * 100 + m)
            table = [[float(rng.random() < 0.5) for _ in range(C + 1)] for _ in range(K)]
            pulled = [0] * K

            def pull(k):
                r = table[k][pulled[k]]
                pulled[k] += 1
                return r, (1.0,)

            policy = ShrrPolicy(K, [float(C)])
            simulate(policy, pull, [float(C)])
            expected, _, _ = shrr_unit_oracle(K, C, table)
            assert [h.pulls for h in policy.history] == expected
            checked += 1
    record_property("cases", checked)
