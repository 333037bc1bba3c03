"""
SH-RR against budget-oblivious baselines
========================================

K=64 arms, one resource, correlated consumption where the top half is expensive.
"""

import sys

from baiwrc.experiments import REWARD_SHAPES, SetupSpec, gen_synthetic
from baiwrc.harness import estimate_failure

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200
policies = ["shrr", "uniform", "ucb", "atlucb", "dsh"]

print("shape       " + "".join(f"{p:>9}" for p in policies))
for shape in REWARD_SHAPES:
    inst = gen_synthetic(SetupSpec(shape, "HmL", "Correlated", K=64, L=1, budgets=[750]))
    # baselines stop at the first pull that breaches the budget
    p = [estimate_failure(inst, pol, trials, base_seed=3).p_hat for pol in policies]
    print(f"{shape:12}" + "".join(f"{v:9.3f}" for v in p))
