"""Monte Carlo estimation of the failure probability Pr(psi != best arm).

Trial ``i`` of a run seeded with ``base_seed`` draws from its own
``random.Random`` whose seed is a BLAKE2b digest of ``(base_seed, i)``, so
results do not depend on the order trials execute in or on the number of
worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from statistics import NormalDist
from typing import Callable, Iterable, Sequence

from .model import Instance
from .strategies import Policy, make_policy

Z95 = NormalDist().inv_cdf(0.975)

# relative slack used when asserting that SH-RR stays inside its budgets
FEASIBILITY_RTOL = 1e-12


class FeasibilityError(AssertionError):
    """A self-stopping policy consumed more than a budget allows."""


@dataclass(frozen=True)
class TrialResult:
    psi: int
    tau: int
    consumption: tuple
    feasible: bool
    pulls: tuple


@dataclass(frozen=True)
class FailureStats:
    trials: int
    failures: int
    p_hat: float
    ci_lo: float
    ci_hi: float
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def trial_seed(base_seed: int, index: int) -> int:
    digest = hashlib.blake2b(f"{base_seed}:{index}".encode(), digest_size=16).digest()
    return int.from_bytes(digest, "little")


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("n must be positive")
    p = successes / n
    z2 = z * z
    denom = 1 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    # round-off can push a limit past p at k = 0 or k = n
    return min(p, max(0.0, centre - half)), max(p, min(1.0, centre + half))


def simulate(
    policy: Policy,
    pull: Callable[[int], tuple],
    budgets: Sequence[float],
    check_feasibility: bool = False,
    max_pulls: int | None = None,
) -> TrialResult:
    """Drive ``policy`` with outcomes from ``pull(arm) -> (reward, consumptions)``.

    Self-stopping policies run until they return None. Anytime policies are cut
    off at the first pull that pushes any resource total strictly above its
    budget; the recommendation is the one held just before that pull and the
    breaching pull is still counted in ``tau`` and the totals.
    """
    budgets = tuple(budgets)
    L = len(budgets)
    totals = [0.0] * L
    pulls = [0] * policy.n_arms
    tau = 0
    psi = None
    stops = policy.stops_itself
    limits = [c + FEASIBILITY_RTOL * max(c, 1.0) for c in budgets]
    while max_pulls is None or tau < max_pulls:
        arm = policy.next_arm()
        if arm is None:
            break
        reward, cons = pull(arm)
        tau += 1
        pulls[arm] += 1
        breach = False
        for j in range(L):
            totals[j] += cons[j]
            if totals[j] > budgets[j]:
                breach = True
        if breach:
            if not stops:
                psi = policy.recommend()
                break
            if check_feasibility and any(t > lim for t, lim in zip(totals, limits)):
                raise FeasibilityError(f"budget exceeded after pull {tau}: {totals} > {budgets}")
        policy.observe(arm, reward, cons)
    if psi is None:
        psi = policy.recommend()
    feasible = all(t <= lim for t, lim in zip(totals, limits))
    return TrialResult(psi, tau, tuple(totals), feasible, tuple(pulls))


def run_trial(
    instance: Instance,
    policy: str = "shrr",
    seed: int = 0,
    params: dict | None = None,
    check_feasibility: bool = False,
    max_pulls: int | None = None,
) -> TrialResult:
    rng = random.Random(seed)
    samplers = [arm.sampler() for arm in instance.arms]
    pol = make_policy(policy, instance.n_arms, instance.budgets, **(params or {}))
    return simulate(
        pol, lambda k: samplers[k](rng), instance.budgets, check_feasibility, max_pulls
    )


def _run_chunk(args) -> list:
    instance, policy, params, base_seed, indices, check = args
    return [
        run_trial(instance, policy, trial_seed(base_seed, i), params, check) for i in indices
    ]


def run_trials(
    instance: Instance,
    policy: str,
    n_trials: int,
    base_seed: int,
    threads: int = 1,
    params: dict | None = None,
    check_feasibility: bool = False,
) -> list[TrialResult]:
    """All trial results, ordered by trial index whatever the worker count."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if threads <= 1 or n_trials < 2:
        return _run_chunk((instance, policy, params, base_seed, range(n_trials), check_feasibility))
    n_chunks = min(n_trials, threads * 4)
    bounds = [n_trials * c // n_chunks for c in range(n_chunks + 1)]
    jobs = [
        (instance, policy, params, base_seed, range(bounds[c], bounds[c + 1]), check_feasibility)
        for c in range(n_chunks)
    ]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return [r for chunk in pool.map(_run_chunk, jobs) for r in chunk]


def failure_stats(results: Iterable[TrialResult], best_arm: int, seed: int) -> FailureStats:
    results = list(results)
    n = len(results)
    failures = sum(r.psi != best_arm for r in results)
    lo, hi = wilson_interval(failures, n)
    return FailureStats(n, failures, failures / n, lo, hi, seed)


def estimate_failure(
    instance: Instance,
    policy: str = "shrr",
    n_trials: int = 1000,
    base_seed: int = 0,
    threads: int = 1,
    params: dict | None = None,
    emit_trials: str | None = None,
) -> FailureStats:
    """Empirical Pr(psi != argmax of the true mean rewards) with a Wilson 95% interval."""
    results = run_trials(instance, policy, n_trials, base_seed, threads, params)
    if emit_trials:
        write_trials_csv(emit_trials, results, instance.n_resources)
    return failure_stats(results, instance.best_arm, base_seed)


def write_trials_csv(path: str, results: Sequence[TrialResult], n_resources: int) -> None:
    header = ["trial_id", "psi", "tau", "feasible"]
    header += [f"consumption_{j + 1}" for j in range(n_resources)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i, r in enumerate(results):
            writer.writerow([i, r.psi, r.tau, int(r.feasible), *(repr(c) for c in r.consumption)])
