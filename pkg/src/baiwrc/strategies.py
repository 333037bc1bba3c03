"""Sequential policies: SH-RR and the anytime baselines.

Every policy follows the same protocol, driven by :mod:`baiwrc.harness`::

    policy = make_policy("shrr", n_arms, budgets)
    arm = policy.next_arm()          # None once the policy stops
    policy.observe(arm, reward, consumptions)
    psi = policy.recommend()

Only SH-RR ever returns None; the baselines keep pulling and are cut off by
the harness at the first pull that breaches a budget.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .complexity import ceil_log2

PHASE_END = object()


class Policy:
    """Common bookkeeping: cumulative reward sums and pull counts per arm."""

    stops_itself = False

    def __init__(self, n_arms: int, budgets: Sequence[float]):
        if n_arms < 1:
            raise ValueError("need at least one arm")
        self.n_arms = n_arms
        self.budgets = tuple(float(c) for c in budgets)
        self.sums = [0.0] * n_arms
        self.counts = [0] * n_arms
        self.total_pulls = 0

    def next_arm(self) -> int | None:
        raise NotImplementedError

    def observe(self, arm: int, reward: float, consumption: Sequence[float]) -> None:
        self.sums[arm] += reward
        self.counts[arm] += 1
        self.total_pulls += 1

    def empirical_mean(self, arm: int) -> float:
        return self.sums[arm] / max(self.counts[arm], 1)

    def recommend(self) -> int:
        """Empirical-mean argmax, lowest index on ties; arm 0 before any data."""
        return min(range(self.n_arms), key=lambda k: (-self.empirical_mean(k), k))


@dataclass(frozen=True)
class PhaseRecord:
    phase: int
    survivors: tuple
    ration: tuple
    used: tuple
    pulls: int
    pulls_per_arm: tuple


class ShrrPolicy(Policy):
    """Successive halving with resource rationing.

    The budget of each resource is split into ceil(log2 K) equal allotments.
    A phase pulls the surviving arms round-robin while every resource's
    phase consumption is at most its ration minus one, then keeps the better
    half of the survivors by empirical mean over all pulls so far. Unused
    ration rolls over into the next phase.
    """

    stops_itself = True

    def __init__(self, n_arms: int, budgets: Sequence[float]):
        super().__init__(n_arms, budgets)
        self.n_phases = ceil_log2(n_arms)
        L = len(self.budgets)
        if self.n_phases:
            self.allotment = tuple(c / self.n_phases for c in self.budgets)
        else:
            self.allotment = (0.0,) * L
        self.ration = list(self.allotment)
        self.used = [0.0] * L
        self.survivors = list(range(n_arms))
        self.phase = 0
        self.t = 1
        self.history: list[PhaseRecord] = []
        self._phase_counts = [0] * n_arms
        self._phase_pulls = 0

    @property
    def done(self) -> bool:
        return self.phase >= self.n_phases

    def phase_next(self):
        """Arm to pull at step t, PHASE_END when a ration is exhausted, None when done."""
        if self.phase >= self.n_phases:
            return None
        for u, r in zip(self.used, self.ration):
            if u > r - 1:
                return PHASE_END
        # a(t) = t mod |S| with residue 0 standing for the last position
        return self.survivors[(self.t - 1) % len(self.survivors)]

    def _rank_key(self, k: int):
        # mean desc, then pulled arms before never-pulled ones, then index asc
        n = self.counts[k]
        return (-(self.sums[k] / max(n, 1)), n == 0, k)

    def end_phase(self) -> None:
        survivors = self.survivors
        self.history.append(
            PhaseRecord(
                phase=self.phase,
                survivors=tuple(survivors),
                ration=tuple(self.ration),
                used=tuple(self.used),
                pulls=self._phase_pulls,
                pulls_per_arm=tuple(self._phase_counts[k] for k in survivors),
            )
        )
        keep = -(-len(survivors) // 2)
        self.survivors = sorted(sorted(survivors, key=self._rank_key)[:keep])
        self.ration = [a + (r - u) for a, r, u in zip(self.allotment, self.ration, self.used)]
        self.used = [0.0] * len(self.used)
        self._phase_counts = [0] * self.n_arms
        self._phase_pulls = 0
        self.phase += 1

    def next_arm(self) -> int | None:
        while True:
            arm = self.phase_next()
            if arm is PHASE_END:
                self.end_phase()
                continue
            return arm

    def observe(self, arm, reward, consumption) -> None:
        self.sums[arm] += reward
        self.counts[arm] += 1
        self.total_pulls += 1
        self.t += 1
        used = self.used
        for j, d in enumerate(consumption):
            used[j] += d
        self._phase_counts[arm] += 1
        self._phase_pulls += 1

    def recommend(self) -> int:
        if self.done:
            return self.survivors[0]
        return min(self.survivors, key=self._rank_key)


class UniformPolicy(Policy):
    """Round robin over all arms."""

    def next_arm(self) -> int:
        return self.total_pulls % self.n_arms


class UCBPolicy(Policy):
    """UCB1-style sampling, r_hat + sqrt(2 ln t / n); unpulled arms go first."""

    def __init__(self, n_arms, budgets, exploration: float = 2.0):
        super().__init__(n_arms, budgets)
        self.exploration = float(exploration)
        self._sums = np.zeros(n_arms)
        self._counts = np.zeros(n_arms)

    def next_arm(self) -> int:
        t = self.total_pulls
        if t < self.n_arms:
            return t
        index = self._sums / self._counts + np.sqrt(self.exploration * math.log(t) / self._counts)
        return int(np.argmax(index))

    def observe(self, arm, reward, consumption) -> None:
        super().observe(arm, reward, consumption)
        self._sums[arm] += reward
        self._counts[arm] += 1


class DoublingSHPolicy(Policy):
    """Pull-count sequential halving restarted with budgets B_j = K * 2^j, j = 0, 1, ...

    Each run starts from scratch and spends exactly B_j pulls over
    ceil(log2 K) rounds: round r gets floor(B_j / rounds) pulls (the last
    round takes the remainder), split evenly over the survivors with any
    leftover going to the lowest indices. Survivors are ranked by the run's
    own empirical means, never-pulled arms last. The recommendation is the
    winner of the most recently completed run (arm 0 before the first).
    """

    def __init__(self, n_arms, budgets):
        super().__init__(n_arms, budgets)
        self.rounds = max(ceil_log2(n_arms), 1)
        self.run = 0
        self.winner = 0
        self.completed_runs = 0
        self._start_run()

    def run_budget(self, j: int) -> int:
        return self.n_arms * 2**j

    def _start_run(self) -> None:
        self._run_sums = [0.0] * self.n_arms
        self._run_counts = [0] * self.n_arms
        self._survivors = list(range(self.n_arms))
        self._round = 0
        self._spent = 0
        self._queue = self._schedule()

    def _schedule(self) -> deque:
        S = self._survivors
        B = self.run_budget(self.run)
        if self._round == self.rounds - 1:
            pulls = B - self._spent
        else:
            pulls = B // self.rounds
        self._spent += pulls
        base, extra = divmod(pulls, len(S))
        per_arm = [base + (i < extra) for i in range(len(S))]
        order = []
        for rep in range(base + 1):
            order.extend(k for k, n in zip(S, per_arm) if n > rep)
        return deque(order)

    def _rank_key(self, k: int):
        n = self._run_counts[k]
        return (-(self._run_sums[k] / max(n, 1)), n == 0, k)

    def _end_round(self) -> None:
        S = self._survivors
        if len(S) > 1:
            keep = -(-len(S) // 2)
            self._survivors = sorted(sorted(S, key=self._rank_key)[:keep])
        self._round += 1
        if len(self._survivors) == 1 or self._round >= self.rounds:
            self.winner = min(self._survivors, key=self._rank_key)
            self.completed_runs += 1
            self.run += 1
            self._start_run()
        else:
            self._queue = self._schedule()

    def next_arm(self) -> int:
        while not self._queue:
            self._end_round()
        return self._queue.popleft()

    def observe(self, arm, reward, consumption) -> None:
        super().observe(arm, reward, consumption)
        self._run_sums[arm] += reward
        self._run_counts[arm] += 1

    def recommend(self) -> int:
        return self.winner


class ATLUCBPolicy(Policy):
    """Anytime LUCB for the single best arm.

    Confidence radius D(n, w) = sqrt(4 log(log2(2n) / w) / n) with
    w = delta_s / K and delta_s = delta1 * alpha^(s - 1). The stage s only
    ever increases: whenever the current stage's bounds separate the
    empirical leader from every challenger, s advances to the first stage
    whose bounds no longer do, and the recommendation is refreshed.
    """

    def __init__(self, n_arms, budgets, delta1: float = 0.01, alpha: float = 0.99,
                 epsilon: float = 0.0):
        super().__init__(n_arms, budgets)
        if not 0 < delta1 < 1 or not 0 < alpha < 1:
            raise ValueError("need 0 < delta1 < 1 and 0 < alpha < 1")
        self.delta1 = float(delta1)
        self.alpha = float(alpha)
        self.epsilon = float(epsilon)
        self.stage = 1
        self.current = 0
        self._sums = np.zeros(n_arms)
        self._counts = np.zeros(n_arms)
        self._queue = deque(range(n_arms))

    def _log_inv_w(self, s: int) -> float:
        # log(K / delta_s), kept in log space so tiny deltas never underflow
        return math.log(self.n_arms / self.delta1) - (s - 1) * math.log(self.alpha)

    def _radius(self, s: int) -> np.ndarray:
        n = self._counts
        return np.sqrt(4.0 * (np.log(np.log2(2.0 * n)) + self._log_inv_w(s)) / n)

    def _pair(self, s: int, mu: np.ndarray, leader: int) -> tuple[int, int, bool]:
        rad = self._radius(s)
        upper = mu + rad
        upper[leader] = -np.inf
        challenger = int(np.argmax(upper))
        term = upper[challenger] - (mu[leader] - rad[leader]) < self.epsilon
        return leader, challenger, term

    def _round(self) -> None:
        mu = self._sums / self._counts
        leader = int(np.argmax(mu))
        prev = self.stage
        if self.n_arms > 1 and self._pair(prev, mu, leader)[2]:
            # terminating is monotone in s: gallop then bisect for the first
            # stage that does not terminate
            lo, step = prev, 1
            while self._pair(lo + step, mu, leader)[2]:
                lo, step = lo + step, step * 2
            hi = lo + step
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if self._pair(mid, mu, leader)[2]:
                    lo = mid
                else:
                    hi = mid
            self.stage = hi
        if self.stage == 1 or self.stage != prev:
            self.current = leader
        if self.n_arms == 1:
            self._queue.append(0)
            return
        h, l, _ = self._pair(self.stage, mu, leader)
        self._queue.extend((h, l))

    def next_arm(self) -> int:
        if not self._queue:
            self._round()
        return self._queue.popleft()

    def observe(self, arm, reward, consumption) -> None:
        super().observe(arm, reward, consumption)
        self._sums[arm] += reward
        self._counts[arm] += 1

    def recommend(self) -> int:
        if self.total_pulls < self.n_arms:
            return super().recommend()
        return self.current


POLICIES = {
    "shrr": ShrrPolicy,
    "uniform": UniformPolicy,
    "ucb": UCBPolicy,
    "atlucb": ATLUCBPolicy,
    "dsh": DoublingSHPolicy,
}


def make_policy(kind: str, n_arms: int, budgets: Sequence[float], **params) -> Policy:
    try:
        cls = POLICIES[kind]
    except KeyError:
        raise ValueError(f"unknown policy {kind!r}; choose from {sorted(POLICIES)}") from None
    return cls(n_arms, budgets, **params)


def baseline_policy(kind: str, n_arms: int, budgets: Sequence[float], **params) -> Policy:
    """Anytime baselines by name; accepts the long names used in plots as well."""
    aliases = {"Uniform": "uniform", "UCB": "ucb", "ATLUCB": "atlucb", "DoublingSH": "dsh"}
    kind = aliases.get(kind, kind)
    if kind == "shrr":
        raise ValueError("shrr is not an anytime baseline")
    if n_arms < 2:
        raise ValueError("baselines need K >= 2")
    return make_policy(kind, n_arms, budgets, **params)
