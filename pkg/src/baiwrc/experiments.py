"""Instance families and sweep orchestration.

Generators return validated :class:`~baiwrc.model.Instance` objects with
arms in the order the construction defines (arm index 0 is "arm 1" in the
usual 1-based notation). :func:`sweep` runs a policy grid over a generator
and returns plot-ready rows.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import harness
from .complexity import h2_det, lower_bound_value_det, sqrt_g, tilde_h2_sto
from .model import (
    INDEPENDENT,
    SHARED_UNIFORM,
    ArmModel,
    Bernoulli,
    Deterministic,
    Gaussian,
    Instance,
    InstanceError,
    Uniform,
)

REWARD_SHAPES = ("OneGroup", "Trap", "Polynomial", "Geometric")
CONSUMPTION_PATTERNS = ("HmH", "HmL", "Mixture")
CONSUMPTION_KINDS = ("Deterministic", "Uncorrelated", "Correlated")

SWEEP_COLUMNS = ("x", "policy", "instance_label", "p_hat", "ci_lo", "ci_hi", "trials")


@dataclass(frozen=True)
class SetupSpec:
    reward_shape: str
    consumption_pattern: str
    consumption_kind: str
    K: int = 256
    L: int = 1
    budgets: tuple = field(default=())

    def __post_init__(self):
        budgets = tuple(float(c) for c in self.budgets) or (1500.0,) * self.L
        object.__setattr__(self, "budgets", budgets)
        if self.reward_shape not in REWARD_SHAPES:
            raise ValueError(f"reward_shape must be one of {REWARD_SHAPES}")
        if self.consumption_pattern not in CONSUMPTION_PATTERNS:
            raise ValueError(f"consumption_pattern must be one of {CONSUMPTION_PATTERNS}")
        if self.consumption_kind not in CONSUMPTION_KINDS:
            raise ValueError(f"consumption_kind must be one of {CONSUMPTION_KINDS}")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.L < 1 or len(self.budgets) != self.L:
            raise ValueError(f"need L >= 1 and exactly L={self.L} budgets")
        if self.consumption_pattern == "Mixture" and self.L != 2:
            raise ValueError("Mixture consumption needs L = 2")
        if self.consumption_kind == "Deterministic" and self.L == 2:
            raise ValueError("Deterministic consumption is not used with L = 2")

    @property
    def label(self) -> str:
        return f"{self.reward_shape}/{self.consumption_pattern}/{self.consumption_kind}"


def synthetic_rewards(shape: str, K: int) -> np.ndarray:
    """Mean rewards of the four synthetic shapes, generalised from K = 256."""
    i = np.arange(1, K + 1, dtype=float)
    if shape == "OneGroup":
        r = np.full(K, 0.8)
    elif shape == "Trap":
        r = np.where(i <= math.ceil(K / 8), 0.8, 0.1)
    elif shape == "Polynomial":
        r = 0.9 * (1.0 - np.sqrt(i / K))
    elif shape == "Geometric":
        r = 0.9 * (1.0 / 9.0) ** ((i - 1) / (K - 1))
    else:
        raise ValueError(f"unknown reward shape {shape!r}")
    r[0] = 0.9
    return r


def synthetic_consumption(pattern: str, K: int, L: int) -> np.ndarray:
    """Mean consumptions, shape (L, K): 0.9 / 0.1 split at ceil(K/2)."""
    high_first = np.where(np.arange(K) < math.ceil(K / 2), 0.9, 0.1)
    low_first = 1.0 - high_first
    if pattern == "HmH":
        rows = [high_first] * L
    elif pattern == "HmL":
        rows = [low_first] * L
    elif pattern == "Mixture":
        rows = [low_first, high_first]
    else:
        raise ValueError(f"unknown consumption pattern {pattern!r}")
    return np.array(rows)


def gen_synthetic(spec: SetupSpec) -> Instance:
    r = synthetic_rewards(spec.reward_shape, spec.K)
    d = synthetic_consumption(spec.consumption_pattern, spec.K, spec.L)
    kind = spec.consumption_kind
    cons_law = Deterministic if kind == "Deterministic" else Bernoulli
    coupling = SHARED_UNIFORM if kind == "Correlated" else INDEPENDENT
    arms = [
        ArmModel(Bernoulli(float(r[k])), [cons_law(float(d[j, k])) for j in range(spec.L)], coupling)
        for k in range(spec.K)
    ]
    return Instance(arms, spec.budgets)


def gen_figure1_pair(d: float, budget: float = 2.0) -> tuple[Instance, Instance]:
    """(Q_det, Q_sto): K=2, Bernoulli rewards 0.5 / 0.4, consumption d vs Bern(d)."""
    if not 0 < d < 1:
        raise ValueError("d must lie in (0, 1)")
    rewards = (Bernoulli(0.5), Bernoulli(0.4))
    det = Instance([ArmModel(r, [Deterministic(d)]) for r in rewards], [budget])
    sto = Instance([ArmModel(r, [Bernoulli(d)]) for r in rewards], [budget])
    return det, sto


def _flipped(r: Sequence[float], i: int) -> list[float]:
    out = list(r)
    out[i] = 1.0 - out[i]
    return out


def _check_descending(values, what: str) -> None:
    if any(a < b for a, b in zip(values, values[1:])):
        raise ValueError(f"{what} must be sorted in descending order")


def gen_theorem2_family(
    r: Sequence[float], cons: Sequence[Sequence], budgets: Sequence[float]
) -> list[Instance]:
    """Lower-bound family for general consumption.

    ``cons[l]`` lists the K consumption laws of resource l sorted by mean,
    descending. Every member shares the consumption model, with the two
    heaviest laws swapped onto arms 0 and 1. Member i has Gaussian rewards
    N(r_k, 1), except arm i which gets N(1 - r_i, 1).
    """
    r = [float(x) for x in r]
    K = len(r)
    if K < 2:
        raise ValueError("need K >= 2")
    if r[0] != 0.5 or not r[1] < 0.5 or r[-1] <= 0:
        raise ValueError("rewards must satisfy 1/2 = r_1 > r_2 and r_K > 0")
    _check_descending(r, "rewards")
    if len(cons) != len(budgets):
        raise ValueError("one consumption list per budget required")
    per_arm = []
    for j, laws in enumerate(cons):
        laws = list(laws)
        if len(laws) != K:
            raise ValueError(f"cons[{j}]: expected {K} laws")
        m = [law.mean() for law in laws]
        if not all(0 < x <= 1 for x in m):
            raise ValueError(f"cons[{j}]: means must lie in (0, 1]")
        _check_descending(m, f"cons[{j}] means")
        laws[0], laws[1] = laws[1], laws[0]
        per_arm.append(laws)
    arm_cons = [[per_arm[j][k] for j in range(len(cons))] for k in range(K)]
    family = []
    for i in range(K):
        ri = _flipped(r, i)
        arms = [ArmModel(Gaussian(ri[k], 1.0), arm_cons[k]) for k in range(K)]
        family.append(Instance(arms, budgets))
    return family


def theorem2_deterministic(d_sorted: Sequence[Sequence[float]]) -> list[list]:
    """Deterministic consumption laws for :func:`gen_theorem2_family`."""
    return [[Deterministic(float(x)) for x in row] for row in d_sorted]


def theorem2_uniform(d_sorted: Sequence[Sequence[float]]) -> list[list]:
    """Uniform(0, 2d) consumption laws; needs every d <= 1/2."""
    return [[Uniform(0.0, 2.0 * float(x)) for x in row] for row in d_sorted]


def theorem2_condition(family: Sequence[Instance]) -> bool:
    """96 * min over members and resources of 2 C / H2_det >= 1."""
    return lower_bound_value_det(family[0], family)[1]


def gen_theorem3_family(
    r: Sequence[float], d0: Sequence[Sequence[float]], c: float, budgets: Sequence[float]
) -> list[Instance]:
    """Bernoulli-consumption lower-bound family with means c * d0 in sorted order."""
    r = [float(x) for x in r]
    K = len(r)
    if K < 2:
        raise ValueError("need K >= 2")
    if r[0] != 0.5 or not r[1] < 0.5 or r[-1] != 0.25:
        raise ValueError("rewards must satisfy 1/2 = r_1 > r_2 and r_K = 1/4")
    _check_descending(r, "rewards")
    if not 0 < c < 1:
        raise ValueError("c must lie in (0, 1)")
    if len(d0) != len(budgets):
        raise ValueError("one d0 row per budget required")
    d = np.array(d0, dtype=float) * c
    if d.shape[1] != K:
        raise ValueError(f"d0 rows must have {K} entries")
    for j, row in enumerate(d):
        _check_descending(list(row), f"d0[{j}]")
        if not np.all((row > 0) & (row < 1)):
            raise ValueError(f"d0[{j}] * c: scaled means must lie in (0, 1)")
    arm_cons = [[Bernoulli(float(d[j, k])) for j in range(len(d))] for k in range(K)]
    family = []
    for i in range(K):
        ri = _flipped(r, i)
        arms = [ArmModel(Gaussian(ri[k], 1.0), arm_cons[k]) for k in range(K)]
        family.append(Instance(arms, budgets))
    return family


def theorem3_conditions(
    r: Sequence[float],
    d0: Sequence[Sequence[float]],
    c: float,
    budgets: Sequence[float],
    i: int,
    g: Callable[[float], float] = sqrt_g,
) -> dict:
    """Check the five sufficient inequalities on c for member ``i`` (0-based, i >= 1).

    Returns a dict of named booleans plus ``all``. The threshold below which
    they all hold is not solved for; callers scan c instead.
    """
    if not 1 <= i < len(r):
        raise ValueError("i must index a non-best arm")
    d = np.array(d0, dtype=float) * c
    r = np.asarray(r, dtype=float)
    gaps = r[0] - r
    gaps[0] = gaps[1]
    checks = {"g_small": True, "log_one_minus": True, "weighted_sum": True,
              "budget": True, "log_inverse": True}
    for j, row in enumerate(d):
        log_inv = math.log(1.0 / row[i])
        gv = np.array([g(x) for x in row])
        checks["g_small"] &= bool(np.all(gv < 1.0 / log_inv))
        checks["log_one_minus"] &= math.log(1.0 / (1.0 - row[i])) < 0.5
        checks["weighted_sum"] &= 128.0 * float(np.sum(gv / gaps**2)) * log_inv < 1.0
        checks["budget"] &= budgets[j] > math.log(64.0)
        checks["log_inverse"] &= log_inv > 1.0
    checks = {k: bool(v) for k, v in checks.items()}
    checks["all"] = all(checks.values())
    return checks


def theorem3_lower_bound(family: Sequence[Instance], g: Callable = sqrt_g) -> float:
    """exp(-min_l C_l / H~2_sto), evaluated on the first member."""
    q = family[0]
    return math.exp(-float(np.min(np.asarray(q.budgets) / tilde_h2_sto(q, g))))


def appendix_b5_params(K: int) -> tuple[np.ndarray, np.ndarray]:
    """(rewards, deterministic consumptions) of the refined-measure counterexample."""
    if K < 2:
        raise ValueError("need K >= 2")
    k = np.arange(1, K + 1, dtype=float)
    d = 2.0 ** -(K - k)
    d[0] = 2.0 ** -(K - 2)
    r = 0.5 - 2.0 ** ((k - K - 4) / 2.0)
    r[0] = 0.5
    return r, d


def gen_appendixB5_family(K: int, budget: float) -> list[Instance]:
    """K instances: Bernoulli rewards, deterministic consumption, arm i flipped in member i."""
    r, d = appendix_b5_params(K)
    family = []
    for i in range(K):
        ri = _flipped(r, i) if i else list(r)
        arms = [ArmModel(Bernoulli(float(ri[k])), [Deterministic(float(d[k]))]) for k in range(K)]
        family.append(Instance(arms, [budget]))
    return family


def h2_det_dominance(family: Sequence[Instance]) -> bool:
    """True when H2_det of the first member is the family maximum on every resource."""
    values = np.array([h2_det(q) for q in family])
    return bool(np.all(values[0] >= values.max(axis=0)))


# ---------------------------------------------------------------- sweeps


def expand_grid(spec) -> list:
    """A list, or {"start", "stop", "num", "spacing": "linear" | "geometric"}."""
    if isinstance(spec, dict):
        fn = np.geomspace if spec.get("spacing", "linear") == "geometric" else np.linspace
        return [float(x) for x in fn(spec["start"], spec["stop"], int(spec["num"]))]
    return list(spec)


def _grid_points(grid: dict) -> list[dict]:
    keys = list(grid)
    values = [expand_grid(grid[k]) for k in keys]
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def _figure1_points(grid, params):
    budget = float(params.get("budget", 2.0))
    if "inv_d" in grid:
        xs = expand_grid(grid["inv_d"])
        ds = [1.0 / x for x in xs]
    else:
        xs = expand_grid(grid.get("d", []))
        ds = xs
    for x, d in zip(xs, ds):
        det, sto = gen_figure1_pair(d, budget)
        yield x, [("det", det), ("sto", sto)]


def _synthetic_points(grid, params):
    K = int(params.get("K", 256))
    L = int(params.get("L", 1))
    budget = params.get("budget", 1500.0)
    budgets = budget if isinstance(budget, list) else [budget] * L
    fixed = {
        "reward_shape": params.get("reward_shape"),
        "consumption_pattern": params.get("consumption_pattern"),
        "consumption_kind": params.get("consumption_kind"),
    }
    for point in _grid_points(grid):
        setup = {**fixed, **point}
        spec = SetupSpec(setup["reward_shape"], setup["consumption_pattern"],
                         setup["consumption_kind"], K, L, budgets)
        yield setup["reward_shape"], [(spec.label, gen_synthetic(spec))]


def _b5_points(grid, params):
    budget = float(params.get("budget", 100.0))
    members = params.get("members")
    for K in expand_grid(grid.get("K", [])):
        family = gen_appendixB5_family(int(K), budget)
        idx = range(len(family)) if members is None else members
        yield int(K), [(f"Q{i + 1}", family[i]) for i in idx]


def _theorem3_points(grid, params):
    members = params.get("members", [0, 1])
    for c in expand_grid(grid.get("c", [])):
        family = gen_theorem3_family(params["r"], params["d0"], c, params["budgets"])
        yield c, [(f"Q{i + 1}", family[i]) for i in members]


GENERATORS = {
    "figure1": _figure1_points,
    "synthetic": _synthetic_points,
    "appendix_b5": _b5_points,
    "theorem3": _theorem3_points,
}


def _row_seed(seed: int, x, label: str, policy: str) -> int:
    key = f"{seed}|{x!r}|{label}|{policy}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def sweep(config: dict, threads: int = 1) -> list[dict]:
    """Failure statistics for every (grid point, instance, policy) in ``config``.

    ``config`` keys: generator, grid, policies (default ["shrr"]), trials,
    seed, params (generator parameters) and policy_params (per policy name).
    """
    gen = config.get("generator")
    if gen not in GENERATORS:
        raise ValueError(f"generator must be one of {sorted(GENERATORS)}")
    policies = config.get("policies", ["shrr"])
    trials = int(config.get("trials", 1000))
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed = int(config.get("seed", 0))
    params = config.get("params", {})
    policy_params = config.get("policy_params", {})
    rows = []
    for x, instances in GENERATORS[gen](config.get("grid", {}), params):
        for label, inst in instances:
            for policy in policies:
                stats = harness.estimate_failure(
                    inst, policy, trials, _row_seed(seed, x, label, policy), threads,
                    policy_params.get(policy),
                )
                rows.append({
                    "x": x, "policy": policy, "instance_label": label,
                    "p_hat": stats.p_hat, "ci_lo": stats.ci_lo, "ci_hi": stats.ci_hi,
                    "trials": stats.trials,
                })
    return rows


def write_sweep_csv(rows: Sequence[dict], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                         for c in SWEEP_COLUMNS])


__all__ = [
    "SetupSpec", "gen_synthetic", "gen_figure1_pair", "gen_theorem2_family",
    "theorem2_deterministic", "theorem2_uniform", "theorem2_condition",
    "gen_theorem3_family", "theorem3_conditions", "theorem3_lower_bound",
    "gen_appendixB5_family", "appendix_b5_params", "h2_det_dominance",
    "sweep", "write_sweep_csv", "InstanceError",
]
