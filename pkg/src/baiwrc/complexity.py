"""Effective consumption, hardness measures H1/H2 and the failure-bound expressions.

All functions are pure. Logarithms are natural except the phase count
ceil(log2 K), which is computed over the integers.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .model import Instance


def ceil_log2(n: int) -> int:
    """Exact ceil(log2 n) for n >= 1."""
    if n < 1:
        raise ValueError("ceil_log2 needs n >= 1")
    return (n - 1).bit_length()


def effective_consumption(b: float, sigma2: float, d: float) -> float:
    """f(b, sigma, d) = 4b / log(4 b^2 / sigma^2 + 1) + d, with f(b, 0, d) = d."""
    if b < 0 or sigma2 < 0:
        raise ValueError("b and sigma2 must be non-negative")
    if sigma2 > b * b * (1 + 1e-12):
        raise ValueError(f"sigma2={sigma2!r} exceeds b^2={b * b!r}")
    if sigma2 == 0:
        return float(d)
    return 4.0 * b / math.log1p(4.0 * b * b / sigma2) + d


def reward_gaps(rewards: Sequence[float]) -> np.ndarray:
    """Gaps of the reward-sorted arms, Delta_(k) = r_(1) - r_(k), with Delta_(1) = Delta_(2)."""
    r = np.sort(np.asarray(rewards, dtype=float))[::-1]
    if len(r) < 2:
        raise ValueError("need at least two arms")
    gaps = r[0] - r
    gaps[0] = gaps[1]
    return gaps


def _h2(values: np.ndarray, gaps: np.ndarray) -> float:
    # values must already be in the order the prefix sums run over
    prefix = np.cumsum(values)
    return float(np.max(prefix[1:] / gaps[1:] ** 2))


def _sorted_desc(x) -> np.ndarray:
    return -np.sort(-np.asarray(x, dtype=float), kind="stable")


def _require_pair(instance: Instance) -> None:
    if instance.n_arms < 2:
        raise ValueError("complexity measures need K >= 2")


def f_per_rank(instance: Instance, envelope=None) -> np.ndarray:
    """Effective consumption of each consumption rank, shape (L, K).

    ``envelope`` overrides the instance's (b, sigma^2) pairs without the
    dominance check, e.g. ``[(0, 0)] * L`` for the deterministic limit.
    """
    if envelope is None:
        envelope = instance.envelope
    out = np.empty((instance.n_resources, instance.n_arms))
    for j, (b, s2) in enumerate(envelope):
        d = _sorted_desc(instance.consumption_means[j])
        out[j] = [effective_consumption(b, s2, x) for x in d]
    return out


def h2_sto(instance: Instance, envelope=None) -> np.ndarray:
    """H_2 per resource; effective consumptions use the instance envelope by default."""
    _require_pair(instance)
    gaps = reward_gaps(instance.reward_means)
    return np.array([_h2(row, gaps) for row in f_per_rank(instance, envelope)])


def h2_det(instance: Instance) -> np.ndarray:
    _require_pair(instance)
    gaps = reward_gaps(instance.reward_means)
    return np.array([_h2(_sorted_desc(d), gaps) for d in instance.consumption_means])


def h1_det(instance: Instance) -> np.ndarray:
    _require_pair(instance)
    gaps = reward_gaps(instance.reward_means)
    return np.array([float(np.sum(_sorted_desc(d) / gaps**2)) for d in instance.consumption_means])


def tilde_h2_sto(instance: Instance, g: Callable[[float], float]) -> np.ndarray:
    """H_2 with each sorted mean consumption d replaced by g(d).

    ``g`` should be increasing with g(0) = 0 and 1 / (g(d) log(1/d)) -> inf as
    d -> 0+; only the caller can guarantee the limit condition.
    """
    _require_pair(instance)
    gaps = reward_gaps(instance.reward_means)
    rows = []
    for d in instance.consumption_means:
        vals = np.array([g(x) for x in _sorted_desc(d)], dtype=float)
        rows.append(_h2(vals, gaps))
    return np.array(rows)


def sqrt_g(d: float) -> float:
    """Example g(d) = sqrt(d) for :func:`tilde_h2_sto`."""
    return math.sqrt(d)


def refined_h(instance: Instance, sort_arms: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Order-aware (H~1, H~2) per resource, using consumptions in arm order.

    Arms must already be sorted by mean reward, descending. With
    ``sort_arms=True`` the arms are first relabelled by reward rank (stable),
    each arm keeping its own consumption.
    """
    _require_pair(instance)
    r = instance.reward_means
    d = instance.consumption_means
    order = np.arange(len(r))
    if sort_arms:
        order = np.argsort(-r, kind="stable")
    elif np.any(np.diff(r) > 0):
        raise ValueError("refined_h needs arms sorted by mean reward (descending)")
    gaps = r[order][0] - r[order]
    gaps[0] = gaps[1]
    h1 = np.array([float(np.sum(row[order] / gaps**2)) for row in d])
    h2 = np.array([_h2(row[order], gaps) for row in d])
    return h1, h2


def gamma(instance: Instance) -> tuple[float, float]:
    """(gamma, gamma_det) = min over resources of C / H_2 and C / H_2^det."""
    c = np.asarray(instance.budgets)
    return float(np.min(c / h2_sto(instance))), float(np.min(c / h2_det(instance)))


def upper_bound_value(instance: Instance) -> tuple[float, float]:
    """SH-RR failure bounds (general, deterministic-consumption), unclamped."""
    K, L = instance.n_arms, instance.n_resources
    if K < 2:
        raise ValueError("bounds need K >= 2")
    g, g_det = gamma(instance)
    phases = ceil_log2(K)
    log2k = math.log2(K)
    general = 2 * L * K * log2k * math.exp(-g / (4 * phases))
    det = K * log2k * math.exp(-g_det / (4 * phases))
    return general, det


def lower_bound_value_det(
    instance: Instance, family: Sequence[Instance] | None = None
) -> tuple[float, bool]:
    """(1/6) exp(-108 gamma_det) and whether the budget condition holds.

    The condition 96 * min_{i, l} 2 C_l / H_2^det(Q_i) >= 1 is evaluated over
    ``family`` when given, otherwise over ``instance`` alone.
    """
    _, g_det = gamma(instance)
    members = list(family) if family is not None else [instance]
    worst = min(float(np.min(2 * np.asarray(q.budgets) / h2_det(q))) for q in members)
    return math.exp(-108.0 * g_det) / 6.0, bool(96.0 * worst >= 1.0)


def lower_bound_value_sto(instance: Instance, g: Callable[[float], float]) -> float:
    """exp(-min_l C_l / H~2_sto) for Bernoulli-consumption families."""
    c = np.asarray(instance.budgets)
    return math.exp(-float(np.min(c / tilde_h2_sto(instance, g))))


@dataclass
class ComplexityReport:
    f_per_rank: list
    h2_sto: list
    h2_det: list
    h1_det: list
    h1_refined: list
    h2_refined: list
    gamma: float
    gamma_det: float
    upper_bound_general: float
    upper_bound_det: float
    gaps: list

    def to_dict(self) -> dict:
        return asdict(self)


def complexity_report(instance: Instance) -> ComplexityReport:
    h1r, h2r = refined_h(instance, sort_arms=True)
    g, g_det = gamma(instance)
    ub, ub_det = upper_bound_value(instance)
    return ComplexityReport(
        f_per_rank=f_per_rank(instance).tolist(),
        h2_sto=h2_sto(instance).tolist(),
        h2_det=h2_det(instance).tolist(),
        h1_det=h1_det(instance).tolist(),
        h1_refined=h1r.tolist(),
        h2_refined=h2r.tolist(),
        gamma=g,
        gamma_det=g_det,
        upper_bound_general=ub,
        upper_bound_det=ub_det,
        gaps=reward_gaps(instance.reward_means).tolist(),
    )
