"""Problem instances: arms with joint reward/consumption laws, budgets and envelopes.

Arm indices are 0-based throughout the package; arm 0 is the first arm of the
instance file. Randomness always comes from an injected ``random.Random``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

INDEPENDENT = "independent"
SHARED_UNIFORM = "shared_uniform"
COUPLINGS = (INDEPENDENT, SHARED_UNIFORM)

# slack for float round-off when comparing envelopes against closed forms
_ENV_TOL = 1e-12


class InstanceError(ValueError):
    """Raised when an instance (or part of one) violates a model invariant."""


@dataclass(frozen=True)
class Deterministic:
    value: float

    kind = "deterministic"

    def mean(self) -> float:
        return float(self.value)

    def variance(self) -> float:
        return 0.0

    def deviation_bound(self, tight_bernoulli_b: bool = False) -> float:
        return 0.0

    def support(self) -> tuple[float, float]:
        return (self.value, self.value)

    def drawer(self) -> Callable:
        v = float(self.value)
        return lambda rng: v

    def threshold(self, u: float) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class Bernoulli:
    mean_: float

    kind = "bernoulli"

    def mean(self) -> float:
        return float(self.mean_)

    def variance(self) -> float:
        return self.mean_ * (1.0 - self.mean_)

    def deviation_bound(self, tight_bernoulli_b: bool = False) -> float:
        # b = 1 unless the tight max(d, 1 - d) is requested
        if tight_bernoulli_b:
            return max(self.mean_, 1.0 - self.mean_)
        return 1.0

    def support(self) -> tuple[float, float]:
        return (0.0, 1.0)

    def drawer(self) -> Callable:
        p = float(self.mean_)
        return lambda rng: 1.0 if rng.random() < p else 0.0

    def threshold(self, u: float) -> float:
        return 1.0 if u <= self.mean_ else 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": self.mean_}


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    kind = "uniform"

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def variance(self) -> float:
        return (self.hi - self.lo) ** 2 / 12.0

    def deviation_bound(self, tight_bernoulli_b: bool = False) -> float:
        return 0.5 * (self.hi - self.lo)

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def drawer(self) -> Callable:
        lo, width = float(self.lo), float(self.hi - self.lo)
        return lambda rng: lo + width * rng.random()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Gaussian:
    mean_: float
    variance_: float = 1.0

    kind = "gaussian"

    def mean(self) -> float:
        return float(self.mean_)

    def variance(self) -> float:
        return float(self.variance_)

    def deviation_bound(self, tight_bernoulli_b: bool = False) -> float:
        return math.inf

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def drawer(self) -> Callable:
        mu, sd = float(self.mean_), math.sqrt(self.variance_)
        return lambda rng: rng.gauss(mu, sd)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": self.mean_, "variance": self.variance_}


DistributionSpec = Union[Deterministic, Bernoulli, Uniform, Gaussian]


def dist_from_dict(data: dict, where: str = "distribution") -> DistributionSpec:
    """Build a distribution from its JSON form, e.g. ``{"kind": "bernoulli", "mean": 0.4}``."""
    if not isinstance(data, dict) or "kind" not in data:
        raise InstanceError(f"{where}: expected an object with a 'kind' field")
    kind = data["kind"]
    try:
        if kind == "deterministic":
            return Deterministic(float(data["value"]))
        if kind == "bernoulli":
            return Bernoulli(float(data["mean"]))
        if kind == "uniform":
            return Uniform(float(data["lo"]), float(data["hi"]))
        if kind == "gaussian":
            return Gaussian(float(data["mean"]), float(data.get("variance", 1.0)))
    except KeyError as exc:
        raise InstanceError(f"{where}: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError):
        raise InstanceError(f"{where}: parameters must be numbers") from None
    raise InstanceError(f"{where}: unknown kind {kind!r}")


def _check_dist(dist: DistributionSpec, where: str, consumption: bool) -> None:
    params = [v for v in dist.to_dict().values() if not isinstance(v, str)]
    if not all(math.isfinite(v) for v in params):
        raise InstanceError(f"{where}: parameters must be finite")
    if isinstance(dist, Bernoulli) and not 0.0 <= dist.mean_ <= 1.0:
        raise InstanceError(f"{where}: Bernoulli mean {dist.mean_} outside [0, 1]")
    if isinstance(dist, Uniform) and dist.lo > dist.hi:
        raise InstanceError(f"{where}: uniform requires lo <= hi")
    if isinstance(dist, Gaussian) and dist.variance_ < 0:
        raise InstanceError(f"{where}: negative variance")
    if not consumption:
        return
    if isinstance(dist, Gaussian):
        raise InstanceError(f"{where}: Gaussian consumption not allowed")
    lo, hi = dist.support()
    if lo < 0.0 or hi > 1.0:
        raise InstanceError(f"{where}: consumption support [{lo}, {hi}] not inside [0, 1]")
    if dist.mean() <= 0.0:
        raise InstanceError(f"{where}: mean {dist.mean():g} not allowed")


class Outcome(NamedTuple):
    reward: float
    consumptions: tuple


@dataclass(frozen=True)
class ArmModel:
    reward: DistributionSpec
    consumption: tuple
    coupling: str = INDEPENDENT

    def __post_init__(self):
        object.__setattr__(self, "consumption", tuple(self.consumption))
        self.validate()

    def validate(self, where: str = "arm") -> None:
        if self.coupling not in COUPLINGS:
            raise InstanceError(f"{where}.coupling: unknown coupling {self.coupling!r}")
        _check_dist(self.reward, f"{where}.reward", consumption=False)
        for j, dist in enumerate(self.consumption):
            _check_dist(dist, f"{where}.consumption[{j}]", consumption=True)
        if self.coupling == SHARED_UNIFORM:
            for part in (self.reward, *self.consumption):
                if not isinstance(part, (Bernoulli, Deterministic)):
                    raise InstanceError(
                        f"{where}.coupling: shared_uniform needs Bernoulli or deterministic "
                        f"components, got {part.kind}"
                    )

    def sampler(self) -> Callable:
        """Return a fast ``rng -> (reward, consumptions)`` closure for this arm."""
        if self.coupling == SHARED_UNIFORM:
            parts = (self.reward, *self.consumption)

            def draw(rng):
                # U in (0, 1] so that a zero-mean threshold never fires
                u = 1.0 - rng.random()
                r, *d = (p.threshold(u) for p in parts)
                return r, tuple(d)

            return draw
        reward_draw = self.reward.drawer()
        cons_draws = [c.drawer() for c in self.consumption]
        if len(cons_draws) == 1:
            (c0,) = cons_draws
            return lambda rng: (reward_draw(rng), (c0(rng),))
        return lambda rng: (reward_draw(rng), tuple(c(rng) for c in cons_draws))

    def to_dict(self) -> dict:
        return {
            "reward": self.reward.to_dict(),
            "consumption": [c.to_dict() for c in self.consumption],
            "coupling": self.coupling,
        }


def sample(arm: ArmModel, rng) -> Outcome:
    """Draw one outcome (reward; D_1, ..., D_L) from ``arm``."""
    reward, cons = arm.sampler()(rng)
    return Outcome(reward, cons)


@dataclass(frozen=True)
class Instance:
    """A problem with K arms, L resources, budgets and an optional envelope override.

    When ``envelope_override`` is None the envelope is the tight one computed
    from the arms (see :func:`tight_envelope`).
    """

    arms: tuple
    budgets: tuple
    envelope_override: tuple | None = None
    tight_bernoulli_b: bool = False
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        object.__setattr__(self, "budgets", tuple(float(c) for c in self.budgets))
        if self.envelope_override is not None:
            env = tuple((float(b), float(s2)) for b, s2 in self.envelope_override)
            object.__setattr__(self, "envelope_override", env)
        self.validate()

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def n_resources(self) -> int:
        return len(self.budgets)

    def validate(self) -> None:
        if not self.arms:
            raise InstanceError("arms: at least one arm required")
        L = self.n_resources
        if L < 1:
            raise InstanceError("budgets: at least one resource required")
        for j, c in enumerate(self.budgets):
            if not (math.isfinite(c) and c >= 0):
                raise InstanceError(f"budgets[{j}]: must be a finite non-negative number")
        for k, arm in enumerate(self.arms):
            if not isinstance(arm, ArmModel):
                raise InstanceError(f"arms[{k}]: expected an ArmModel")
            if len(arm.consumption) != L:
                raise InstanceError(
                    f"arms[{k}].consumption: {len(arm.consumption)} entries, expected {L}"
                )
            arm.validate(f"arms[{k}]")
        r = self.reward_means
        if len(r) >= 2 and np.sum(r == r.max()) > 1:
            raise InstanceError("arms: unique best arm required")
        if self.envelope_override is not None:
            self._check_envelope(self.envelope_override)

    def _check_envelope(self, env) -> None:
        if len(env) != self.n_resources:
            raise InstanceError(
                f"envelope_override: {len(env)} entries, expected {self.n_resources}"
            )
        for j, (b, s2) in enumerate(env):
            if b < 0 or s2 < 0:
                raise InstanceError(f"envelope_override[{j}]: negative entries")
            if s2 > b * b * (1 + _ENV_TOL):
                raise InstanceError(f"envelope_override[{j}]: sigma^2 {s2:g} exceeds b^2 {b * b:g}")
            for k, arm in enumerate(self.arms):
                dist = arm.consumption[j]
                # dominance is checked against the true (tight) deviation
                dev = dist.deviation_bound(tight_bernoulli_b=True)
                if dev > b + _ENV_TOL:
                    raise InstanceError(
                        f"envelope_override[{j}]: b {b:g} below deviation {dev:g} of arms[{k}]"
                    )
                if dist.variance() > s2 + _ENV_TOL:
                    raise InstanceError(
                        f"envelope_override[{j}]: sigma^2 {s2:g} below variance of arms[{k}]"
                    )

    @property
    def reward_means(self) -> np.ndarray:
        if "r" not in self._cache:
            self._cache["r"] = np.array([a.reward.mean() for a in self.arms], dtype=float)
        return self._cache["r"]

    @property
    def consumption_means(self) -> np.ndarray:
        """Array of shape (L, K)."""
        if "d" not in self._cache:
            d = [[a.consumption[j].mean() for a in self.arms] for j in range(self.n_resources)]
            self._cache["d"] = np.array(d, dtype=float).reshape(self.n_resources, self.n_arms)
        return self._cache["d"]

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.reward_means))

    @property
    def envelope(self) -> tuple:
        if self.envelope_override is not None:
            return self.envelope_override
        return tight_envelope(self)

    def to_dict(self) -> dict:
        out = {"arms": [a.to_dict() for a in self.arms], "budgets": list(self.budgets)}
        if self.envelope_override is not None:
            out["envelope_override"] = [list(p) for p in self.envelope_override]
        return out

    @classmethod
    def from_dict(cls, data: dict, tight_bernoulli_b: bool = False) -> "Instance":
        if not isinstance(data, dict):
            raise InstanceError("instance: expected a JSON object")
        for key in ("arms", "budgets"):
            if key not in data:
                raise InstanceError(f"{key}: missing")
        if not isinstance(data["arms"], list):
            raise InstanceError("arms: expected a list")
        if not isinstance(data["budgets"], list):
            raise InstanceError("budgets: expected a list")
        arms = []
        for k, raw in enumerate(data["arms"]):
            where = f"arms[{k}]"
            if not isinstance(raw, dict):
                raise InstanceError(f"{where}: expected an object")
            if "reward" not in raw or "consumption" not in raw:
                raise InstanceError(f"{where}: needs 'reward' and 'consumption'")
            if not isinstance(raw["consumption"], list):
                raise InstanceError(f"{where}.consumption: expected a list")
            reward = dist_from_dict(raw["reward"], f"{where}.reward")
            cons = [
                dist_from_dict(c, f"{where}.consumption[{j}]")
                for j, c in enumerate(raw["consumption"])
            ]
            coupling = raw.get("coupling", INDEPENDENT)
            arm = ArmModel.__new__(ArmModel)
            object.__setattr__(arm, "reward", reward)
            object.__setattr__(arm, "consumption", tuple(cons))
            object.__setattr__(arm, "coupling", coupling)
            arm.validate(where)
            arms.append(arm)
        try:
            budgets = [float(c) for c in data["budgets"]]
        except (TypeError, ValueError):
            raise InstanceError("budgets: entries must be numbers") from None
        env = data.get("envelope_override")
        if env is not None:
            try:
                env = [(float(b), float(s2)) for b, s2 in env]
            except (TypeError, ValueError):
                raise InstanceError("envelope_override: expected [[b, sigma2], ...]") from None
        return cls(arms, budgets, env, tight_bernoulli_b)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str, tight_bernoulli_b: bool = False) -> "Instance":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"instance: invalid JSON ({exc.msg})") from None
        return cls.from_dict(data, tight_bernoulli_b)


def means(instance: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form mean rewards (K,) and mean consumptions (L, K); arms are not reordered."""
    return instance.reward_means.copy(), instance.consumption_means.copy()


def tight_envelope(instance: Instance, tight_bernoulli_b: bool | None = None) -> tuple:
    """Per-resource (b, sigma^2): max deviation bound and max variance over arms.

    Bernoulli consumption uses b = 1 unless ``tight_bernoulli_b`` is set, in
    which case it uses max(d, 1 - d). sigma^2 is clamped to at most b^2.
    """
    if tight_bernoulli_b is None:
        tight_bernoulli_b = instance.tight_bernoulli_b
    env = []
    for j in range(instance.n_resources):
        dists = [arm.consumption[j] for arm in instance.arms]
        b = max(d.deviation_bound(tight_bernoulli_b) for d in dists)
        s2 = max(d.variance() for d in dists)
        env.append((b, min(s2, b * b)))
    return tuple(env)


def make_instance(
    rewards: Sequence[DistributionSpec],
    consumption: Sequence[Sequence[DistributionSpec]],
    budgets: Sequence[float],
    coupling: str = INDEPENDENT,
) -> Instance:
    """Convenience constructor: ``consumption[k]`` lists arm k's L consumption laws."""
    arms = [ArmModel(r, tuple(c), coupling) for r, c in zip(rewards, consumption)]
    return Instance(arms, budgets)
