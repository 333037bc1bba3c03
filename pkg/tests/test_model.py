import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from baiwrc.model import (
    ArmModel,
    Bernoulli,
    Deterministic,
    Gaussian,
    Instance,
    InstanceError,
    Uniform,
    dist_from_dict,
    make_instance,
    means,
    sample,
    tight_envelope,
)


class FixedU:
    """Stand-in rng whose shared uniform U comes out as ``u`` (the sampler uses 1 - random())."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return 1.0 - self.u


def shared(r, d):
    return ArmModel(Bernoulli(r), [Bernoulli(d)], "shared_uniform")


def test_shared_uniform_low_u_fires_both():
    out = sample(shared(0.9, 0.1), FixedU(0.05))
    assert out.reward == 1.0 and out.consumptions == (1.0,)


def test_shared_uniform_mid_u_fires_reward_only():
    out = sample(shared(0.9, 0.1), FixedU(0.5))
    assert out.reward == 1.0 and out.consumptions == (0.0,)


def test_point_masses_always_return_their_values():
    arm = ArmModel(Deterministic(0.7), [Deterministic(0.3)])
    rng = random.Random(0)
    assert {sample(arm, rng) for _ in range(20)} == {(0.7, (0.3,))}


def test_closed_form_moments():
    assert Bernoulli(0.4).mean() == 0.4
    u = Uniform(0.0, 0.6)
    assert u.mean() == pytest.approx(0.3)
    assert u.variance() == pytest.approx(0.6**2 / 12)
    assert u.variance() == pytest.approx(0.03)
    assert Deterministic(0.25).mean() == 0.25
    assert Deterministic(0.25).variance() == 0.0


def test_means_do_not_reorder_arms():
    inst = make_instance(
        [Bernoulli(0.2), Bernoulli(0.7), Bernoulli(0.5)],
        [[Deterministic(0.9)], [Deterministic(0.1)], [Deterministic(0.4)]],
        [10.0],
    )
    r, d = means(inst)
    np.testing.assert_array_equal(r, [0.2, 0.7, 0.5])
    np.testing.assert_array_equal(d, [[0.9, 0.1, 0.4]])
    assert inst.best_arm == 1


def test_tight_envelope_deterministic_is_zero():
    inst = make_instance([Bernoulli(0.5), Bernoulli(0.4)],
                         [[Deterministic(0.3)], [Deterministic(0.8)]], [5])
    assert tight_envelope(inst) == ((0.0, 0.0),)


def test_tight_envelope_bernoulli_uses_unit_b():
    inst = make_instance([Bernoulli(0.5), Bernoulli(0.4)],
                         [[Bernoulli(0.1)], [Bernoulli(0.5)]], [5])
    (b, s2), = tight_envelope(inst)
    assert b == 1.0
    assert s2 == pytest.approx(0.25)


def test_tight_bernoulli_b_flag_switches_to_max_d():
    inst = make_instance([Bernoulli(0.5), Bernoulli(0.4)],
                         [[Bernoulli(0.1)], [Bernoulli(0.3)]], [5])
    (b, s2), = tight_envelope(inst, tight_bernoulli_b=True)
    assert b == pytest.approx(0.9)
    assert s2 == pytest.approx(0.21)


def test_tight_envelope_uniform_zero_to_two_d():
    d = 0.3
    inst = make_instance([Bernoulli(0.5), Bernoulli(0.4)],
                         [[Uniform(0, 2 * d)], [Uniform(0, 2 * d)]], [5])
    (b, s2), = tight_envelope(inst)
    assert b == pytest.approx(0.3)
    assert s2 == pytest.approx(d * d / 3)


def test_rejects_tied_best_arms():
    with pytest.raises(InstanceError, match="unique best arm required"):
        make_instance([Bernoulli(0.5), Bernoulli(0.5)],
                      [[Deterministic(1)], [Deterministic(1)]], [1])


def test_rejects_zero_mean_consumption():
    with pytest.raises(InstanceError, match="mean 0 not allowed"):
        make_instance([Bernoulli(0.5), Bernoulli(0.4)],
                      [[Bernoulli(0.0)], [Deterministic(1)]], [1])


def test_rejects_support_outside_unit_interval():
    with pytest.raises(InstanceError, match="not inside"):
        make_instance([Bernoulli(0.5), Bernoulli(0.4)],
                      [[Uniform(0.5, 1.5)], [Deterministic(1)]], [1])


def test_rejects_gaussian_consumption():
    with pytest.raises(InstanceError, match="Gaussian"):
        ArmModel(Bernoulli(0.5), [Gaussian(0.5, 0.1)])


def test_rejects_envelope_with_sigma_above_b():
    arms = [ArmModel(Bernoulli(0.5), [Deterministic(0.5)]),
            ArmModel(Bernoulli(0.4), [Deterministic(0.5)])]
    with pytest.raises(InstanceError, match="exceeds b"):
        Instance(arms, [2], envelope_override=[(0.1, 0.02)])


def test_rejects_envelope_not_dominating():
    arms = [ArmModel(Bernoulli(0.5), [Uniform(0, 0.6)]),
            ArmModel(Bernoulli(0.4), [Uniform(0, 0.6)])]
    with pytest.raises(InstanceError, match="below deviation"):
        Instance(arms, [2], envelope_override=[(0.2, 0.03)])


def test_shared_uniform_needs_threshold_laws():
    with pytest.raises(InstanceError, match="shared_uniform"):
        ArmModel(Bernoulli(0.5), [Uniform(0, 0.2)], "shared_uniform")


def test_consumption_length_must_match_budgets():
    with pytest.raises(InstanceError, match=r"arms\[1\]\.consumption"):
        Instance([ArmModel(Bernoulli(0.5), [Deterministic(1)]),
                  ArmModel(Bernoulli(0.4), [Deterministic(1), Deterministic(1)])], [1])


def test_from_dict_names_offending_field():
    data = {
        "arms": [
            {"reward": {"kind": "bernoulli", "mean": 0.5},
             "consumption": [{"kind": "deterministic", "value": 0.5}]},
            {"reward": {"kind": "bernoulli", "mean": 0.4},
             "consumption": [{"kind": "bernoulli", "mean": 0.0}]},
        ],
        "budgets": [3],
    }
    with pytest.raises(InstanceError, match=r"arms\[1\]\.consumption\[0\]: mean 0 not allowed"):
        Instance.from_dict(data)
    with pytest.raises(InstanceError, match="unknown kind"):
        dist_from_dict({"kind": "poisson"})


def test_single_arm_is_accepted():
    inst = make_instance([Bernoulli(0.3)], [[Deterministic(1)]], [4])
    assert inst.n_arms == 1 and inst.best_arm == 0


def test_json_round_trip_preserves_instance():
    arms = [ArmModel(Gaussian(0.5), [Uniform(0, 0.4), Bernoulli(0.3)]),
            ArmModel(Gaussian(0.2, 2.0), [Deterministic(0.1), Bernoulli(0.9)])]
    inst = Instance(arms, [10, 20], envelope_override=[(0.5, 0.2), (1.0, 0.25)])
    again = Instance.from_json(inst.to_json())
    assert again == inst
    assert json.loads(again.to_json()) == json.loads(inst.to_json())


LAWS = [Bernoulli(0.37), Uniform(0.1, 0.8), Deterministic(0.25), Gaussian(0.4, 2.0)]


@pytest.mark.parametrize("law", LAWS, ids=lambda d: d.kind)
def test_sample_mean_within_four_standard_errors(law):
    n = 10**6
    rng = random.Random(12345)
    draw = law.drawer()
    total = math.fsum(draw(rng) for _ in range(n))
    se = math.sqrt(law.variance() / n)
    assert abs(total / n - law.mean()) <= 4 * se + 1e-12


@settings(max_examples=30, deadline=None)
@given(r=st.floats(0.01, 0.99), d=st.floats(0.01, 0.99), seed=st.integers(0, 2**32))
def test_shared_uniform_is_comonotone(r, d, seed):
    arm = shared(r, d)
    draw = arm.sampler()
    rng = random.Random(seed)
    for _ in range(10**4 // 30):
        reward, (cons,) = draw(rng)
        if reward == 1.0 and d >= r:
            assert cons == 1.0
        if cons == 1.0 and r >= d:
            assert reward == 1.0


def test_shared_uniform_marginals_match_means():
    arm = shared(0.9, 0.2)
    draw = arm.sampler()
    rng = random.Random(7)
    n = 10**5
    out = np.array([(r, c) for r, (c,) in (draw(rng) for _ in range(n))])
    assert abs(out[:, 0].mean() - 0.9) < 4 * math.sqrt(0.09 / n)
    assert abs(out[:, 1].mean() - 0.2) < 4 * math.sqrt(0.16 / n)
