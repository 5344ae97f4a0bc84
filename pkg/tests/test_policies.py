import math
from fractions import Fraction

import numpy as np
import pytest

from rcjrp.gridmath import RANDOM, GridConfig, GridPoint, ScaledPower
from rcjrp.instance import GeneratorSpec, Instance, generate
from rcjrp.policies import (
    Policy,
    InfeasiblePolicyError,
    best_of_two,
    build_policy,
    cost_bound,
    cost_profile,
    derandomize,
    evaluate,
    exact_joint_density,
    policy_feasible,
)
from rcjrp.relaxation import RelaxedSolution, solve_relaxation
from rcjrp.simulate import count_joint_orders

SQRT2 = math.sqrt(2.0)
LN2 = math.log(2.0)


def handmade(T_min, T):
    T = np.array(T, dtype=float)
    return RelaxedSolution(float(T_min), T, 1.0, 0.0)


def random_instances(count, base_seed=0):
    rng = np.random.default_rng(base_seed)
    for s in range(count):
        inst = generate(GeneratorSpec(int(rng.integers(1, 31)), int(rng.integers(0, 6)), base_seed * 1000 + s))
        yield inst, solve_relaxation(inst)


def test_build_static_example():
    pol = build_policy(handmade(1.0, [1.0, 1.5]), GridConfig(2, 1))
    np.testing.assert_allclose(pol.intervals, [2.0, 2.0])


def test_build_interleaved_example():
    pol = build_policy(handmade(1.0, [1.0, 1.5]), GridConfig(2, 1, Fraction(3, 2)))
    np.testing.assert_allclose(pol.intervals, [1.5, 2.0])


def test_build_rejects_random_theta():
    with pytest.raises(ValueError):
        build_policy(handmade(1.0, [1.0]), GridConfig(2, 1, 1, RANDOM))


@pytest.mark.parametrize(
    "T, expected",
    [((2, 3), Fraction(2, 3)), ((2, 4, 8), Fraction(1, 2)), ((Fraction(3, 2), 2), Fraction(1))],
)
def test_exact_joint_density_examples(T, expected):
    pts = tuple(GridPoint(float(t), ScaledPower(Fraction(t)), 1.0, 0) for t in T)
    pol = Policy(pts, GridConfig(2, 1), "fixed")
    assert exact_joint_density(pol) == pytest.approx(float(expected), rel=1e-15)
    hc = count_joint_orders(pol.multipliers, 1e5)
    assert abs(hc.density_estimate - float(expected)) <= len(T) / 1e5


def test_single_commodity_cost():
    inst = Instance(1.0, [1.0], [1.0])
    sol = solve_relaxation(inst)
    pol = build_policy(sol, GridConfig(2, 1), instance=inst)
    T = pol.intervals[0]
    cost = evaluate(pol, inst, sol.objective)
    assert T == pytest.approx(2 * SQRT2)
    assert cost.total == pytest.approx(1.0 / T + 1.0 / T + T, rel=1e-14)


def test_policy_feasible_exact():
    inst = Instance(1.0, [1.0, 1.0], [1.0, 1.0], [[1.0, 1.0]])
    assert policy_feasible(inst, [2.0, 2.0])
    assert not policy_feasible(inst, [2.0, 2.0 - 1e-15])


def test_infeasible_policy_raises():
    inst = Instance(1.0, [1.0], [1.0], [[4.0]])
    bogus = handmade(0.5, [0.5])  # violates the row; rounding to 1 still violates
    with pytest.raises(InfeasiblePolicyError):
        build_policy(bogus, GridConfig(2, 1), instance=inst)


def test_rounded_policies_feasible_and_bounded():
    configs = [GridConfig(2, 2), GridConfig(2, 3), GridConfig(3, 2, 1, 0.4), GridConfig(2, 1, Fraction(3, 2), 0.8)]
    for inst, sol in random_instances(25):
        for cfg in configs:
            pol = build_policy(sol, cfg, instance=inst)
            assert policy_feasible(inst, pol.intervals)
            assert np.all(pol.intervals > sol.T_star)
            cost = evaluate(pol, inst, sol.objective)
            assert cost.density <= cost.density_bound * (1 + 1e-12)
        static = evaluate(build_policy(sol, GridConfig(2, 2), instance=inst), inst, sol.objective)
        assert static.ratio <= SQRT2 + 1e-6 + sol.kkt_residual
        assert static.total <= cost_bound(sol, inst, GridConfig(2, 2)) * (1 + 1e-12)


def test_best_of_two():
    for inst, sol in random_instances(15, 1):
        pair = best_of_two(sol, inst, GridConfig(2, 2), GridConfig(2, 3))
        assert pair.cost.total == min(c.total for c in pair.costs)
        assert pair.bound <= 1.3776 * sol.objective * (1 + 1e-6)
        same = best_of_two(sol, inst, GridConfig(2, 2), GridConfig(2, 2))
        assert same.costs[0].total == same.costs[1].total
        policy, cost = same
        assert cost.total == same.costs[0].total


def test_profile_matches_direct_evaluation():
    rng = np.random.default_rng(3)
    for inst, sol in random_instances(6, 2):
        for cfg in (GridConfig(3, 2, 1, RANDOM), GridConfig(2, 1, Fraction(3, 2), RANDOM)):
            prof = cost_profile(sol, inst, cfg)
            thetas = rng.random(25)
            direct = [evaluate(build_policy(sol, cfg.with_theta(float(t))), inst, 1.0).total for t in thetas]
            np.testing.assert_allclose(prof.value(thetas), direct, rtol=1e-9)
            assert prof.value([0.0])[0] == pytest.approx(prof.value([1.0])[0], rel=1e-12)


def test_profile_mean_is_integral():
    for inst, sol in random_instances(4, 3):
        prof = cost_profile(sol, inst, GridConfig(2, 2, 1, RANDOM))
        th = (np.arange(400_000) + 0.5) / 400_000
        assert prof.mean() == pytest.approx(prof.value(th).mean(), rel=1e-6)
        # the averaged grid-density cost is the closed-form bound
        assert prof.mean(bound=True) == pytest.approx(cost_bound(sol, inst, GridConfig(2, 2, 1, RANDOM)), rel=1e-9)


def test_single_piece_calculus():
    inst = Instance(1.0, [1.0], [1.0])
    sol = solve_relaxation(inst)
    der = derandomize(sol, inst, GridConfig(2, 1, 1, RANDOM))
    grid = np.linspace(0, 1, 20001)[1:]
    assert der.cost.total <= der.profile.value(grid).min() * (1 + 1e-12)
    assert 0.0 < der.theta < 1.0


def test_derandomized_beats_average():
    rng = np.random.default_rng(11)
    for inst, sol in random_instances(20, 4):
        der = derandomize(sol, inst, GridConfig(2, 1, Fraction(3, 2), RANDOM))
        samples = der.profile.value(rng.random(10_000))
        assert der.cost.total <= samples.mean()
        assert der.cost.total <= der.profile.mean() * (1 + 1e-12)
        assert der.cost.ratio <= 5 / (6 * LN2) + 1e-6 + sol.kkt_residual
        assert der.bound_value <= cost_bound(sol, inst, GridConfig(2, 1, Fraction(3, 2), RANDOM)) * (1 + 1e-12)
        # the chosen shift stays strictly inside its piece
        j = der.profile.piece_index([der.theta])[0]
        assert der.profile.lo[j] < der.theta < der.profile.hi[j]
        assert policy_feasible(inst, der.policy.intervals)


def test_derandomize_requires_random():
    inst = Instance(1.0, [1.0], [1.0])
    with pytest.raises(ValueError):
        derandomize(solve_relaxation(inst), inst, GridConfig(2, 1))
