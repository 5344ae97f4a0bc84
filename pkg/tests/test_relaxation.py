import math

import numpy as np
import pytest
from scipy.optimize import brentq, minimize

from rcjrp.instance import GeneratorSpec, Instance, InvalidInstanceError, generate
from rcjrp.relaxation import (
    RelaxedSolution,
    exactly_feasible,
    kkt_check,
    psi,
    sample_feasible,
    solve_relaxation,
    solve_unconstrained,
)


def test_single_commodity_closed_form():
    sol = solve_relaxation(Instance(1.0, [1.0], [1.0]))
    assert sol.T_min_star == pytest.approx(math.sqrt(2), rel=1e-12)
    assert sol.T_star[0] == pytest.approx(math.sqrt(2), rel=1e-12)
    assert sol.objective == pytest.approx(2 * math.sqrt(2), rel=1e-12)
    assert sol.kkt_residual < 1e-10


def test_single_commodity_with_resource():
    inst = Instance(1.0, [1.0], [1.0], [[2.0]])
    sol = solve_relaxation(inst)
    assert sol.T_star[0] == pytest.approx(2.0, rel=1e-9)
    assert sol.objective == pytest.approx(3.0, rel=1e-9)
    assert sol.active_resources == frozenset({0})
    # independent one-dimensional oracle: psi'(T) = -2/T^2 + 1 has its root below 2
    root = brentq(lambda T: -2.0 / T**2 + 1.0, 0.1, 10.0)
    assert root < 2.0
    assert sol.objective == pytest.approx(2.0 / 2.0 + 2.0, rel=1e-9)


def test_symmetric_commodities_clamp():
    sol = solve_relaxation(Instance(1.0, [1.0, 1.0], [1.0, 1.0]))
    assert np.all(sol.T_star == sol.T_min_star)
    assert sol.T_min_star == pytest.approx(math.sqrt(3 / 2), rel=1e-12)


def test_zero_individual_costs():
    sol = solve_relaxation(Instance(4.0, [0.0, 0.0], [1.0, 3.0]))
    assert sol.T_min_star == pytest.approx(1.0, rel=1e-12)
    assert sol.objective == pytest.approx(8.0, rel=1e-12)


def test_invalid_instance_rejected():
    with pytest.raises(InvalidInstanceError):
        solve_relaxation(Instance(1.0, [1.0], [0.0]))
    with pytest.raises(ValueError):
        solve_relaxation(Instance(1.0, [1.0], [1.0]), tol=0.1)


def test_kkt_detects_perturbation():
    inst = Instance(1.0, [1.0], [1.0])
    sol = solve_relaxation(inst)
    bad = RelaxedSolution(sol.T_min_star * 1.05, sol.T_star * 1.05, 0.0, 0.0)
    assert kkt_check(inst, bad).stationarity > 1e-3


def test_kkt_flags_claimed_binding_with_slack():
    inst = Instance(1.0, [1.0], [1.0], [[0.1]])
    sol = solve_relaxation(inst)
    fake = RelaxedSolution(sol.T_min_star, sol.T_star, sol.objective, 0.0, frozenset({0}))
    report = kkt_check(inst, fake)
    assert report.flagged and report.complementarity > 0.5


def _slsqp_oracle(inst: Instance) -> float:
    """Independent general-purpose solve in log-intervals."""
    def obj(z):
        return psi(inst, math.exp(z[0]), np.exp(z[1:]))

    cons = [{"type": "ineq", "fun": lambda z: z[1:] - z[0]}]
    if inst.D:
        cons.append({"type": "ineq", "fun": lambda z: 1.0 - inst.alpha @ np.exp(-z[1:])})
    T0 = np.sqrt((inst.K + inst.K0) / inst.H) * 4.0
    z0 = np.concatenate(([math.log(T0.min()) - 0.5], np.log(T0)))
    best = minimize(obj, z0, method="SLSQP", constraints=cons, options={"maxiter": 1000, "ftol": 1e-14})
    return float(best.fun)


@pytest.mark.parametrize("seed", range(8))
def test_matches_general_purpose_solver(seed):
    inst = generate(GeneratorSpec(6, 2, 100 + seed, alpha_bounds=(0.3, 3.0)))
    sol = solve_relaxation(inst)
    assert sol.objective <= _slsqp_oracle(inst) * (1 + 1e-7)
    assert sol.objective == pytest.approx(_slsqp_oracle(inst), rel=1e-5)


@pytest.mark.parametrize("seed", range(20))
def test_random_instances_certified(seed):
    rng = np.random.default_rng(seed)
    inst = generate(GeneratorSpec(int(rng.integers(1, 51)), int(rng.integers(0, 6)), seed))
    sol = solve_relaxation(inst)
    assert sol.kkt_residual <= 1e-9
    assert exactly_feasible(inst, sol.T_min_star, sol.T_star)
    assert np.all(sol.T_star >= sol.T_min_star)
    for T_min, T in sample_feasible(inst, rng, 100):
        assert exactly_feasible(inst, T_min, T) or np.max(inst.resource_usage(T)) <= 1 + 1e-12
        assert sol.objective <= psi(inst, T_min, T) * (1 + 1e-9)


def test_cost_scaling_invariant():
    inst = generate(GeneratorSpec(10, 2, 3))
    sol = solve_relaxation(inst)
    c = 7.5
    scaled = solve_relaxation(Instance(inst.K0 * c, inst.K * c, inst.H * c, inst.alpha))
    assert scaled.objective == pytest.approx(c * sol.objective, rel=1e-9)
    np.testing.assert_allclose(scaled.T_star, sol.T_star, rtol=1e-6)


def test_time_scaling_invariant():
    """Intervals scale by c when H -> H / c^2 and alpha -> alpha * c."""
    inst = generate(GeneratorSpec(10, 2, 4))
    sol = solve_relaxation(inst)
    c = 3.0
    scaled = solve_relaxation(Instance(inst.K0, inst.K, inst.H / c**2, inst.alpha * c))
    np.testing.assert_allclose(scaled.T_star, c * sol.T_star, rtol=1e-6)
    assert scaled.T_min_star == pytest.approx(c * sol.T_min_star, rel=1e-6)


def test_unconstrained_lower_bounds_constrained():
    inst = generate(GeneratorSpec(15, 3, 8, alpha_bounds=(0.5, 5.0)))
    assert solve_unconstrained(inst).objective <= solve_relaxation(inst).objective * (1 + 1e-12)
