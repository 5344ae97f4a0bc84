"""The seven acceptance criteria, each at its stated tolerance and time budget.

Run ``pytest tests/test_acceptance.py`` for the default scale, and add
``--full`` (or set RCJRP_FULL=1) for the N = L = 2000 factor-revealing LP.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from rcjrp.cli import BOUNDS, _instance_seeds, reproduce
from rcjrp.factorlp import build_lp, final_guarantee, recheck_certificate, solve_lp
from rcjrp.gridmath import (
    RANDOM,
    SNAP,
    GridConfig,
    density,
    density_many,
    expected_density,
    expected_recip_round,
    expected_round,
    multipliers,
    round_up,
    round_up_many,
)
from rcjrp.instance import GeneratorSpec, generate
from rcjrp.relaxation import exactly_feasible, psi, sample_feasible, solve_relaxation
from rcjrp.simulate import horizon_density, monte_carlo_theta

LN2, LN3 = math.log(2.0), math.log(3.0)
S2, S3 = math.sqrt(2.0), math.sqrt(3.0)

CONFIGS = {
    "static(2,2)": GridConfig(2, 2),
    "static(2,3)": GridConfig(2, 3),
    "shifted(2,1)": GridConfig(2, 1, 1, RANDOM),
    "shifted(2,2)": GridConfig(2, 2, 1, RANDOM),
    "shifted(3,2)": GridConfig(3, 2, 1, RANDOM),
    "interleaved(2,1,3/2)": GridConfig(2, 1, Fraction(3, 2), RANDOM),
}

CLOSED_FORMS = {
    "static(2,2)": ((S2 + 1) / 2, 1.0, S2),
    "static(2,3)": (1 / (2 * (2 ** (1 / 3) - 1)), 1.0, 2 ** (1 / 3)),
    "shifted(2,1)": (1 / (2 * LN2), 1 / (2 * LN2), 1 / LN2),
    "shifted(2,2)": (1 / LN2, (2 - S2) / LN2, 2 * (S2 - 1) / LN2),
    "shifted(3,2)": (None, None, 2 * (S3 - 1) / LN3),
    "interleaved(2,1,3/2)": (5 / (6 * LN2), 7 / (12 * LN2), 5 / (6 * LN2)),
}

REPRODUCE_SEEDS = 100
RHO_200 = (1.2510376083, 1.2510376084)  # regression interval at N = L = 200


def test_criterion_1_multiplier_table(record):
    worst = 0.0
    for name, cfg in CONFIGS.items():
        got = multipliers(cfg)
        for g, want in zip(got, CLOSED_FORMS[name]):
            if want is not None:
                worst = max(worst, abs(g - want))
    record(1, worst <= 1e-12, f"multiplier table, max deviation {worst:.1e} (tol 1e-12)")
    assert worst <= 1e-12


def test_criterion_2_density_oracle(record):
    worst = 0.0
    t0 = time.perf_counter()
    for cfg in CONFIGS.values():
        beta = cfg.beta if cfg.interleaved else 0.0
        for theta in (0.0, 0.3, 1.0 - beta):
            for anchor in (1.0, 0.37):
                c = GridConfig(cfg.m, cfg.k, cfg.alpha, theta, anchor)
                horizon = 1e6 * anchor
                hc = horizon_density(c, horizon)
                worst = max(worst, abs(density(c) - hc.density_estimate) * horizon)
    elapsed = time.perf_counter() - t0
    ok = worst <= 8.0
    record(2, ok, f"density oracle, max |D - N/Delta| = {worst:.2f}/Delta (tol 8/Delta), {elapsed:.1f}s")
    assert ok


def test_criterion_3_expectation_oracle(record):
    rng = np.random.default_rng(2024)
    choices = list(CONFIGS.values()) + [GridConfig(2, 1, Fraction(4, 3), RANDOM), GridConfig(3, 1, Fraction(5, 3), RANDOM)]
    worst = 0.0
    for i in range(10):
        base = choices[i % len(choices)]
        cfg = GridConfig(base.m, base.k, base.alpha, RANDOM, float(np.exp(rng.uniform(-1, 1))))
        t = float(np.exp(rng.uniform(-2, 2)))
        seed = int(rng.integers(2**31))
        checks = [
            (lambda th: round_up_many(cfg, t, th), expected_round(cfg, t)),
            (lambda th: 1.0 / round_up_many(cfg, t, th), expected_recip_round(cfg, t)),
            (lambda th: density_many(cfg, th), expected_density(cfg)),
        ]
        for fn, closed in checks:
            mean, se = monte_carlo_theta(fn, 10**6, seed, vectorized=True)
            worst = max(worst, abs(mean - closed) / se)
    ok = worst <= 3.0
    record(3, ok, f"expectation oracle, 10 (config, t) pairs x 3 quantities, max {worst:.2f} SE (tol 3)")
    assert ok


@pytest.fixture(scope="module")
def reproduced(tmp_path_factory):
    t0 = time.perf_counter()
    res = reproduce(REPRODUCE_SEEDS, tmp_path_factory.mktemp("reproduce"), root_seed=0)
    return res, time.perf_counter() - t0


def test_criterion_4_ratio_dominance(record, reproduced):
    res, elapsed = reproduced
    checked = {name: BOUNDS[name] for name in (
        "static(2,2)",
        "best-of-two static (2,2)/(2,3) bound",
        "shifted(3,2) theta-average",
        "best-of-two shifted (2,1)/(2,2) theta-average",
        "interleaved(2,1,3/2) derandomized",
    )}
    rows = res["instances"]
    assert len(rows) >= 100
    assert all(r["n"] <= 50 and r["D"] <= 5 for r in rows)
    bad = []
    worst_margin = -math.inf
    for name, bound in checked.items():
        for r in rows:
            slack = 1e-6 + r["kkt_residual"]
            worst_margin = max(worst_margin, r[name] - bound)
            if r[name] > bound + slack:
                bad.append((name, r["index"], r[name]))
    ok = not bad and elapsed <= 120.0
    record(4, ok, f"ratio dominance on {len(rows)} instances, worst ratio - bound = {worst_margin:.4f}, {elapsed:.1f}s (budget 120s)")
    assert not bad, bad[:5]
    assert elapsed <= 120.0


def test_criterion_5_factor_revealing_lp(record, full_run):
    t0 = time.perf_counter()
    model = build_lp(200, 200)
    sol = solve_lp(model)
    lo, hi = recheck_certificate(model, sol.witness, sol.certificate)
    default_time = time.perf_counter() - t0
    default_ok = (
        RHO_200[0] <= sol.rho <= RHO_200[1]
        and abs(lo - sol.lower) <= 1e-9
        and abs(hi - sol.upper) <= 1e-9
        and hi - lo <= 1e-9
        and default_time <= 10.0
    )
    detail = f"N=L=200 rho={sol.rho:.10f} gap={hi - lo:.1e} ({default_time:.1f}s)"
    ok = default_ok
    if full_run:
        t0 = time.perf_counter()
        big = solve_lp(build_lp(2000, 2000))
        full_time = time.perf_counter() - t0
        guarantee = final_guarantee(big.rho, 2000)
        full_ok = abs(big.rho - 1.250677) <= 1e-4 and guarantee < 1.2512 and full_time <= 600.0
        ok = ok and full_ok
        detail += f"; N=L=2000 rho={big.rho:.6f} guarantee={guarantee:.6f} ({full_time:.0f}s)"
    else:
        detail += "; N=L=2000 not run (use --full)"
    record(5, ok, detail)
    assert ok


def test_criterion_6_configuration_sweeps(record, static_sweep, shifted_sweep, interleaved_sweep):
    st, sh, il = static_sweep, shifted_sweep, interleaved_sweep
    checks = {
        "static argmin (2,2)": st.argmin == [(2, 2)] and abs(st.value - S2) <= 1e-12,
        "x*_2": abs(st.extras["x_star_2"] - 2.2223) <= 1e-3,
        "shifted argmin (3,2)": sh.argmin == [(3, 2)] and abs(sh.value - 2 * (S3 - 1) / LN3) <= 1e-12,
        "interleaved argmin": set(il.argmin) == {(2, 1, Fraction(3, 2)), (2, 1, Fraction(4, 3))}
        and abs(il.value - 5 / (6 * LN2)) <= 1e-12,
        "parity formulas exact": il.extras["parity_checked"] > 0 and not any("formula" in f for f in il.failures),
        "all reports ok": st.ok and sh.ok and il.ok,
    }
    failed = [k for k, v in checks.items() if not v]
    ok = not failed
    record(6, ok, f"sweeps: static {len(st.entries)}, shifted {len(sh.entries)}, interleaved {len(il.entries)} configs, "
                  f"{il.extras['parity_checked']} parity cases" + (f"; failed {failed}" if failed else ""))
    assert ok, failed


def test_criterion_7_property_suites(record, reproduced):
    res, _ = reproduced
    problems = []

    # round_up strictness and scale covariance
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        m, k = int(rng.integers(2, 9)), int(rng.integers(1, 5))
        cfg = GridConfig(m, k, 1, float(rng.random()), float(np.exp(rng.uniform(-3, 3))))
        t = float(np.exp(rng.uniform(-5, 5)))
        g = round_up(cfg, t)
        prev = cfg.scale * float(cfg.power(g.p - 1))
        if not (g.value > t and prev <= t * (1 + SNAP)):
            problems.append(f"round_up strictness at {cfg}, t={t}")
        c = float(np.exp(rng.uniform(-2, 2)))
        if not math.isclose(round_up(cfg.with_anchor(cfg.anchor * c), c * t).value, c * g.value, rel_tol=1e-9):
            problems.append(f"round_up covariance at {cfg}, t={t}")

    # derandomized cost never exceeds the Monte-Carlo mean over the shift
    for r in res["instances"]:
        if r["interleaved(2,1,3/2) derandomized"] > r["interleaved(2,1,3/2) theta-average"]:
            problems.append(f"derandomized above MC mean on instance {r['index']}")

    # relaxation certificate and dominance over random feasible points; every
    # policy built by reproduce already passed the exact resource check
    for idx, (gen_seed, mc_seed) in enumerate(_instance_seeds(0, REPRODUCE_SEEDS)):
        g = np.random.default_rng(gen_seed)
        inst = generate(GeneratorSpec(int(g.integers(1, 51)), int(g.integers(0, 6)), gen_seed))
        sol = solve_relaxation(inst)
        if sol.kkt_residual > 1e-9 or not exactly_feasible(inst, sol.T_min_star, sol.T_star):
            problems.append(f"relaxation certificate on instance {idx}")
        for T_min, T in sample_feasible(inst, np.random.default_rng(mc_seed), 100):
            if psi(inst, T_min, T) < sol.objective * (1 - 1e-9):
                problems.append(f"relaxation dominated on instance {idx}")
                break
    ok = not problems
    record(7, ok, "property suites: 10^4 round_up cases, derandomized <= MC mean, KKT <= 1e-9 and dominance on "
                  f"{REPRODUCE_SEEDS} instances" + (f"; {len(problems)} problems" if problems else ""))
    assert ok, problems[:5]
