"""One random instance through the whole pipeline: relaxation, rounding, derandomization."""

from fractions import Fraction

import numpy as np

from rcjrp.factorlp import build_tilde_policy
from rcjrp.gridmath import RANDOM, GridConfig
from rcjrp.instance import GeneratorSpec, generate
from rcjrp.policies import best_of_two, build_policy, cost_profile, derandomize, evaluate
from rcjrp.relaxation import solve_relaxation

inst = generate(GeneratorSpec(n=25, D=3, seed=11))
sol = solve_relaxation(inst)
print(f"n = {inst.n}, D = {inst.D}")
print(f"OPT(P) = {sol.objective:.6f}  (KKT residual {sol.kkt_residual:.1e}, binding rows {sorted(sol.active_resources)})")

static = evaluate(build_policy(sol, GridConfig(2, 2), instance=inst), inst, sol.objective)
print(f"static (2,2):             ratio {static.ratio:.4f}")

pair = best_of_two(sol, inst, GridConfig(2, 2), GridConfig(2, 3))
print(f"best of (2,2)/(2,3):      ratio {pair.cost.ratio:.4f}, bound {pair.bound / sol.objective:.4f}")

prof = cost_profile(sol, inst, GridConfig(3, 2, 1, RANDOM))
print(f"shifted (3,2), E over theta: {prof.mean() / sol.objective:.4f} over {len(prof.lo)} pieces")

der = derandomize(sol, inst, GridConfig(2, 1, Fraction(3, 2), RANDOM))
thetas = np.linspace(0, 1, 11)
print(f"interleaved (2,1,3/2):    theta* = {der.theta:.4f}, ratio {der.cost.ratio:.4f}")
print("  F(theta)/OPT on a coarse grid:", np.round(der.profile.value(thetas) / sol.objective, 4))

tilde = build_tilde_policy(sol, inst, 200)
print(f"modified point, N = 200:  ratio {tilde.cost.ratio:.4f} at theta {tilde.theta:.4f}")
