"""Factor-revealing LP: value, witness support and the final guarantee for a few sizes."""

import sys
import time

from rcjrp.factorlp import build_lp, final_guarantee, solve_lp

sizes = [10, 50, 200] + ([2000] if "--full" in sys.argv else [])
print(f"{'N=L':>6} {'rho':>14} {'guarantee':>12} {'gap':>9} {'support':>8} {'seconds':>8}")
for N in sizes:
    t0 = time.perf_counter()
    sol = solve_lp(build_lp(N, N))
    dt = time.perf_counter() - t0
    support = int((sol.witness > 0).sum())
    print(f"{N:>6} {sol.rho:>14.10f} {final_guarantee(sol.rho, N):>12.8f} {sol.gap:>9.1e} {support:>8} {dt:>8.2f}")
