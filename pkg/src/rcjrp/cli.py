"""Command-line pipeline: generate, solve, round, evaluate, simulate, bounds and reproduction."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .factorlp import SEARCH, build_lp, build_tilde_policy, final_guarantee, solve_lp
from .gridmath import (
    RANDOM,
    GridConfig,
    ScaledPower,
    density_many,
    expected_density,
    expected_recip_round,
    expected_round,
    multipliers,
    round_up_many,
)
from .instance import (
    GeneratorSpec,
    Instance,
    InstanceFormatError,
    InvalidInstanceError,
    generate,
    instance_from_dict,
    instance_to_dict,
    read_instance,
    write_instance,
)
from .policies import (
    GridPoint,
    Policy,
    best_of_two,
    build_policy,
    cost_profile,
    derandomize,
    evaluate,
)
from .relaxation import RelaxedSolution, solve_relaxation
from .simulate import count_joint_orders, monte_carlo_theta
from .verify import TARGET_INTERLEAVED, TARGET_SHIFTED, TARGET_STATIC, sweep_interleaved, sweep_shifted, sweep_static

__all__ = ["main", "RunManifest", "reproduce", "evaluate_instance", "BOUNDS", "MULTIPLIER_TABLE"]

BOUNDS = {
    "static(2,2)": TARGET_STATIC,
    "best-of-two static (2,2)/(2,3) bound": 1.3776,
    "shifted(3,2) theta-average": TARGET_SHIFTED,
    "best-of-two shifted (2,1)/(2,2) theta-average": 1.2585,
    "tilde best-of-two (2,1)/(2,2)": 1.2512,
    "interleaved(2,1,3/2) derandomized": TARGET_INTERLEAVED,
}

MULTIPLIER_TABLE = [
    GridConfig(2, 2),
    GridConfig(2, 3),
    GridConfig(2, 1, 1, RANDOM),
    GridConfig(2, 2, 1, RANDOM),
    GridConfig(3, 2, 1, RANDOM),
    GridConfig(2, 1, Fraction(3, 2), RANDOM),
]


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage


# ---------------------------------------------------------------------------
# Manifest and file helpers


def _sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class RunManifest:
    command: str
    args: dict[str, Any]
    seeds: list[int] = field(default_factory=list)
    version: str = __version__
    inputs: dict[str, str] = field(default_factory=dict)
    payload_sha256: str = ""

    @classmethod
    def for_args(cls, ns: argparse.Namespace, inputs=(), seeds=()):
        args = {k: v for k, v in sorted(vars(ns).items()) if k != "func"}
        return cls(ns.command, args, list(seeds), __version__, {str(p): _sha256_file(p) for p in inputs})

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "args": self.args,
            "seeds": self.seeds,
            "version": self.version,
            "inputs": self.inputs,
            "payload_sha256": self.payload_sha256,
        }


def _write_output(path, payload: dict, manifest: RunManifest) -> None:
    manifest.payload_sha256 = hashlib.sha256(_canonical(payload).encode()).hexdigest()
    doc = {"manifest": manifest.as_dict(), **payload}
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _num(x: float) -> str:
    return repr(float(x))


def solution_to_dict(sol: RelaxedSolution, instance: Instance) -> dict:
    return {
        "T_min_star": _num(sol.T_min_star),
        "T_star": [_num(t) for t in sol.T_star],
        "objective": _num(sol.objective),
        "kkt_residual": _num(sol.kkt_residual),
        "active_resources": sorted(sol.active_resources),
        "method": sol.method,
        "instance": instance_to_dict(instance),
    }


def solution_from_dict(doc: dict) -> tuple[RelaxedSolution, Instance]:
    try:
        T = np.array([float(t) for t in doc["T_star"]])
        T.flags.writeable = False
        sol = RelaxedSolution(
            float(doc["T_min_star"]),
            T,
            float(doc["objective"]),
            float(doc["kkt_residual"]),
            frozenset(int(d) for d in doc.get("active_resources", [])),
            0,
            doc.get("method", "file"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceFormatError(f"relaxation file: {exc}") from None
    return sol, instance_from_dict(doc["instance"])


def _config_to_dict(cfg: GridConfig) -> dict:
    return {
        "m": cfg.m,
        "k": cfg.k,
        "alpha": str(cfg.alpha),
        "theta": "random" if cfg.random else _num(cfg.theta),
        "anchor": _num(cfg.anchor),
    }


def _config_from_dict(d: dict) -> GridConfig:
    theta = RANDOM if d["theta"] == "random" else float(d["theta"])
    return GridConfig(int(d["m"]), int(d["k"]), Fraction(d["alpha"]), theta, float(d["anchor"]))


def policy_to_dict(policy: Policy, opt_P: float) -> dict:
    return {
        "config": _config_to_dict(policy.config),
        "provenance": policy.provenance,
        "opt_P": _num(opt_P),
        "points": [
            {
                "value": _num(p.value),
                "q": str(p.multiplier.q),
                "j": p.multiplier.j,
                "root": p.multiplier.root,
                "denom": p.multiplier.denom,
                "p": p.p,
                "secondary": p.secondary,
            }
            for p in policy.points
        ],
    }


def policy_from_dict(doc: dict) -> tuple[Policy, float]:
    cfg = _config_from_dict(doc["config"])
    pts = tuple(
        GridPoint(
            float(p["value"]),
            ScaledPower(Fraction(p["q"]), int(p["j"]), int(p["root"]), int(p["denom"])),
            cfg.scale,
            int(p["p"]),
            bool(p["secondary"]),
        )
        for p in doc["points"]
    )
    return Policy(pts, cfg, doc["provenance"]), float(doc["opt_P"])


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None


# ---------------------------------------------------------------------------
# Per-instance experiment used by `reproduce`


def evaluate_instance(instance: Instance, seed: int, samples: int = 1000, tilde_N: int = 200) -> dict[str, float]:
    """Ratios to OPT(P) of every policy family on one instance."""
    sol = solve_relaxation(instance)
    opt = sol.objective
    out: dict[str, float] = {"n": instance.n, "D": instance.D, "opt_P": opt, "kkt_residual": sol.kkt_residual}
    thetas = np.random.default_rng(seed).random(samples)

    s22 = evaluate(build_policy(sol, GridConfig(2, 2), instance=instance), instance, opt)
    out["static(2,2)"] = s22.ratio
    pair = best_of_two(sol, instance, GridConfig(2, 2), GridConfig(2, 3))
    out["best-of-two static (2,2)/(2,3) bound"] = pair.bound / opt
    out["best-of-two static (2,2)/(2,3) exact"] = pair.cost.ratio

    p32 = cost_profile(sol, instance, GridConfig(3, 2, 1, RANDOM))
    out["shifted(3,2) theta-average"] = float(np.mean(p32.value(thetas))) / opt
    out["shifted(3,2) exact mean"] = p32.mean() / opt

    p21 = cost_profile(sol, instance, GridConfig(2, 1, 1, RANDOM))
    p22 = cost_profile(sol, instance, GridConfig(2, 2, 1, RANDOM))
    out["best-of-two shifted (2,1)/(2,2) theta-average"] = float(np.mean(np.minimum(p21.value(thetas), p22.value(thetas)))) / opt

    tilde = build_tilde_policy(sol, instance, tilde_N, SEARCH)
    out["tilde best-of-two (2,1)/(2,2)"] = tilde.cost.ratio

    der = derandomize(sol, instance, GridConfig(2, 1, Fraction(3, 2), RANDOM))
    out["interleaved(2,1,3/2) derandomized"] = der.cost.ratio
    out["interleaved(2,1,3/2) theta-average"] = float(np.mean(der.profile.value(thetas))) / opt
    out["interleaved(2,1,3/2) bound optimum"] = der.bound_value / opt
    return out


def _instance_seeds(root_seed: int, count: int) -> list[tuple[int, int]]:
    """(generator seed, sampling seed) per instance, split from one root seed."""
    children = np.random.SeedSequence(root_seed).spawn(count)
    return [tuple(int(v) for v in c.generate_state(2, dtype=np.uint64)) for c in children]


def multiplier_table() -> list[dict]:
    rows = []
    for cfg in MULTIPLIER_TABLE:
        vj, vk, vh = multipliers(cfg)
        rows.append({"config": cfg.label(), "V_J": vj, "V_K": vk, "V_H": vh})
    return rows


def reproduce(seed_count: int, out_dir, root_seed: int = 0, full: bool = False, samples: int = 1000) -> dict:
    """Run every policy family on seeded random instances and summarize ratios."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per_instance = []
    for idx, (gen_seed, mc_seed) in enumerate(_instance_seeds(root_seed, seed_count)):
        rng = np.random.default_rng(gen_seed)
        spec = GeneratorSpec(int(rng.integers(1, 51)), int(rng.integers(0, 6)), gen_seed)
        try:
            inst = generate(spec)
        except Exception as exc:
            raise StageError(f"generate[{idx}]", exc) from exc
        try:
            row = evaluate_instance(inst, mc_seed, samples)
        except Exception as exc:
            raise StageError(f"evaluate[{idx}]", exc) from exc
        row["index"] = idx
        per_instance.append(row)

    summary = []
    for name, bound in BOUNDS.items():
        vals = np.array([r[name] for r in per_instance])
        slack = np.array([1e-6 + r["kkt_residual"] for r in per_instance])
        summary.append(
            {
                "policy": name,
                "instances": len(vals),
                "max_ratio": float(vals.max()) if len(vals) else math.nan,
                "mean_ratio": float(vals.mean()) if len(vals) else math.nan,
                "bound": bound,
                "pass": bool(np.all(vals <= bound + slack)),
            }
        )
    try:
        N = 2000 if full else 200
        lp = solve_lp(build_lp(N, N))
    except Exception as exc:
        raise StageError("lp-bound", exc) from exc
    result = {
        "summary": summary,
        "multipliers": multiplier_table(),
        "lp": {"N": N, "L": N, "rho": lp.rho, "final_guarantee": final_guarantee(lp.rho, N), "gap": lp.gap},
        "instances": per_instance,
    }
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["policy", "instances", "max_ratio", "mean_ratio", "bound", "pass"])
        w.writeheader()
        for row in summary:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    if per_instance:
        keys = list(per_instance[0].keys())
        with open(out_dir / "instances.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys)
            w.writeheader()
            for row in per_instance:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return result


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_generate(ns) -> int:
    spec = GeneratorSpec(
        ns.n, ns.D, ns.seed, tuple(ns.K_bounds), tuple(ns.H_bounds), tuple(ns.K0_bounds), ns.alpha_density, tuple(ns.alpha_bounds)
    )
    write_instance(generate(spec), ns.out)
    return 0


def _cmd_solve(ns) -> int:
    inst = read_instance(ns.inp)
    sol = solve_relaxation(inst, ns.tol)
    _write_output(ns.out, {"relaxation": solution_to_dict(sol, inst)}, RunManifest.for_args(ns, [ns.inp]))
    return 0


def _cmd_round(ns) -> int:
    sol, inst = solution_from_dict(_load_json(ns.relax)["relaxation"])
    alpha = Fraction(ns.alpha) if ns.family == "interleaved" else Fraction(1)
    if ns.family == "static":
        cfg = GridConfig(ns.m, ns.k, 1, 0.0)
    else:
        cfg = GridConfig(ns.m, ns.k, alpha, RANDOM)
    extra = {}
    if ns.derandomize:
        if ns.family == "static":
            raise SystemExit("--derandomize needs a shifted or interleaved family")
        der = derandomize(sol, inst, cfg)
        policy = der.policy
        extra = {"theta_star": der.theta, "bound_theta": der.bound_theta, "bound_value": der.bound_value}
    else:
        theta = 0.0 if ns.family == "static" else ns.theta
        if theta is None:
            raise SystemExit("give --theta or --derandomize")
        policy = build_policy(sol, cfg.with_theta(theta), instance=inst)
    payload = {"policy": policy_to_dict(policy, sol.objective), **extra}
    _write_output(ns.out, payload, RunManifest.for_args(ns, [ns.relax]))
    return 0


def _cmd_evaluate(ns) -> int:
    policy, opt = policy_from_dict(_load_json(ns.policy)["policy"])
    inst = read_instance(ns.instance)
    cost = evaluate(policy, inst, opt)
    _write_output(ns.out, {"cost": cost.as_dict()}, RunManifest.for_args(ns, [ns.policy, ns.instance]))
    return 0


def _cmd_simulate(ns) -> int:
    policy, _ = policy_from_dict(_load_json(ns.policy)["policy"])
    horizon = ns.horizon * policy.config.anchor if ns.relative else ns.horizon
    hc = count_joint_orders(policy.multipliers, horizon, policy.scale)
    payload = {"horizon": hc.horizon, "joint_orders": hc.joint_orders, "density_estimate": hc.density_estimate}
    _write_output(ns.out, payload, RunManifest.for_args(ns, [ns.policy]))
    return 0


def _cmd_oracle_theta(ns) -> int:
    alpha = Fraction(ns.alpha)
    cfg = GridConfig(ns.m, ns.k, alpha, RANDOM, ns.anchor)
    if ns.quantity == "round":
        fn, closed = (lambda th: round_up_many(cfg, ns.t, th)), expected_round(cfg, ns.t)
    elif ns.quantity == "recip":
        fn, closed = (lambda th: 1.0 / round_up_many(cfg, ns.t, th)), expected_recip_round(cfg, ns.t)
    else:
        fn, closed = (lambda th: density_many(cfg, th)), expected_density(cfg)
    mean, se = monte_carlo_theta(fn, ns.samples, ns.seed, vectorized=True)
    within = abs(mean - closed) <= 3 * se if se > 0 else abs(mean - closed) <= 1e-12
    payload = {"quantity": ns.quantity, "config": cfg.label(), "mean": mean, "standard_error": se, "closed_form": closed, "within_3se": bool(within)}
    _write_output(ns.out, payload, RunManifest.for_args(ns, seeds=[ns.seed]))
    return 0 if within else 1


def _cmd_lp_bound(ns) -> int:
    N, L = (2000, 2000) if ns.full else (ns.N, ns.L)
    sol = solve_lp(build_lp(N, L), method=ns.method)
    payload = {
        "N": N,
        "L": L,
        "rho": sol.rho,
        "lower": sol.lower,
        "upper": sol.upper,
        "final_guarantee": final_guarantee(sol.rho, N),
        "witness": {"z": sol.z, "x": sol.x.tolist(), "y": sol.y.tolist()},
        "certificate": {str(i): float(v) for i, v in enumerate(sol.certificate) if v > 0},
    }
    _write_output(ns.out, payload, RunManifest.for_args(ns))
    return 0


def _cmd_verify_claims(ns) -> int:
    runs = {"a1": sweep_static, "a2": sweep_shifted, "lemma42": sweep_interleaved}
    chosen = runs if ns.claim == "all" else {ns.claim: runs[ns.claim]}
    reports = {name: fn().summary() for name, fn in chosen.items()}
    ok = all(r["ok"] for r in reports.values())
    _write_output(ns.out, {"reports": reports, "ok": ok}, RunManifest.for_args(ns))
    return 0 if ok else 1


def _cmd_reproduce(ns) -> int:
    res = reproduce(ns.seeds, ns.out_dir, ns.seed, ns.full, ns.samples)
    _write_output(Path(ns.out_dir) / "reproduce.json", res, RunManifest.for_args(ns, seeds=[ns.seed]))
    for row in res["summary"]:
        flag = "PASS" if row["pass"] else "FAIL"
        print(f"{flag}  {row['policy']:<48} max {row['max_ratio']:.6f}  bound {row['bound']:.6f}")
    print(f"LP N=L={res['lp']['N']}: rho = {res['lp']['rho']:.6f}, guarantee {res['lp']['final_guarantee']:.6f}")
    return 0 if all(r["pass"] for r in res["summary"]) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcjrp", description=__doc__)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--D", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--K-bounds", type=float, nargs=2, default=(0.1, 10.0))
    g.add_argument("--H-bounds", type=float, nargs=2, default=(0.1, 10.0))
    g.add_argument("--K0-bounds", type=float, nargs=2, default=(0.1, 10.0))
    g.add_argument("--alpha-density", type=float, default=0.5)
    g.add_argument("--alpha-bounds", type=float, nargs=2, default=(0.01, 1.0))
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    s = sub.add_parser("solve", help="solve the convex relaxation")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--out", default="-")
    s.set_defaults(func=_cmd_solve)

    r = sub.add_parser("round", help="round a relaxation into a policy")
    r.add_argument("--relax", required=True)
    r.add_argument("--family", choices=["static", "shifted", "interleaved"], required=True)
    r.add_argument("--m", type=int, default=2)
    r.add_argument("--k", type=int, default=1)
    r.add_argument("--alpha", default="1")
    grp = r.add_mutually_exclusive_group()
    grp.add_argument("--theta", type=float)
    grp.add_argument("--derandomize", action="store_true")
    r.add_argument("--out", default="-")
    r.set_defaults(func=_cmd_round)

    e = sub.add_parser("evaluate", help="exact cost of a policy")
    e.add_argument("--policy", required=True)
    e.add_argument("--instance", required=True)
    e.add_argument("--out", default="-")
    e.set_defaults(func=_cmd_evaluate)

    m = sub.add_parser("simulate", help="count joint orders over a horizon")
    m.add_argument("--policy", required=True)
    m.add_argument("--horizon", type=float, default=1e6)
    m.add_argument("--relative", action="store_true", help="horizon in units of the grid anchor")
    m.add_argument("--out", default="-")
    m.set_defaults(func=_cmd_simulate)

    o = sub.add_parser("oracle-theta", help="Monte-Carlo check of an expectation over the shift")
    o.add_argument("--quantity", choices=["round", "recip", "density"], required=True)
    o.add_argument("--m", type=int, default=2)
    o.add_argument("--k", type=int, default=1)
    o.add_argument("--alpha", default="1")
    o.add_argument("--t", type=float, default=1.0)
    o.add_argument("--anchor", type=float, default=1.0)
    o.add_argument("--samples", type=int, default=1_000_000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", default="-")
    o.set_defaults(func=_cmd_oracle_theta)

    lp = sub.add_parser("lp-bound", help="solve the factor-revealing LP")
    lp.add_argument("--N", type=int, default=200)
    lp.add_argument("--L", type=int, default=200)
    lp.add_argument("--full", action="store_true", help="N = L = 2000")
    lp.add_argument("--method", choices=["oracle", "simplex"], default="oracle")
    lp.add_argument("--out", default="-")
    lp.set_defaults(func=_cmd_lp_bound)

    v = sub.add_parser("verify-claims", help="configuration sweeps")
    v.add_argument("--claim", choices=["a1", "a2", "lemma42", "all"], default="all")
    v.add_argument("--out", default="-")
    v.set_defaults(func=_cmd_verify_claims)

    rp = sub.add_parser("reproduce", help="ratio table over seeded random instances")
    rp.add_argument("--seeds", type=int, default=100)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--samples", type=int, default=1000)
    rp.add_argument("--full", action="store_true")
    rp.add_argument("--out-dir", default="reproduce_out")
    rp.set_defaults(func=_cmd_reproduce)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return ns.func(ns)
    except (InstanceFormatError, InvalidInstanceError, FileNotFoundError) as exc:
        print(f"rcjrp {ns.command}: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"rcjrp {ns.command}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
