"""Command-line front end.

Subcommands: solve, evaluate, simulate, oracle, verify, report. Model
configuration comes from an INI-style file (key = value lines grouped in
per-module sections); every number printed to the console is also
present in the machine-readable JSON output, and float formatting is
pinned to 12 significant digits so identical runs produce byte-identical
files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .cost import CostModel, CustomCost, PowerCost, QuadraticCost
from .demand import CustomDemand, DemandModel, HyperbolicDemand, LinearDemand
from .errors import (
    ConfigInvalid,
    ModelInvalid,
    NoConvergence,
    SolverError,
    SpecInvalid,
    VerificationFailed,
)
from .oracle import ChainSpec, build_chain, compare, solve_average_reward
from .policy import Policy, build_value_function, curve_table, verify_upper_bound
from .sim import SimConfig, simulate, simulate_path
from .solver import (
    ModelParams,
    SolverOptions,
    band_area,
    price_profile,
    solve_given_band,
    solve_optimal,
)

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_SOLVER = 3
_EXIT_VERIFY = 4


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    solver: SolverOptions
    sim: SimConfig
    chain: ChainSpec


_KNOWN_KEYS = {
    "demand": {"family", "a", "lam0", "lam1", "p_min", "p_max"},
    "cost": {"family", "c_plus", "c_minus", "a_plus", "a_minus"},
    "model": {"sigma", "K", "k"},
    "solver": {
        "grid_spacing",
        "rtol",
        "atol",
        "tol_ode",
        "tol_bc",
        "gamma_tol",
        "root_tol",
        "z_max",
        "z_max_factor",
        "z_max_gamma_tol",
        "stop_offset",
    },
    "sim": {
        "x0",
        "horizon",
        "dt",
        "burn_in",
        "seed",
        "replications",
        "revenue_noise",
    },
    "oracle": {"z_lo", "z_hi", "delta", "n_prices"},
}


def _section(cp: configparser.ConfigParser, name: str) -> dict:
    if not cp.has_section(name):
        return {}
    out = dict(cp.items(name))
    unknown = set(out) - _KNOWN_KEYS[name]
    if unknown:
        raise ConfigInvalid(
            f"unknown key(s) in [{name}]: {', '.join(sorted(unknown))}"
        )
    return out


def _get_float(sec: dict, section: str, key: str, default=None):
    if key not in sec:
        return default
    try:
        return float(sec[key])
    except ValueError as exc:
        raise ConfigInvalid(f"[{section}] {key} = {sec[key]!r} is not a number") from exc


def _get_int(sec: dict, section: str, key: str, default=None):
    v = _get_float(sec, section, key, default)
    if v is None:
        return None
    if v != int(v):
        raise ConfigInvalid(f"[{section}] {key} must be an integer")
    return int(v)


def _get_bool(sec: dict, section: str, key: str, default=False):
    if key not in sec:
        return default
    raw = sec[key].strip().lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off"):
        return False
    raise ConfigInvalid(f"[{section}] {key} = {sec[key]!r} is not a boolean")


def load_config(path: Optional[str]) -> RunConfig:
    """Parse and validate a run configuration; None means all defaults."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    # keep option case: [model] K (order setup cost) and k (unit cost)
    # are distinct keys
    cp.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigInvalid(f"config file not found: {path}")
        try:
            cp.read(p, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigInvalid(f"could not parse {path}: {exc}") from exc
        unknown_sections = set(cp.sections()) - set(_KNOWN_KEYS)
        if unknown_sections:
            raise ConfigInvalid(
                f"unknown section(s): {', '.join(sorted(unknown_sections))}"
            )

    dsec = _section(cp, "demand")
    family = dsec.get("family", "linear").strip().lower()
    p_min = _get_float(dsec, "demand", "p_min")
    p_max = _get_float(dsec, "demand", "p_max")
    if family == "linear":
        kw = {"A": _get_float(dsec, "demand", "a", 10.0)}
        if p_min is not None:
            kw["p_min"] = p_min
        if p_max is not None:
            kw["p_max"] = p_max
        demand: DemandModel = LinearDemand(**kw)
    elif family == "hyperbolic":
        kw = {
            "lam0": _get_float(dsec, "demand", "lam0", 1.0),
            "lam1": _get_float(dsec, "demand", "lam1", 2.0),
        }
        if p_min is not None:
            kw["p_min"] = p_min
        if p_max is not None:
            kw["p_max"] = p_max
        demand = HyperbolicDemand(**kw)
    else:
        raise ConfigInvalid(f"[demand] family must be linear or hyperbolic, got {family!r}")

    csec = _section(cp, "cost")
    cfam = csec.get("family", "quadratic").strip().lower()
    c_plus = _get_float(csec, "cost", "c_plus", 1.0)
    c_minus = _get_float(csec, "cost", "c_minus", 1.0)
    if cfam == "quadratic":
        cost: CostModel = QuadraticCost(c_plus=c_plus, c_minus=c_minus)
    elif cfam == "power":
        cost = PowerCost(
            c_plus=c_plus,
            c_minus=c_minus,
            a_plus=_get_float(csec, "cost", "a_plus", 2.0),
            a_minus=_get_float(csec, "cost", "a_minus", 2.0),
        )
    else:
        raise ConfigInvalid(f"[cost] family must be quadratic or power, got {cfam!r}")

    msec = _section(cp, "model")
    params = ModelParams(
        demand=demand,
        cost=cost,
        sigma=_get_float(msec, "model", "sigma", 1.0),
        K=_get_float(msec, "model", "K", 1.0),
        k=_get_float(msec, "model", "k", 1.0),
    )

    ssec = _section(cp, "solver")
    solver_kw = {}
    for key in (
        "grid_spacing",
        "rtol",
        "atol",
        "tol_ode",
        "tol_bc",
        "gamma_tol",
        "root_tol",
        "z_max_factor",
        "z_max_gamma_tol",
        "stop_offset",
    ):
        v = _get_float(ssec, "solver", key)
        if v is not None:
            solver_kw[key] = v
    zmax = _get_float(ssec, "solver", "z_max")
    if zmax is not None:
        solver_kw["z_max"] = zmax
    try:
        solver = SolverOptions(**solver_kw)
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc

    qsec = _section(cp, "sim")
    sim_cfg = SimConfig(
        x0=_get_float(qsec, "sim", "x0", 0.0),
        horizon=_get_float(qsec, "sim", "horizon", 1000.0),
        dt=_get_float(qsec, "sim", "dt", 1e-3),
        burn_in=_get_float(qsec, "sim", "burn_in", 100.0),
        seed=_get_int(qsec, "sim", "seed", 12345),
        replications=_get_int(qsec, "sim", "replications", 32),
        revenue_noise=_get_bool(qsec, "sim", "revenue_noise", False),
    )

    osec = _section(cp, "oracle")
    chain_spec = ChainSpec(
        z_lo=_get_float(osec, "oracle", "z_lo", -8.0),
        z_hi=_get_float(osec, "oracle", "z_hi", 20.0),
        delta=_get_float(osec, "oracle", "delta", 0.05),
        n_prices=_get_int(osec, "oracle", "n_prices", 81),
    )
    return RunConfig(params=params, solver=solver, sim=sim_cfg, chain=chain_spec)


# ---------------------------------------------------------------------------
# deterministic output formatting


def _fmt12(x: float) -> float:
    return float(f"{x:.12g}")


def _roundtrip(obj):
    if isinstance(obj, dict):
        return {k: _roundtrip(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_roundtrip(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return None
        return _fmt12(v)
    return obj


def write_json(path: Path, payload: dict):
    text = json.dumps(_roundtrip(payload), indent=2, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8", newline="\n")


def write_csv(path: Path, header, columns):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([f"{v:.12g}" for v in row])


# ---------------------------------------------------------------------------
# subcommands


def _solve_payload(cfg: RunConfig):
    sol = solve_optimal(cfg.params, cfg.solver)
    vf = build_value_function(sol)
    profile = price_profile(sol)
    frag = sol.fragment()
    spline = frag.interpolant()
    k, K = cfg.params.k, cfg.params.K
    dw = np.diff(sol.w)
    signs = np.sign(dw)
    signs = signs[signs != 0]
    checks = {
        "smooth_pasting_error": max(
            abs(float(spline(sol.s)) - k), abs(float(spline(sol.S)) - k)
        ),
        "band_area_error": abs(band_area(frag, sol.s, sol.S, k) - K),
        "value_jump_error": abs(
            vf.value(sol.S) - vf.value(sol.s) - (K + k * (sol.S - sol.s))
        ),
        "unimodal": int(np.count_nonzero(np.diff(signs) != 0)) == 1,
        "z_star_nonpositive": sol.z_star <= 1e-9,
    }
    summary = {
        "gamma": sol.gamma,
        "s": sol.s,
        "S": sol.S,
        "z_star": sol.z_star,
        "residual_max": sol.residual_max,
        "z_max_used": sol.z_max_used,
        "breakpoints": list(profile.breakpoints),
        "checks": checks,
    }
    return sol, vf, summary


def _cmd_solve(cfg: RunConfig, out: Path, _args) -> int:
    sol, vf, summary = _solve_payload(cfg)
    write_json(out / "summary.json", summary)
    write_csv(out / "curves.csv", ["z", "w", "V", "price"], curve_table(sol, vf))
    print(
        f"gamma={summary['gamma']:.12g} s={summary['s']:.12g} "
        f"S={summary['S']:.12g} z_star={summary['z_star']:.12g}"
    )
    print(f"wrote {out / 'summary.json'} and {out / 'curves.csv'}")
    return _EXIT_OK


def _cmd_evaluate(cfg: RunConfig, out: Path, args) -> int:
    if args.s is None or args.S is None:
        raise ConfigInvalid("evaluate needs --s and --S")
    gamma, frag = solve_given_band(cfg.params, args.s, args.S, cfg.solver)
    area_err = abs(
        band_area(frag, args.s, args.S, cfg.params.k) - cfg.params.K
    )
    payload = {
        "gamma": gamma,
        "s": args.s,
        "S": args.S,
        "z_max_used": frag.z_max,
        "band_area_error": area_err,
    }
    write_json(out / "evaluate.json", payload)
    print(f"gamma={gamma:.12g} at band [{args.s:.12g}, {args.S:.12g}]")
    return _EXIT_OK


def _load_policy(path_str: str, cfg: RunConfig) -> Policy:
    path = Path(path_str)
    if path.is_dir():
        summary_path = path / "summary.json"
        curves_path = path / "curves.csv"
    else:
        summary_path = path
        curves_path = path.parent / "curves.csv"
    if not summary_path.is_file():
        raise ConfigInvalid(f"policy summary not found: {summary_path}")
    if not curves_path.is_file():
        raise ConfigInvalid(f"policy curves not found: {curves_path}")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    rows = np.genfromtxt(curves_path, delimiter=",", names=True)
    z = np.ascontiguousarray(rows["z"], dtype=np.float64)
    w = np.ascontiguousarray(rows["w"], dtype=np.float64)
    # the exported table opens with the exact band bottom, one short cell
    # before the regular grid; drop it to restore uniform spacing
    if z.size >= 3 and abs((z[1] - z[0]) - (z[2] - z[1])) > 1e-6 * (z[2] - z[1]):
        z, w = z[1:], w[1:]
    return Policy(
        s=float(summary["s"]),
        S=float(summary["S"]),
        z_grid=z,
        w_table=w,
        demand=cfg.params.demand,
    )


def _cmd_simulate(cfg: RunConfig, out: Path, args) -> int:
    if args.policy is not None:
        policy = _load_policy(args.policy, cfg)
    elif args.const_price is not None:
        if args.s is None or args.S is None:
            raise ConfigInvalid("constant-price simulation needs --s and --S")
        policy = Policy.constant(
            args.s, args.S, args.const_price, demand=cfg.params.demand
        )
    else:
        sol = solve_optimal(cfg.params, cfg.solver)
        policy = Policy.from_solution(sol)

    sim_cfg = cfg.sim
    if args.seed is not None:
        sim_cfg = replace(sim_cfg, seed=args.seed)

    res = simulate(cfg.params, policy, sim_cfg)
    lo, hi = res.ci95
    payload = {
        "avg_profit": res.avg_profit,
        "stderr": res.stderr,
        "ci95": [lo, hi],
        "revenue_rate": res.revenue_rate,
        "holding_rate": res.holding_rate,
        "ordering_rate": res.ordering_rate,
        "order_count_rate": res.order_count_rate,
        "min_level_observed": res.min_level_observed,
        "clamp_count": res.clamp_count,
        "s": policy.s,
        "S": policy.S,
        "seed": sim_cfg.seed,
        "replications": sim_cfg.replications,
        "horizon": sim_cfg.horizon,
        "dt": sim_cfg.dt,
        "burn_in": sim_cfg.burn_in,
    }
    write_json(out / "simulate.json", payload)
    print(
        f"avg_profit={res.avg_profit:.12g} stderr={res.stderr:.12g} "
        f"ci95=[{lo:.12g}, {hi:.12g}]"
    )
    if args.dump_trajectory:
        t, level, price, crev, chold, cord = simulate_path(
            cfg.params, policy, sim_cfg
        )
        write_csv(
            out / "trajectory.csv",
            ["t", "Z", "price", "cum_revenue", "cum_holding", "cum_ordering"],
            (t, level, price, crev, chold, cord),
        )
        print(f"wrote {out / 'trajectory.csv'}")
    return _EXIT_OK


def _oracle_payload(cfg: RunConfig):
    sol, _, summary = _solve_payload(cfg)
    chain = build_chain(cfg.params, cfg.chain)
    orc = solve_average_reward(chain)
    rep = compare(sol, orc)
    payload = {
        "gamma_oracle": orc.gamma,
        "gamma_solver": sol.gamma,
        "s_hat": orc.s_hat,
        "S_hat": orc.S_hat,
        "z_peak": orc.z_peak,
        "boundary_fraction": orc.boundary_fraction,
        "iterations": orc.iterations,
        "comparison": rep.to_dict(),
    }
    return sol, orc, rep, payload, summary


def _cmd_oracle(cfg: RunConfig, out: Path, _args) -> int:
    _, _, rep, payload, _ = _oracle_payload(cfg)
    write_json(out / "oracle.json", payload)
    print(
        f"gamma_oracle={payload['gamma_oracle']:.12g} "
        f"(solver {payload['gamma_solver']:.12g}, "
        f"rel err {rep.gamma_rel_error:.3g})"
    )
    return _EXIT_OK


def _cmd_verify(cfg: RunConfig, out: Path, _args) -> int:
    sol, vf, summary = _solve_payload(cfg)
    try:
        report = verify_upper_bound(sol, vf)
    except VerificationFailed as exc:
        write_json(out / "verify.json", dict(exc.details or {}))
        raise
    write_json(out / "verify.json", report.to_dict())
    print(
        f"verified: hjb_margin_max={report.hjb_margin_max:.3g} "
        f"increment_excess_max={report.increment_excess_max:.3g}"
    )
    return _EXIT_OK


def _cmd_report(cfg: RunConfig, out: Path, args) -> int:
    sol, vf, summary = _solve_payload(cfg)
    write_json(out / "summary.json", summary)
    write_csv(out / "curves.csv", ["z", "w", "V", "price"], curve_table(sol, vf))

    verify_report = verify_upper_bound(sol, vf).to_dict()

    gamma_eval, _ = solve_given_band(cfg.params, sol.s, sol.S, cfg.solver)
    eval_gap = abs(gamma_eval - sol.gamma)

    chain = build_chain(cfg.params, cfg.chain)
    orc = solve_average_reward(chain)
    comparison = compare(sol, orc).to_dict()

    sim_cfg = cfg.sim if args.seed is None else replace(cfg.sim, seed=args.seed)
    res = simulate(cfg.params, Policy.from_solution(sol), sim_cfg)
    lo, hi = res.ci95
    payload = {
        "solve": summary,
        "verify": verify_report,
        "evaluate_consistency_gap": eval_gap,
        "oracle": {
            "gamma_oracle": orc.gamma,
            "s_hat": orc.s_hat,
            "S_hat": orc.S_hat,
            "z_peak": orc.z_peak,
            "boundary_fraction": orc.boundary_fraction,
            "comparison": comparison,
        },
        "simulate": {
            "avg_profit": res.avg_profit,
            "stderr": res.stderr,
            "ci95": [lo, hi],
            "gamma_in_ci": bool(lo <= sol.gamma <= hi),
        },
    }
    write_json(out / "report.json", payload)
    print(
        f"gamma={sol.gamma:.12g} oracle={orc.gamma:.12g} "
        f"sim={res.avg_profit:.12g}+-{res.stderr:.12g} "
        f"eval_gap={eval_gap:.3g}"
    )
    return _EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "evaluate": _cmd_evaluate,
    "simulate": _cmd_simulate,
    "oracle": _cmd_oracle,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sspricing",
        description="Joint dynamic pricing and (s, S) ordering for a "
        "Brownian inventory system: solve, verify, simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve the free-boundary problem and export curves"),
        ("evaluate", "profit rate of an imposed band (--s, --S)"),
        ("simulate", "Monte-Carlo profit of a policy"),
        ("oracle", "discretized-control cross-check"),
        ("verify", "candidate-optimality certification"),
        ("report", "run everything and cross-compare"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None, help="INI config path")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="simulation seed override")
        if name == "evaluate":
            sp.add_argument("--s", type=float, default=None)
            sp.add_argument("--S", type=float, default=None)
        if name == "simulate":
            sp.add_argument("--policy", default=None, help="solve output dir or summary.json")
            sp.add_argument("--const-price", type=float, default=None, dest="const_price")
            sp.add_argument("--s", type=float, default=None)
            sp.add_argument("--S", type=float, default=None)
            sp.add_argument("--dump-trajectory", action="store_true", dest="dump_trajectory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](cfg, out, args)
    except (ConfigInvalid, ModelInvalid, SpecInvalid) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return _EXIT_VERIFY
    except (SolverError, NoConvergence) as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return _EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
