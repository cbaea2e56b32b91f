"""Single command-line entry point; every capability is a subcommand.

Experiments are driven by one JSON config file (quick fractional-derivative
probes take flags instead).  Config parsing is fail-closed: unknown keys
are rejected.  Exit codes: 0 success, 2 validation failure, 3 numeric or
solver failure.  Outputs are byte-deterministic given (config, seed);
the converge subcommand therefore writes 'na' in the runtime column unless
--timings is passed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import frac_calc
from .convergence_lab import ComparisonWindow, emit_report, run_sweep
from .ctrw_sim import (
    DIRECTION_ELAPSED,
    DIRECTION_REMAINING,
    InnerMotion,
    ModelSpec,
    Policy,
    check_jump_reward_homogeneity,
    evaluate_policy_mc,
    greedy_policy_improvement,
    simulate_path,
    write_path_records,
)
from .dp_solver import GridFunction, dp_residual, solve_dp, write_grid
from .errors import ConfigurationError, NumericError, ValidationError
from .fhjb_solver import ControlGenerator, FhjbProblem, derive_problem, solve_fhjb
from .stable_rng import (
    DeterministicWaitingLaw,
    DiscreteJumpLaw,
    DiscreteWaitingLaw,
    JumpLaw,
    RngState,
    WaitingLaw,
)

OUT_ENV_VAR = "CTRWLAB_OUT"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


# ---------------------------------------------------------------------------
# Fail-closed config parsing
# ---------------------------------------------------------------------------

def _require_keys(section: dict, path: str, required: set, optional: set) -> None:
    keys = set(section)
    unknown = keys - required - optional
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise ConfigurationError(f"{path}: missing keys {sorted(missing)}")


def _build_waiting(cfg: dict):
    _require_keys(cfg, "model.waiting", {"kind"},
                  {"beta", "wait", "atoms", "mass_beyond"})
    kind = cfg["kind"]
    if kind == "heavy-tail":
        return WaitingLaw(beta=float(cfg["beta"]))
    if kind == "deterministic":
        return DeterministicWaitingLaw(wait=float(cfg["wait"]))
    if kind == "discrete":
        return DiscreteWaitingLaw(atoms=tuple((float(r), float(p)) for r, p in cfg["atoms"]),
                                  mass_beyond=float(cfg.get("mass_beyond", 0.0)))
    raise ConfigurationError(f"model.waiting: unknown kind {kind!r}")


def _build_jump(cfg: dict, path: str):
    _require_keys(cfg, path, {"kind"}, {"alpha", "scale", "mean_shift", "atoms"})
    kind = cfg["kind"]
    if kind == "gaussian":
        return JumpLaw(alpha=2.0, kind="gaussian", scale=float(cfg["scale"]),
                       mean_shift=float(cfg.get("mean_shift", 0.0)))
    if kind == "symmetric-pareto":
        return JumpLaw(alpha=float(cfg["alpha"]), kind="symmetric-pareto",
                       scale=float(cfg["scale"]))
    if kind == "discrete":
        return DiscreteJumpLaw(atoms=tuple((float(x), float(p)) for x, p in cfg["atoms"]))
    raise ConfigurationError(f"{path}: unknown kind {kind!r}")


def _build_terminal(cfg: dict):
    _require_keys(cfg, "terminal", {"name"}, {"value", "width"})
    name = cfg["name"]
    if name == "constant":
        c = float(cfg.get("value", 1.0))
        return lambda y: np.full_like(np.asarray(y, dtype=float), c)
    if name == "linear":
        return lambda y: np.asarray(y, dtype=float)
    if name == "quadratic":
        return lambda y: np.asarray(y, dtype=float) ** 2
    if name == "abs":
        return lambda y: np.abs(np.asarray(y, dtype=float))
    if name == "step":
        return lambda y: (np.asarray(y, dtype=float) >= 0.0).astype(float)
    if name == "gaussian_bump":
        w = float(cfg.get("width", 1.0))
        return lambda y: np.exp(-(np.asarray(y, dtype=float) / w) ** 2)
    raise ConfigurationError(f"terminal: unknown builtin {name!r}")


def _build_jump_reward(cfg: dict, n_controls: int, alpha: float):
    _require_keys(cfg, "jump_reward", {"name"}, {"coefficients"})
    name = cfg["name"]
    if name == "none":
        return None
    if name == "square":
        if alpha != 2.0:
            raise ConfigurationError(
                "the square jump reward is order-2 homogeneous and needs alpha = 2")
        coeffs = [float(c) for c in cfg["coefficients"]]
        if len(coeffs) != n_controls:
            raise ConfigurationError("jump_reward needs one coefficient per control")
        return lambda u, y, xi: coeffs[u] * xi ** 2 \
            * np.ones_like(np.asarray(y, dtype=float))
    raise ConfigurationError(f"jump_reward: unknown builtin {name!r}")


def _build_waiting_reward(cfg: dict, n_controls: int):
    _require_keys(cfg, "waiting_reward", {"name"}, {"values"})
    name = cfg["name"]
    if name == "none":
        return None
    if name == "constant":
        vals = [float(v) for v in cfg["values"]]
        if len(vals) != n_controls:
            raise ConfigurationError("waiting_reward needs one value per control")
        return lambda u, t, y: vals[u] * np.ones_like(np.asarray(y, dtype=float))
    raise ConfigurationError(f"waiting_reward: unknown builtin {name!r}")


def _build_inner_motion(cfg, n_controls: int):
    if cfg is None:
        return None
    _require_keys(cfg, "inner_motion", set(), {"drift", "diffusion"})
    drifts = [float(v) for v in cfg.get("drift", [0.0] * n_controls)]
    diffs = [float(v) for v in cfg.get("diffusion", [0.0] * n_controls)]
    if len(drifts) != n_controls or len(diffs) != n_controls:
        raise ConfigurationError("inner_motion needs one drift/diffusion per control")
    return InnerMotion(drift=lambda u, y: drifts[u], diffusion=lambda u, y: diffs[u])


def build_model(cfg: dict) -> ModelSpec:
    _require_keys(cfg, "model",
                  {"controls", "horizon", "tau", "alpha", "terminal", "waiting", "jumps"},
                  {"direction", "jump_reward", "waiting_reward", "inner_motion"})
    controls = tuple(str(c) for c in cfg["controls"])
    jumps = cfg["jumps"]
    if len(jumps) != len(controls):
        raise ConfigurationError("model: need one jump law per control")
    alpha = float(cfg["alpha"])
    model = ModelSpec(
        waiting=_build_waiting(cfg["waiting"]),
        jumps_per_control=tuple(_build_jump(j, f"model.jumps[{i}]")
                                for i, j in enumerate(jumps)),
        controls=controls,
        terminal=_build_terminal(cfg["terminal"]),
        alpha=alpha,
        jump_reward=_build_jump_reward(cfg.get("jump_reward", {"name": "none"}),
                                       len(controls), alpha),
        waiting_reward=_build_waiting_reward(cfg.get("waiting_reward", {"name": "none"}),
                                             len(controls)),
        inner_motion=_build_inner_motion(cfg.get("inner_motion"), len(controls)),
        tau=float(cfg["tau"]),
        horizon=float(cfg["horizon"]),
        direction=str(cfg.get("direction", DIRECTION_REMAINING)),
    )
    check_jump_reward_homogeneity(model, RngState(0, 0))
    return model


def build_problem(cfg: dict | None, model: ModelSpec) -> FhjbProblem:
    if cfg is None or cfg.get("derive", False):
        if cfg is not None:
            _require_keys(cfg, "problem", set(), {"derive"})
        return derive_problem(model)
    _require_keys(cfg, "problem", {"derive", "stable_scales"}, {"drifts", "diffusions"})
    scales = [float(s) for s in cfg["stable_scales"]]
    drifts = cfg.get("drifts", [None] * model.n_controls)
    diffs = cfg.get("diffusions", [None] * model.n_controls)
    if not (len(scales) == len(drifts) == len(diffs) == model.n_controls):
        raise ConfigurationError("problem: per-control lists must match the control set")
    controls = tuple(
        ControlGenerator(stable_scale=scales[u],
                         drift=None if drifts[u] is None else float(drifts[u]),
                         diffusion=None if diffs[u] is None else float(diffs[u]))
        for u in range(model.n_controls))
    derived = derive_problem(model)
    return FhjbProblem(beta=derived.beta, alpha=model.alpha, controls=controls,
                       terminal=model.terminal,
                       jump_reward_density=derived.jump_reward_density,
                       waiting_reward=model.waiting_reward,
                       direction=model.direction, horizon=model.horizon)


def build_grid(cfg: dict, model: ModelSpec) -> GridFunction:
    _require_keys(cfg, "grid", {"n_t", "y_min", "y_max", "n_y"}, {"t_max"})
    t_max = float(cfg.get("t_max", model.horizon))
    return GridFunction.template(t_max, int(cfg["n_t"]), float(cfg["y_min"]),
                                 float(cfg["y_max"]), int(cfg["n_y"]))


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a JSON object")
    _require_keys(cfg, "config", {"model", "grid"},
                  {"problem", "sweep", "rng", "output", "simulate"})
    return cfg


def _seed_from(cfg: dict, override) -> int:
    if override is not None:
        return int(override)
    rng_cfg = cfg.get("rng", {})
    _require_keys(rng_cfg, "rng", set(), {"seed"})
    return int(rng_cfg.get("seed", 0))


def _out_dir(cfg: dict, override) -> Path:
    if override:
        base = Path(override)
    else:
        out_cfg = cfg.get("output", {})
        _require_keys(out_cfg, "output", set(), {"dir"})
        base = Path(out_cfg.get("dir") or os.environ.get(OUT_ENV_VAR, "."))
    base.mkdir(parents=True, exist_ok=True)
    return base


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

_BUILTIN_FNS = {
    "const": lambda y: 1.0,
    "linear": lambda y: y,
    "quad": lambda y: y * y,
    "step": lambda y: 1.0 if y >= 0.0 else 0.0,  # right-continuous at 0
    "exp": math.exp,
}

_FRAC_OPS = {
    "caputo-left": frac_calc.caputo_left,
    "caputo-right": frac_calc.caputo_right,
    "rl-left": frac_calc.rl_left,
    "rl-right": frac_calc.rl_right,
    "reg-caputo": frac_calc.regularized_caputo_left,
    "gen": frac_calc.generator_form,
    "dual-gen": frac_calc.dual_generator_form,
    "a-beta": frac_calc.a_beta,
}


def cmd_frac_deriv(args) -> int:
    order = frac_calc.FracOrder(args.beta)
    fn = _BUILTIN_FNS[args.fn]
    f = frac_calc.from_callable(fn, args.a, args.b, args.h, decay_model=args.decay)
    value = _FRAC_OPS[args.op](f, order, args.x)
    print(f"{args.x:.12g}\t{value:.12g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg["model"])
    grid = build_grid(cfg["grid"], model)
    sim_cfg = cfg.get("simulate", {})
    _require_keys(sim_cfg, "simulate", set(), {"y0", "policy"})
    y0 = float(sim_cfg.get("y0", 0.0))
    seed = _seed_from(cfg, args.seed)
    rng = RngState(seed)
    if sim_cfg.get("policy", "constant") == "greedy":
        policy = greedy_policy_improvement(model, solve_dp(model, grid))
    else:
        policy = Policy.constant(0, grid.t_nodes, grid.y_nodes)
    est = evaluate_policy_mc(model, policy,
                             model.horizon if model.direction == DIRECTION_REMAINING else 0.0,
                             y0, args.paths, rng)
    out = _out_dir(cfg, args.out)
    records = [simulate_path(model, policy, y0, rng.stream(i))
               for i in range(min(args.paths, args.dump_paths))]
    write_path_records(records, out / "paths.csv")
    summary = {"mean": est.mean, "std_error": est.std_error, "n_paths": est.n_paths,
               "seed": seed, "y0": y0}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"mean={est.mean:.12g} std_error={est.std_error:.12g} n={est.n_paths}")
    return EXIT_OK


def _model_params(cfg: dict, seed: int) -> dict:
    return {"config": cfg["model"], "seed": seed}


def cmd_solve_dp(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg["model"])
    grid = build_grid(cfg["grid"], model)
    solution = solve_dp(model, grid)
    residual = dp_residual(model, solution)
    out = _out_dir(cfg, args.out)
    write_grid(solution, out / "dp_grid.csv",
               params={"config": cfg["model"], "dp_residual": f"{residual:.3e}"})
    print(f"dp residual {residual:.3e}")
    return EXIT_OK


def cmd_solve_fhjb(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg["model"])
    problem = build_problem(cfg.get("problem"), model)
    grid = build_grid(cfg["grid"], model)
    t, y = grid.t_nodes, grid.y_nodes
    if model.direction == DIRECTION_REMAINING:
        limit_grid = GridFunction(t[1:], y, np.zeros((t.size - 1, y.size)))
    else:
        limit_grid = GridFunction(t[:-1], y, np.zeros((t.size - 1, y.size)))
    solution = solve_fhjb(problem, limit_grid)
    out = _out_dir(cfg, args.out)
    write_grid(solution, out / "fhjb_grid.csv", params={"config": cfg["model"]})
    print(f"solved {solution.t_nodes.size}x{solution.y_nodes.size} limit grid")
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    model = build_model(cfg["model"])
    problem = build_problem(cfg.get("problem"), model)
    grid = build_grid(cfg["grid"], model)
    sweep_cfg = cfg.get("sweep", {})
    _require_keys(sweep_cfg, "sweep",
                  {"taus"}, {"time_margin_cells", "space_margin_frac", "use_mc", "n_paths"})
    window = ComparisonWindow(
        time_margin_cells=int(sweep_cfg.get("time_margin_cells", 2)),
        space_margin_frac=float(sweep_cfg.get("space_margin_frac", 0.1)))
    seed = _seed_from(cfg, args.seed)
    report = run_sweep(model, problem, [float(t) for t in sweep_cfg["taus"]], grid,
                       window=window, use_mc=bool(sweep_cfg.get("use_mc", False)),
                       n_paths=int(sweep_cfg.get("n_paths", 20000)),
                       rng=RngState(seed))
    out = _out_dir(cfg, args.out)
    emit_report(report, out / "sweep.csv", include_runtimes=args.timings)
    print(f"fitted decay slope {report.fitted_decay_slope:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctrwlab",
                                description="controlled-CTRW / fractional-HJB laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    fd = sub.add_parser("frac-deriv", help="evaluate a fractional derivative of a builtin")
    fd.add_argument("--op", required=True, choices=sorted(_FRAC_OPS))
    fd.add_argument("--fn", required=True, choices=sorted(_BUILTIN_FNS))
    fd.add_argument("--beta", type=float, required=True)
    fd.add_argument("--a", type=float, default=0.0)
    fd.add_argument("--b", type=float, default=1.0)
    fd.add_argument("--x", type=float, required=True)
    fd.add_argument("--h", type=float, default=1e-3)
    fd.add_argument("--decay", default="zero", choices=["zero", "constant"])
    fd.set_defaults(func=cmd_frac_deriv)

    sim = sub.add_parser("simulate", help="simulate paths and estimate the policy value")
    sim.add_argument("--config", required=True)
    sim.add_argument("--paths", type=int, required=True)
    sim.add_argument("--dump-paths", type=int, default=100,
                     help="number of paths written to the CSV dump")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_simulate)

    dp = sub.add_parser("solve-dp", help="solve the scaled DP equation on the grid")
    dp.add_argument("--config", required=True)
    dp.add_argument("--seed", type=int, default=None)
    dp.add_argument("--out", default=None)
    dp.set_defaults(func=cmd_solve_dp)

    fh = sub.add_parser("solve-fhjb", help="solve the limiting equation on the grid")
    fh.add_argument("--config", required=True)
    fh.add_argument("--seed", type=int, default=None)
    fh.add_argument("--out", default=None)
    fh.set_defaults(func=cmd_solve_fhjb)

    cv = sub.add_parser("converge", help="tau sweep: DP versus the limit solution")
    cv.add_argument("--config", required=True)
    cv.add_argument("--seed", type=int, default=None)
    cv.add_argument("--out", default=None)
    cv.add_argument("--timings", action="store_true",
                    help="record wall-clock runtimes (breaks byte determinism)")
    cv.set_defaults(func=cmd_converge)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
