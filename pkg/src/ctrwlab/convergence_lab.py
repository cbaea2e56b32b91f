"""Orchestrates the central experiment: DP solutions for a tau ladder versus
the limiting-equation solution, with error decay statistics.

The limit solution is computed once on the shared grid; each tau produces a
DP solution (or, optionally, Monte Carlo policy values under the
DP-improved policy) and errors are taken on a comparison window that
excludes the earliest time nodes (the limiting source is singular at t = 0)
and an outer fraction of the space window (the nonlocal operators see
boundary truncation there).  Acceptance for the benchmark is monotone error
decay and a positive fitted slope; the underlying derivation is heuristic
and promises no rate.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .ctrw_sim import ModelSpec, Policy, evaluate_policy_mc, greedy_policy_improvement
from .dp_solver import GridFunction, solve_dp
from .errors import ConfigurationError
from .fhjb_solver import FhjbProblem, solve_fhjb
from .stable_rng import RngState

MC_MAX_PROBES = 25


@dataclass(frozen=True)
class ComparisonWindow:
    """Sub-grid on which errors are measured.

    ``time_margin_cells`` time nodes are dropped from the low end (default
    two, i.e. t < 2 h_t) and ``space_margin_frac`` of the space window is
    dropped on each side (default the outer 10%).
    """

    time_margin_cells: int = 2
    space_margin_frac: float = 0.1

    def __post_init__(self):
        if self.time_margin_cells < 1:
            raise ConfigurationError("the singular first time node must be excluded")
        if not (0.0 <= self.space_margin_frac < 0.5):
            raise ConfigurationError("space margin fraction must lie in [0, 0.5)")

    def masks(self, t_nodes: np.ndarray, y_nodes: np.ndarray, h_t: float):
        t_mask = t_nodes >= self.time_margin_cells * h_t - 1e-12
        span = y_nodes[-1] - y_nodes[0]
        lo = y_nodes[0] + self.space_margin_frac * span
        hi = y_nodes[-1] - self.space_margin_frac * span
        y_mask = (y_nodes >= lo - 1e-12) & (y_nodes <= hi + 1e-12)
        return t_mask, y_mask


@dataclass
class SweepReport:
    tau_values: list
    sup_errors: list
    l2_errors: list
    mc_std_errors: list                  # empty unless the MC route ran
    fitted_decay_slope: float
    runtimes: list
    window: ComparisonWindow
    excluded_time_nodes: int
    excluded_space_nodes: int


def _check_pairing(model: ModelSpec, problem: FhjbProblem) -> None:
    beta = getattr(model.waiting, "beta", None)
    if beta is None or abs(problem.beta - beta) > 1e-12:
        raise ConfigurationError("model and problem disagree on the waiting tail index")
    if abs(problem.alpha - model.alpha) > 1e-12:
        raise ConfigurationError("model and problem disagree on the jump stability index")
    if problem.n_controls != model.n_controls:
        raise ConfigurationError("model and problem disagree on the control set")
    if problem.direction != model.direction:
        raise ConfigurationError("model and problem disagree on the time direction")
    probe = np.array([0.0])
    for u in range(model.n_controls):
        paired = model.jumps_per_control[u].limit_generator_scale()
        declared = float(problem.controls[u].scale_at(probe)[0])
        if not callable(problem.controls[u].stable_scale) \
                and abs(paired - declared) > 1e-9 * max(1.0, abs(paired)):
            raise ConfigurationError(
                f"control {u}: limiting scale {declared} does not match the "
                f"jump law's normalization {paired}")
    if (model.jump_reward is None) != (problem.jump_reward_density is None):
        raise ConfigurationError("model and problem disagree on jump rewards")
    if (model.waiting_reward is None) != (problem.waiting_reward is None):
        raise ConfigurationError("model and problem disagree on waiting rewards")


def _grid_errors(diff: np.ndarray, t_mask, y_mask, h_t: float, h_y: float):
    sub = diff[np.ix_(t_mask, y_mask)]
    sup = float(np.max(np.abs(sub)))
    l2 = float(np.sqrt(np.sum(sub ** 2) * h_t * h_y))
    return sup, l2


def run_sweep(model: ModelSpec, problem: FhjbProblem, taus, grid: GridFunction,
              window: ComparisonWindow | None = None, use_mc: bool = False,
              n_paths: int = 20000, rng: RngState | None = None) -> SweepReport:
    """Solve the limit once and a DP (or MC) approximation per tau.

    The grid template must start at t = 0; the limit solver runs on the
    same nodes from h_t on, so errors compare identical nodes.
    """
    taus = list(taus)
    if len(taus) < 3:
        raise ConfigurationError("a sweep needs at least 3 tau values")
    if any(not (0.0 < tv <= 1.0) for tv in taus):
        raise ConfigurationError("tau values must lie in (0, 1]")
    if any(b <= a for a, b in zip(taus[1:], taus[:-1])):
        raise ConfigurationError("tau values must be strictly decreasing")
    _check_pairing(model, problem)
    window = window or ComparisonWindow()
    grid.require_uniform()
    t, y = grid.t_nodes, grid.y_nodes
    h_t, h_y = grid.h_t, grid.h_y
    limit_grid = GridFunction(t[1:], y, np.zeros((t.size - 1, y.size)))
    limit = solve_fhjb(problem, limit_grid)
    t_mask, y_mask = window.masks(limit.t_nodes, y, h_t)
    if use_mc and rng is None:
        raise ConfigurationError("the Monte Carlo route needs an RngState")
    sup_errors, l2_errors, mc_ses, runtimes = [], [], [], []
    for tau in taus:
        t_start = time.perf_counter()
        model_tau = replace(model, tau=tau)
        if not use_mc:
            dp = solve_dp(model_tau, grid)
            diff = dp.values[1:] - limit.values
            sup, l2 = _grid_errors(diff, t_mask, y_mask, h_t, h_y)
            mc_ses.append(None)
        else:
            dp = solve_dp(model_tau, grid)
            policy = greedy_policy_improvement(model_tau, dp)
            t_idx = np.where(t_mask)[0]
            y_idx = np.where(y_mask)[0]
            probes = [(i, j) for i in t_idx for j in y_idx]
            stride = max(1, len(probes) // MC_MAX_PROBES)
            probes = probes[::stride][:MC_MAX_PROBES]
            diffs, ses = [], []
            for k, (i, j) in enumerate(probes):
                est = evaluate_policy_mc(model_tau, policy, float(limit.t_nodes[i]),
                                         float(y[j]), n_paths,
                                         rng.stream(k * n_paths))
                diffs.append(est.mean - limit.values[i, j])
                ses.append(est.std_error)
            sup = float(np.max(np.abs(diffs)))
            l2 = float(np.sqrt(np.mean(np.square(diffs))))
            mc_ses.append(float(np.max(ses)))
        sup_errors.append(sup)
        l2_errors.append(l2)
        runtimes.append(time.perf_counter() - t_start)
    slope = float(np.polyfit(np.log(taus), np.log(np.maximum(sup_errors, 1e-300)), 1)[0])
    return SweepReport(
        tau_values=taus,
        sup_errors=sup_errors,
        l2_errors=l2_errors,
        mc_std_errors=[se for se in mc_ses if se is not None],
        fitted_decay_slope=slope,
        runtimes=runtimes,
        window=window,
        excluded_time_nodes=int(np.sum(~t_mask) + 1),  # +1 for the t = 0 slice
        excluded_space_nodes=int(np.sum(~y_mask)),
    )


def emit_report(report: SweepReport, path, include_runtimes: bool = True) -> None:
    """CSV table plus a JSON sidecar; byte-deterministic given identical inputs.

    ``include_runtimes=False`` writes 'na' in the runtime column so that
    repeated runs of the same experiment produce identical bytes.
    """
    lines = ["tau,sup_err,l2_err,mc_stderr,runtime_s"]
    mc = report.mc_std_errors or [None] * len(report.tau_values)
    for k, tau in enumerate(report.tau_values):
        mc_s = f"{mc[k]:.12g}" if mc[k] is not None else "na"
        rt = f"{report.runtimes[k]:.6f}" if include_runtimes else "na"
        lines.append(f"{tau:.12g},{report.sup_errors[k]:.12g},"
                     f"{report.l2_errors[k]:.12g},{mc_s},{rt}")
    payload = "\n".join(lines) + "\n"
    try:
        with open(path, "w", newline="") as fh:
            fh.write(payload)
        meta = {
            "checksum_sha256": hashlib.sha256(payload.encode()).hexdigest(),
            "fitted_decay_slope": report.fitted_decay_slope,
            "window": {
                "time_margin_cells": report.window.time_margin_cells,
                "space_margin_frac": report.window.space_margin_frac,
                "excluded_time_nodes": report.excluded_time_nodes,
                "excluded_space_nodes": report.excluded_space_nodes,
            },
        }
        with open(str(path) + ".meta.json", "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write sweep report to {path}: {exc}") from exc
