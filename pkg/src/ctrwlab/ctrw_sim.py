"""Controlled scaled CTRW simulation and Monte Carlo policy evaluation.

A path alternates waits and jumps: waits are gamma_i * tau^{1/beta}, jumps
xi_i * tau^{1/alpha}, the control for each renewal cycle is read from a
feedback policy at the state where the cycle starts.  Optional pieces:
a per-jump reward f(u, y, xi_scaled) (alpha-homogeneous in xi), a waiting
reward g(u, t, y) accrued linearly in elapsed wait (censored at the
horizon), and an inner drift-diffusion motion integrated in real time by
Euler steps between renewals.

Everything is pure per (model, policy, path index, seed): path i uses the
counter-based sub-stream ``rng.stream(i)``, and the Monte Carlo estimator
reduces per-path results in path-index order, so results do not depend on
how the work would be scheduled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ValidationError
from .stable_rng import RngState

DIRECTION_REMAINING = "remaining-time"
DIRECTION_ELAPSED = "elapsed-time"

_WAIT_BLOCK = 64


@dataclass(frozen=True)
class InnerMotion:
    """Controlled drift-diffusion followed between renewals.

    ``drift(u, y)`` and ``diffusion(u, y)`` take the control index and the
    current position.
    """

    drift: object
    diffusion: object


@dataclass(frozen=True)
class ModelSpec:
    """Full description of a scaled controlled CTRW problem."""

    waiting: object                       # waiting-time law (see stable_rng)
    jumps_per_control: tuple              # one jump law per control
    controls: tuple                       # control labels
    terminal: object                      # S0(y), vectorized in y
    alpha: float = 2.0
    jump_reward: object = None            # f(u, y, xi_scaled), alpha-homogeneous in xi
    waiting_reward: object = None         # g(u, t, y)
    inner_motion: InnerMotion | None = None
    tau: float = 1.0
    horizon: float = 1.0
    direction: str = DIRECTION_REMAINING

    def __post_init__(self):
        object.__setattr__(self, "jumps_per_control", tuple(self.jumps_per_control))
        object.__setattr__(self, "controls", tuple(self.controls))
        if len(self.controls) < 1:
            raise ValidationError("need at least one control")
        if len(self.jumps_per_control) != len(self.controls):
            raise ValidationError("need exactly one jump law per control")
        if not self.tau > 0:
            raise ValidationError("tau must be positive")
        if not self.horizon > 0:
            raise ValidationError("horizon must be positive")
        if not (0.0 < self.alpha <= 2.0):
            raise ValidationError("alpha must lie in (0, 2]")
        if self.direction not in (DIRECTION_REMAINING, DIRECTION_ELAPSED):
            raise ValidationError(f"unknown time direction {self.direction!r}")
        for law in self.jumps_per_control:
            law_alpha = getattr(law, "alpha", None)
            if law_alpha is not None and law_alpha != self.alpha:
                raise ValidationError(
                    f"jump law alpha={law_alpha} disagrees with model alpha={self.alpha}")

    @property
    def n_controls(self) -> int:
        return len(self.controls)

    def wait_scale(self) -> float:
        beta = self.waiting.beta if hasattr(self.waiting, "beta") else None
        if beta is None:
            return 1.0  # stub laws scale trivially unless told otherwise
        return self.tau ** (1.0 / beta)

    def jump_scale(self) -> float:
        return self.tau ** (1.0 / self.alpha)


def check_jump_reward_homogeneity(model: ModelSpec, rng: RngState, n_probes: int = 16,
                                  rel_tol: float = 1e-9) -> None:
    """Spot-check f(u, y, lam*xi) = lam^alpha f(u, y, xi) at lam in {0.5, 2}."""
    if model.jump_reward is None:
        return
    g = rng.generator()
    for _ in range(n_probes):
        u = int(g.integers(0, model.n_controls))
        y = float(g.normal(0.0, 2.0))
        xi = float(g.normal(0.0, 1.0)) or 0.3
        base = model.jump_reward(u, y, xi)
        for lam in (0.5, 2.0):
            expected = lam ** model.alpha * base
            got = model.jump_reward(u, y, lam * xi)
            if abs(got - expected) > rel_tol * (1.0 + abs(expected)):
                raise ValidationError(
                    f"jump reward is not alpha-homogeneous at (u={u}, y={y}, xi={xi})")


@dataclass(frozen=True)
class Policy:
    """Feedback control: (time cell, space cell) -> control index.

    Cells snap to the nearest grid node (clipped at the window edges); the
    time axis is in the model's native direction.
    """

    table: np.ndarray
    t_nodes: np.ndarray
    y_nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "table", np.asarray(self.table, dtype=int))
        object.__setattr__(self, "t_nodes", np.asarray(self.t_nodes, dtype=float))
        object.__setattr__(self, "y_nodes", np.asarray(self.y_nodes, dtype=float))
        if self.table.shape != (self.t_nodes.size, self.y_nodes.size):
            raise ValidationError("policy table shape must match its grid")
        if self.table.min() < 0:
            raise ValidationError("control indices must be non-negative")

    def n_controls_at_most(self, n: int) -> bool:
        return int(self.table.max()) < n

    def _snap(self, nodes: np.ndarray, x: float) -> int:
        idx = int(np.searchsorted(nodes, x))
        if idx <= 0:
            return 0
        if idx >= nodes.size:
            return nodes.size - 1
        return idx if (x - nodes[idx - 1]) > (nodes[idx] - x) else idx - 1

    def lookup(self, t: float, y: float) -> int:
        return int(self.table[self._snap(self.t_nodes, t), self._snap(self.y_nodes, y)])

    def is_constant(self) -> bool:
        return bool(np.all(self.table == self.table.flat[0]))

    @classmethod
    def constant(cls, control: int, t_nodes, y_nodes) -> "Policy":
        t_nodes = np.asarray(t_nodes, dtype=float)
        y_nodes = np.asarray(y_nodes, dtype=float)
        return cls(np.full((t_nodes.size, y_nodes.size), control), t_nodes, y_nodes)


@dataclass
class PathRecord:
    """One simulated trajectory."""

    events: list = field(default_factory=list)  # (wait, control, jump, inner_move)
    start_position: float = 0.0
    terminal_position: float = 0.0
    jump_reward_total: float = 0.0
    waiting_reward_total: float = 0.0
    truncated: bool = False
    reward_trace: list = field(default_factory=list)  # total reward after each event

    @property
    def n_events(self) -> int:
        return len(self.events)

    def payoff(self, terminal_fn) -> float:
        return (float(terminal_fn(self.terminal_position))
                + self.jump_reward_total + self.waiting_reward_total)


@dataclass(frozen=True)
class ValueEstimate:
    mean: float
    std_error: float
    n_paths: int


def _euler_inner(model: ModelSpec, u: int, y: float, duration: float,
                 step: float, g: np.random.Generator) -> float:
    """Advance the inner drift-diffusion over ``duration`` of real time."""
    im = model.inner_motion
    remaining = duration
    while remaining > 1e-15:
        dt = min(step, remaining)
        drift = im.drift(u, y)
        diff = im.diffusion(u, y)
        y = y + drift * dt + diff * math.sqrt(dt) * g.standard_normal()
        remaining -= dt
    return y


def simulate_path(model: ModelSpec, policy: Policy, y0: float, rng: RngState,
                  _elapsed_offset: float = 0.0) -> PathRecord:
    """Simulate one scaled path over the model horizon.

    Waits are drawn unscaled and multiplied by tau^{1/beta}, jumps by
    tau^{1/alpha}.  The control for a renewal cycle is fixed when the cycle
    starts.  Leaving the policy window sets the ``truncated`` flag; lookups
    clip to the window.
    """
    if not policy.n_controls_at_most(model.n_controls):
        raise ValidationError("policy references controls outside the model's control set")
    g = rng.generator()
    wait_scale = model.wait_scale()
    jump_scale = model.jump_scale()
    y_lo, y_hi = policy.y_nodes[0], policy.y_nodes[-1]
    rec = PathRecord(start_position=y0)
    y = y0
    t_rem = model.horizon
    euler_step = wait_scale if model.inner_motion is not None else 0.0
    while True:
        t_native = (t_rem if model.direction == DIRECTION_REMAINING
                    else _elapsed_offset + model.horizon - t_rem)
        u = policy.lookup(t_native, y)
        wait = float(model.waiting.sample(g)) * wait_scale
        # the renewal whose wait reaches the horizon still jumps: the event
        # count is the passage count inf{n : X(n) >= t}
        censored = wait >= t_rem
        span = t_rem if censored else wait
        if model.waiting_reward is not None:
            rec.waiting_reward_total += model.waiting_reward(u, t_native, y) * span
        inner_move = 0.0
        if model.inner_motion is not None:
            y_new = _euler_inner(model, u, y, span, euler_step, g)
            inner_move = y_new - y
            y = y_new
        jump = float(model.jumps_per_control[u].sample(g)) * jump_scale
        if model.jump_reward is not None:
            rec.jump_reward_total += model.jump_reward(u, y, jump)
        y += jump
        t_rem -= span
        rec.events.append((wait, u, jump, inner_move))
        rec.reward_trace.append(rec.jump_reward_total + rec.waiting_reward_total)
        if not (y_lo <= y <= y_hi):
            rec.truncated = True
        if censored:
            break
    rec.terminal_position = y
    return rec


def _fast_path_batch(model: ModelSpec, u: int, y0: float, horizon: float,
                     g: np.random.Generator, elapsed_offset: float = 0.0):
    """Vectorized single-control path without inner motion.

    Returns (terminal_position, n_events, jump_reward_total, waiting_total).
    Waits and jumps are drawn in blocks from the same stream; the procedure
    is fixed, so results are reproducible per (seed, counter).
    """
    wait_scale = model.wait_scale()
    jump_scale = model.jump_scale()
    waits = np.empty(0)
    while True:
        block = model.waiting.sample(g, _WAIT_BLOCK if waits.size == 0 else waits.size)
        waits = np.concatenate([waits, np.asarray(block) * wait_scale])
        cum = np.cumsum(waits)
        if cum[-1] >= horizon:
            break
    # passage count: the renewal whose wait reaches the horizon still jumps
    n = int(np.searchsorted(cum, horizon, side="left")) + 1
    jumps = np.asarray(model.jumps_per_control[u].sample(g, n)) * jump_scale
    y = y0 + float(np.sum(jumps))
    jr = 0.0
    if model.jump_reward is not None:
        pos = y0 + np.concatenate([[0.0], np.cumsum(jumps[:-1])])
        jr = float(sum(model.jump_reward(u, float(p), float(j)) for p, j in zip(pos, jumps)))
    wr = 0.0
    if model.waiting_reward is not None:
        starts = np.concatenate([[0.0], cum[:n - 1]])
        ends = np.minimum(cum[:n], horizon)
        pos = y0 + np.concatenate([[0.0], np.cumsum(jumps[:-1])])
        t_nat = (horizon - starts if model.direction == DIRECTION_REMAINING
                 else elapsed_offset + starts)
        wr = float(sum(model.waiting_reward(u, float(t), float(p)) * float(e - s)
                       for t, p, s, e in zip(t_nat, pos, starts, ends)))
    return y, n, jr, wr


def evaluate_policy_mc(model: ModelSpec, policy: Policy, t: float, y0: float,
                       n_paths: int, rng: RngState) -> ValueEstimate:
    """Sample mean and standard error of the pay-off under a fixed policy.

    The pay-off of a path is S0(terminal) plus accumulated jump and waiting
    rewards, simulated over duration ``t`` (for elapsed-time models, the
    remaining duration from start time ``t`` to the horizon).
    """
    if n_paths < 2:
        raise ConfigurationError("n_paths must be at least 2")
    duration = t if model.direction == DIRECTION_REMAINING else model.horizon - t
    if duration <= 0:
        raise ValidationError("evaluation needs a positive remaining duration")
    run_model = replace(model, horizon=duration)
    offset = 0.0 if model.direction == DIRECTION_REMAINING else t
    fast = (policy.is_constant() and model.inner_motion is None)
    totals = np.empty(n_paths)
    if fast:
        u = int(policy.table.flat[0])
        for i in range(n_paths):
            g = rng.stream(i).generator()
            y, _n, jr, wr = _fast_path_batch(run_model, u, y0, duration, g, offset)
            totals[i] = float(run_model.terminal(y)) + jr + wr
    else:
        for i in range(n_paths):
            rec = simulate_path(run_model, policy, y0, rng.stream(i), offset)
            totals[i] = rec.payoff(run_model.terminal)
    mean = float(np.mean(totals))
    std_error = float(np.std(totals, ddof=1) / math.sqrt(n_paths))
    return ValueEstimate(mean=mean, std_error=std_error, n_paths=n_paths)


def path_event_counts(model: ModelSpec, policy: Policy, y0: float,
                      n_paths: int, rng: RngState) -> np.ndarray:
    """Renewal counts per path (diagnostics for the scaling cancellation)."""
    counts = np.empty(n_paths, dtype=np.int64)
    fast = (policy.is_constant() and model.inner_motion is None)
    for i in range(n_paths):
        if fast:
            g = rng.stream(i).generator()
            _, n, _, _ = _fast_path_batch(model, int(policy.table.flat[0]), y0,
                                          model.horizon, g)
            counts[i] = n
        else:
            counts[i] = simulate_path(model, policy, y0, rng.stream(i)).n_events
    return counts


def greedy_policy_improvement(model: ModelSpec, value) -> Policy:
    """Pointwise argmax of the one-step DP right-hand side given a value grid.

    Ties break toward the smallest control index, matching the solver's sup.
    """
    from . import dp_solver  # deferred: dp_solver imports ModelSpec from here

    q_values = dp_solver.control_branch_values(model, value)
    best = np.argmax(np.stack(q_values, axis=0), axis=0)  # first max wins ties
    return Policy(best, value.t_nodes, value.y_nodes)


def write_path_records(records, path) -> None:
    """Path dump: one CSV row per event (position and rewards after the jump)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["path_id", "event_id", "wait", "control", "jump",
                         "position", "reward_accum"])
        for pid, rec in enumerate(records):
            y = rec.start_position
            for eid, (wait, u, jump, inner) in enumerate(rec.events):
                y = y + inner + jump
                accum = rec.reward_trace[eid] if eid < len(rec.reward_trace) else 0.0
                writer.writerow([pid, eid, f"{wait:.12g}", u, f"{jump:.12g}",
                                 f"{y:.12g}", f"{accum:.12g}"])
