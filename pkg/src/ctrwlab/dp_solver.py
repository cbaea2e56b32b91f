"""Deterministic solver for the scaled DP integral equation on a (t, y) grid.

The recursion marches in increasing remaining time.  At node t_i the value
splits into the no-jump branch S0(y) * P(wait > t_i) (control-free, outside
the sup) and a jump branch: an expectation of the already-computed smaller-t
slices smoothed by the per-control jump kernel, plus reward terms, with a
pointwise sup over controls.

Waiting-time discretization: the renewal time r in (0, t_i] is lumped onto
grid nodes using the *exact* CDF increment of the scaled law on each cell
[kh, (k+1)h) together with the exact conditional mean of r in the cell; the
cell mass is split between the two bracketing nodes so the mean is
preserved.  The recursion is then an exact expectation over a discretized
renewal time.  (Mean preservation matters: putting each cell's mass on a
single node leaves an O(h^{1-beta}) defect that dominates the tau-sweep.)
Mass in the first cell multiplies the unknown slice itself, so each slice
solves a small contraction fixed point S = sup_u [w_ii K_u S + b_u] by
value iteration; the contraction factor is P(wait < h) < 1.

Space discretization: cell-probability masses of the scaled jump law on
grid offsets, truncated where the remaining tail mass is below 1e-8 (a
wider requirement than the window raises WindowError) and renormalized.
The cell masses are then nudged to match the law's exact mean and (when
finite) second moment; without this the O(h_y^2) per-renewal variance
defect compounds like 1/tau as tau -> 0.  Kernels stay stochastic, so
constants are preserved exactly and the comparison principle holds.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ctrw_sim import DIRECTION_ELAPSED, DIRECTION_REMAINING, ModelSpec
from .errors import (
    ConfigurationError,
    GridResolutionError,
    UnsupportedInputError,
    ValidationError,
    WindowError,
)
from .stable_rng import ScaledWaitingLaw

TIME_BOUNDARY = "zero-outside-time"
SPACE_BOUNDARY = "constant-extrapolate-space"

KERNEL_TAIL_TOL = 1e-8
NOJUMP_DEGENERATE = 1.0 - 1e-12
FP_TOL = 1e-12


@dataclass
class GridFunction:
    """Scalar values on a regular (t, y) grid.

    ``time_boundary`` and ``space_boundary`` record the extension rules in
    force: zero outside the time range, constant extrapolation in space.
    """

    t_nodes: np.ndarray
    y_nodes: np.ndarray
    values: np.ndarray
    time_boundary: str = TIME_BOUNDARY
    space_boundary: str = SPACE_BOUNDARY

    def __post_init__(self):
        self.t_nodes = np.asarray(self.t_nodes, dtype=float)
        self.y_nodes = np.asarray(self.y_nodes, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if np.any(np.diff(self.t_nodes) <= 0) or np.any(np.diff(self.y_nodes) <= 0):
            raise ValidationError("grid nodes must be strictly increasing")
        if self.values.shape != (self.t_nodes.size, self.y_nodes.size):
            raise ValidationError("values shape must be (n_t, n_y)")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("grid values must be finite")
        if self.time_boundary != TIME_BOUNDARY or self.space_boundary != SPACE_BOUNDARY:
            raise ValidationError("unsupported boundary rule")

    @classmethod
    def template(cls, t_max: float, n_t: int, y_min: float, y_max: float,
                 n_y: int, t_min: float = 0.0) -> "GridFunction":
        """Empty grid with n_t+1 time nodes on [t_min, t_max]."""
        t = np.linspace(t_min, t_max, n_t + 1)
        y = np.linspace(y_min, y_max, n_y)
        return cls(t, y, np.zeros((t.size, y.size)))

    @property
    def h_t(self) -> float:
        return float(self.t_nodes[1] - self.t_nodes[0])

    @property
    def h_y(self) -> float:
        return float(self.y_nodes[1] - self.y_nodes[0])

    def require_uniform(self) -> None:
        for nodes, name in ((self.t_nodes, "t"), (self.y_nodes, "y")):
            d = np.diff(nodes)
            if np.max(np.abs(d - d[0])) > 1e-9 * d[0]:
                raise ValidationError(f"{name}-grid must be uniform")


# ---------------------------------------------------------------------------
# Jump kernels
# ---------------------------------------------------------------------------

def build_jump_kernel(law, scale_factor: float, h_y: float, window_span: float,
                      tail_tol: float = KERNEL_TAIL_TOL):
    """Cell-probability kernel of the scaled jump law on grid offsets.

    Returns (weights, half_width).  weights[m + half_width] is the mass of
    the cell around offset m*h_y.  Discrete stub laws must sit exactly on
    grid offsets and are used verbatim.
    """
    atoms = getattr(law, "atoms", None)
    if atoms is not None:
        offs = [x * scale_factor for x, _ in atoms]
        ms = [int(round(o / h_y)) for o in offs]
        if any(abs(o - m * h_y) > 1e-9 * h_y for o, m in zip(offs, ms)):
            raise ValidationError("discrete jump atoms must land on grid offsets")
        half = max(abs(m) for m in ms) if ms else 0
        k = np.zeros(2 * half + 1)
        for (x, p), m in zip(atoms, ms):
            k[m + half] += p
        return k, half
    radius = law.tail_radius(tail_tol) * scale_factor
    if radius > window_span:
        raise WindowError(
            f"jump kernel needs radius {radius:.3g} for tail tolerance {tail_tol:g}, "
            f"but the space window only spans {window_span:.3g}")
    half = max(1, int(math.ceil(radius / h_y - 0.5)) + 1)
    edges = (np.arange(-half, half + 1) + 0.5) * h_y / scale_factor
    cdf_vals = law.cdf(edges)
    k = np.empty(2 * half + 1)
    k[0] = cdf_vals[0]
    k[1:] = np.diff(cdf_vals)
    k[-1] += 1.0 - cdf_vals[-1]          # absorb the truncated tails
    k /= k.sum()
    offs = np.arange(-half, half + 1) * h_y
    mean_target = law.mean() * scale_factor
    d_mean = mean_target - float(np.dot(k, offs))
    m2 = law.second_moment()
    if m2 is not None:
        var_target = m2 * scale_factor ** 2
        d_var = var_target - float(np.dot(k, offs ** 2))
    else:
        d_var = 0.0
    c_hi = (d_var / h_y ** 2 + d_mean / h_y) / 2.0
    c_lo = (d_var / h_y ** 2 - d_mean / h_y) / 2.0
    k[half - 1] += c_lo
    k[half + 1] += c_hi
    k[half] -= c_lo + c_hi
    if np.min(k) < -1e-12:
        raise GridResolutionError(
            "moment-matched jump kernel lost positivity; refine the space grid")
    k = np.maximum(k, 0.0)
    k /= k.sum()
    return k, half


def apply_kernel(values: np.ndarray, kernel: np.ndarray, half: int) -> np.ndarray:
    """Expectation over one jump: constant extrapolation outside the window."""
    if half == 0:
        return values * kernel[0]
    padded = np.pad(values, half, mode="edge")
    return np.correlate(padded, kernel, mode="valid")


# ---------------------------------------------------------------------------
# Waiting-time cell weights
# ---------------------------------------------------------------------------

def _cell_split_weights(law, h: float, n_cells: int):
    """Mass and mean-preserving split for cells [kh, (k+1)h), k = 0..n-1.

    Returns (mass, theta): cell k holds probability mass[k]; theta[k] of it
    belongs to the node at distance kh (the smaller-r edge) and the rest to
    the node at (k+1)h.  On a uniform grid these weights are stationary in
    the slice index.
    """
    edges = h * np.arange(n_cells + 1)
    at_least = np.asarray(law.mass_at_least(edges), dtype=float)
    # P(r in [kh, (k+1)h)) = P(r >= kh) - P(r >= (k+1)h)
    mass = at_least[:-1] - at_least[1:]
    tm = np.asarray(law.truncated_mean(edges), dtype=float)
    # int_{[0,s)} r dF = E[min(r,s)] - s P(r >= s), so cell moments telescope
    partial = tm - edges * at_least
    m1 = partial[1:] - partial[:-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        rbar = np.where(mass > 0, m1 / np.where(mass > 0, mass, 1.0), edges[:-1])
    # weight on the smaller-r node: linear interpolation of r across the cell
    theta = np.clip(1.0 - (rbar - edges[:-1]) / h, 0.0, 1.0)
    theta = np.where(mass > 0, theta, 1.0)
    return mass, theta


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------

def _jump_reward_profile(model: ModelSpec, kernels, y: np.ndarray):
    """E[f(u, y, xi_scaled)] per control, by the same cell quadrature as the kernel."""
    if model.jump_reward is None:
        return None
    h_y = y[1] - y[0]
    profiles = []
    for u in range(model.n_controls):
        k, half = kernels[u]
        offs = np.arange(-half, half + 1) * h_y
        acc = np.zeros_like(y)
        for m, w in zip(offs, k):
            if w == 0.0:
                continue
            acc += w * np.asarray(model.jump_reward(u, y, float(m)), dtype=float)
        profiles.append(acc)
    return profiles


# ---------------------------------------------------------------------------
# The solver
# ---------------------------------------------------------------------------

def _branch_data(model: ModelSpec, grid: GridFunction):
    """Validated, precomputed quantities shared by solve_dp and dp_residual."""
    if model.inner_motion is not None:
        raise UnsupportedInputError(
            "the grid DP solver covers jump dynamics only; inner motion is "
            "a simulator/limit-solver feature")
    grid.require_uniform()
    t, y = grid.t_nodes, grid.y_nodes
    if abs(t[0]) > 1e-12:
        raise ValidationError("the DP grid must start at t = 0")
    if abs(t[-1] - model.horizon) > 1e-9:
        raise ConfigurationError(
            f"grid horizon {t[-1]} does not match model horizon {model.horizon}")
    h = grid.h_t
    law = ScaledWaitingLaw(model.waiting, model.wait_scale())
    if law.tail(t[1]) > NOJUMP_DEGENERATE:
        raise GridResolutionError(
            "no-jump mass at the first node exceeds 1 - 1e-12; the grid "
            "cannot resolve the scaled waiting law")
    span = float(y[-1] - y[0])
    kernels = [build_jump_kernel(model.jumps_per_control[u], model.jump_scale(),
                                 grid.h_y, span) for u in range(model.n_controls)]
    n_cells = t.size - 1
    mass, theta = _cell_split_weights(law, h, n_cells)
    jr = _jump_reward_profile(model, kernels, y)
    return law, kernels, mass, theta, jr


def _slice_weights(law, mass, theta, t_i: float, i: int, h: float):
    """Weights on slices j = 0..i for the recursion at node i, plus no-jump mass."""
    w = np.zeros(i + 1)
    ks = np.arange(i)
    np.add.at(w, i - ks, mass[:i] * theta[:i])
    np.add.at(w, i - ks - 1, mass[:i] * (1.0 - theta[:i]))
    w[0] += law.point_mass(t_i)          # a renewal exactly at t_i lands on slice 0
    p_nojump = float(law.mass_above(t_i))
    return w, p_nojump


def _reward_terms(model: ModelSpec, law, jr, t_i: float, p_nojump: float,
                  y: np.ndarray, native_t: float):
    """Per-control additive reward terms of the DP right-hand side at t_i."""
    terms = [np.zeros_like(y) for _ in range(model.n_controls)]
    if jr is not None:
        jump_mass = 1.0 - p_nojump
        for u in range(model.n_controls):
            terms[u] = terms[u] + jump_mass * jr[u]
    if model.waiting_reward is not None:
        # no-jump branch pays t*g on P(wait > t); the jump branch pays g*r
        r_mean = law.partial_mean(0.0, t_i) + t_i * law.point_mass(t_i)
        for u in range(model.n_controls):
            g_u = np.asarray(model.waiting_reward(u, native_t, y), dtype=float)
            terms[u] = terms[u] + g_u * (t_i * p_nojump + r_mean)
    return terms


def solve_dp(model: ModelSpec, grid: GridFunction) -> GridFunction:
    """Solve the scaled DP equation on the grid template.

    For elapsed-time models the recursion runs in remaining time s = T - t
    with the terminal data as the s = 0 slice and the result is reflected
    back, so the returned grid is indexed by native (elapsed) time.
    """
    law, kernels, mass, theta, jr = _branch_data(model, grid)
    t, y = grid.t_nodes, grid.y_nodes
    h = grid.h_t
    n_u = model.n_controls
    elapsed = model.direction == DIRECTION_ELAPSED
    S = np.empty((t.size, y.size))
    S[0] = np.asarray(model.terminal(y), dtype=float)
    conv = np.empty((n_u, t.size, y.size))
    for u in range(n_u):
        conv[u, 0] = apply_kernel(S[0], *kernels[u])
    for i in range(1, t.size):
        t_i = float(t[i])
        native_t = model.horizon - t_i if elapsed else t_i
        w, p_nojump = _slice_weights(law, mass, theta, t_i, i, h)
        outer = S[0] * p_nojump
        rewards = _reward_terms(model, law, jr, t_i, p_nojump, y, native_t)
        base = [np.tensordot(w[:i], conv[u, :i], axes=(0, 0)) + rewards[u]
                for u in range(n_u)]
        w_self = w[i]
        if w_self <= 0.0:
            S[i] = outer + np.maximum.reduce(base)
        else:
            cur = S[i - 1].copy()
            max_iter = 200 + int(-40.0 * math.log(FP_TOL) / max(1e-12, -math.log(w_self))) \
                if w_self < 1.0 else 10 ** 6
            for _ in range(max_iter):
                nxt = outer + np.maximum.reduce(
                    [base[u] + w_self * apply_kernel(cur, *kernels[u]) for u in range(n_u)])
                delta = float(np.max(np.abs(nxt - cur)))
                scale = 1.0 + float(np.max(np.abs(nxt)))
                cur = nxt
                if delta <= FP_TOL * scale:
                    break
            S[i] = cur
        for u in range(n_u):
            conv[u, i] = apply_kernel(S[i], *kernels[u])
    values = S[::-1] if elapsed else S
    return GridFunction(t, y, values)


def _rhs_all(model: ModelSpec, S_internal: np.ndarray, grid: GridFunction):
    """DP right-hand side at every node, given the full slice stack."""
    law, kernels, mass, theta, jr = _branch_data(model, grid)
    t, y = grid.t_nodes, grid.y_nodes
    h = grid.h_t
    n_u = model.n_controls
    elapsed = model.direction == DIRECTION_ELAPSED
    conv = np.empty((n_u, t.size, y.size))
    for u in range(n_u):
        for i in range(t.size):
            conv[u, i] = apply_kernel(S_internal[i], *kernels[u])
    rhs = np.empty_like(S_internal)
    rhs[0] = np.asarray(model.terminal(y), dtype=float)
    for i in range(1, t.size):
        t_i = float(t[i])
        native_t = model.horizon - t_i if elapsed else t_i
        w, p_nojump = _slice_weights(law, mass, theta, t_i, i, h)
        rewards = _reward_terms(model, law, jr, t_i, p_nojump, y, native_t)
        branches = [np.tensordot(w[:i + 1], conv[u, :i + 1], axes=(0, 0)) + rewards[u]
                    for u in range(n_u)]
        rhs[i] = rhs[0] * p_nojump + np.maximum.reduce(branches)
    return rhs


def dp_residual(model: ModelSpec, S: GridFunction) -> float:
    """Max-norm defect of the DP equation on the given grid function."""
    elapsed = model.direction == DIRECTION_ELAPSED
    S_internal = S.values[::-1] if elapsed else S.values
    rhs = _rhs_all(model, S_internal, S)
    return float(np.max(np.abs(S_internal - rhs)))


def control_branch_values(model: ModelSpec, S: GridFunction):
    """One-step DP branch value per control at every node (for greedy improvement).

    The control-free no-jump term is omitted: it does not affect the argmax.
    """
    law, kernels, mass, theta, jr = _branch_data(model, S)
    t, y = S.t_nodes, S.y_nodes
    h = S.h_t
    n_u = model.n_controls
    elapsed = model.direction == DIRECTION_ELAPSED
    S_internal = S.values[::-1] if elapsed else S.values
    conv = np.empty((n_u, t.size, y.size))
    for u in range(n_u):
        for i in range(t.size):
            conv[u, i] = apply_kernel(S_internal[i], *kernels[u])
    branches = [np.zeros_like(S_internal) for _ in range(n_u)]
    for u in range(n_u):
        # at zero remaining time the jump branch is empty; rank controls by
        # the immediate-jump expectation so the argmax stays meaningful
        branches[u][0] = conv[u, 0]
    for i in range(1, t.size):
        t_i = float(t[i])
        native_t = model.horizon - t_i if elapsed else t_i
        w, p_nojump = _slice_weights(law, mass, theta, t_i, i, h)
        rewards = _reward_terms(model, law, jr, t_i, p_nojump, y, native_t)
        for u in range(n_u):
            branches[u][i] = np.tensordot(w[:i + 1], conv[u, :i + 1], axes=(0, 0)) \
                + rewards[u]
    if elapsed:
        branches = [b[::-1] for b in branches]
    return branches


# ---------------------------------------------------------------------------
# Grid I/O
# ---------------------------------------------------------------------------

def write_grid(gf: GridFunction, path: str, params: dict | None = None) -> None:
    """CSV (t, y, value) plus a JSON sidecar with parameters and a checksum."""
    lines = ["t,y,value"]
    for i, ti in enumerate(gf.t_nodes):
        for j, yj in enumerate(gf.y_nodes):
            lines.append(f"{ti:.12g},{yj:.12g},{gf.values[i, j]:.17g}")
    payload = "\n".join(lines) + "\n"
    with open(path, "w", newline="") as fh:
        fh.write(payload)
    meta = {
        "checksum_sha256": hashlib.sha256(payload.encode()).hexdigest(),
        "grid": {
            "n_t": int(gf.t_nodes.size), "n_y": int(gf.y_nodes.size),
            "t_first": float(gf.t_nodes[0]), "t_last": float(gf.t_nodes[-1]),
            "y_first": float(gf.y_nodes[0]), "y_last": float(gf.y_nodes[-1]),
            "time_boundary": gf.time_boundary, "space_boundary": gf.space_boundary,
        },
        "params": params or {},
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_grid(path: str) -> GridFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    t = np.unique(data[:, 0])
    y = np.unique(data[:, 1])
    vals = data[:, 2].reshape(t.size, y.size)
    return GridFunction(t, y, vals)
