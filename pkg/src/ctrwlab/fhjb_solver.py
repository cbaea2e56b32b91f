"""Grid solver for the limiting fractional HJB equations.

Remaining-time form solved here:

    0 = t^{-b} S0(y)/Gamma(1-b)
        + sup_u [ L_a^u S + B^u S + 2 g(u,t,y) t^{1-b} + F(u,y) ]
        + (dual time generator applied to S, zero-extended below t = 0).

With the initial slice S(0+, y) = S0(y), the dual-generator term plus the
source collapse into a Caputo-form evolution (the boundary-term identity in
the time variable), and the solver marches exactly that: a Grunwald-
Letnikov discretization of the order-beta Caputo derivative with full
history, explicit in the spatial sup.  ``fhjb_residual`` then certifies the
stated equation separately, evaluating the time operator with
``frac_calc.dual_generator_form`` on the time axis.

The elapsed-time (backward-data) form is the exact reflection t -> T - t of
the remaining-time form, with the ascending generator in place of the dual;
it is solved and certified through that reflection.  In the reflected
reward term the time factor is the remaining duration (T-t)^{1-b}.

Explicit marching is conditionally stable: h_t^beta * max|diag(L+B)| <=
beta.  Under that bound every history coefficient is non-negative, which is
what makes the comparison principle hold discretely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import frac_calc
from .ctrw_sim import DIRECTION_ELAPSED, DIRECTION_REMAINING, ModelSpec
from .dp_solver import GridFunction
from .errors import (
    ConfigurationError,
    StabilityError,
    UnsupportedOrderError,
    ValidationError,
)
from .frac_calc import FracOrder, SampledFunction, dual_generator_form, gamma, gl_weights

FORM_AUTO = "auto"
FORM_COMPENSATED = "compensated"
FORM_UNCOMPENSATED = "uncompensated"


@dataclass(frozen=True)
class ControlGenerator:
    """Per-control parameters of the limiting spatial dynamics.

    ``stable_scale`` multiplies the stable generator; it may be a callable
    of y (position-dependent jump intensity).  ``drift``/``diffusion``
    define the inner-motion generator B^u and may be constants or callables
    of y.
    """

    stable_scale: object = 1.0
    drift: object = None
    diffusion: object = None

    def scale_at(self, y: np.ndarray) -> np.ndarray:
        if callable(self.stable_scale):
            return np.asarray(self.stable_scale(y), dtype=float)
        return np.full_like(np.asarray(y, dtype=float), float(self.stable_scale))

    def drift_at(self, y: np.ndarray):
        if self.drift is None:
            return None
        if callable(self.drift):
            return np.asarray(self.drift(y), dtype=float)
        return np.full_like(np.asarray(y, dtype=float), float(self.drift))

    def diffusion_at(self, y: np.ndarray):
        if self.diffusion is None:
            return None
        if callable(self.diffusion):
            return np.asarray(self.diffusion(y), dtype=float)
        return np.full_like(np.asarray(y, dtype=float), float(self.diffusion))


@dataclass(frozen=True)
class FhjbProblem:
    """Limiting control problem: orders, per-control generators, rewards, data."""

    beta: float
    alpha: float
    controls: tuple                      # ControlGenerator per control
    terminal: object                     # S0(y) (remaining) or S(T, y) (elapsed)
    jump_reward_density: object = None   # F(u, y_array) -> array
    waiting_reward: object = None        # g(u, t, y_array) -> array
    direction: str = DIRECTION_REMAINING
    horizon: float | None = None         # required for the elapsed-time form

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        FracOrder(self.beta)
        if self.alpha == 1.0 or not (0.0 < self.alpha <= 2.0):
            raise UnsupportedOrderError(
                f"spatial order must lie in (0,1) or (1,2], got {self.alpha}")
        if len(self.controls) < 1:
            raise ValidationError("need at least one control")
        if self.direction not in (DIRECTION_REMAINING, DIRECTION_ELAPSED):
            raise ValidationError(f"unknown time direction {self.direction!r}")
        if self.direction == DIRECTION_ELAPSED and self.horizon is None:
            raise ValidationError("elapsed-time problems need a horizon")

    @property
    def n_controls(self) -> int:
        return len(self.controls)


# ---------------------------------------------------------------------------
# Spatial operators
# ---------------------------------------------------------------------------

def apply_l_alpha(values, h: float, alpha: float, scale=1.0,
                  form: str = FORM_AUTO) -> np.ndarray:
    """Symmetric stable generator of order alpha on a uniform slice.

    alpha = 2 is the classical (scale/2) * second difference.  For alpha < 2
    the symmetrized increment G(r) = S(y+r) + S(y-r) - 2 S(y) is integrated
    against r^{-1-alpha}: the cell [0, h] uses the local Taylor model
    G ~ (second difference) * r^2, later cells integrate the piecewise-
    linear interpolant of G exactly, and beyond the window (constant
    extrapolation) the tail is closed-form.  The compensated and
    uncompensated forms coincide under symmetry; the ``form`` argument is
    validated against alpha (compensation is the alpha > 1 prescription).
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 5:
        raise ValidationError("slice needs at least 5 nodes")
    if alpha == 1.0:
        raise UnsupportedOrderError("alpha = 1 has no implemented generator form")
    if not (0.0 < alpha <= 2.0):
        raise UnsupportedOrderError(f"alpha must lie in (0,1) or (1,2], got {alpha}")
    if form not in (FORM_AUTO, FORM_COMPENSATED, FORM_UNCOMPENSATED):
        raise ValidationError(f"unknown form {form!r}")
    if form == FORM_COMPENSATED and alpha < 1.0:
        raise ValidationError("the compensated form is reserved for alpha > 1")
    if form == FORM_UNCOMPENSATED and alpha > 1.0:
        raise ValidationError("alpha > 1 requires the compensated form")
    scale_arr = np.asarray(scale, dtype=float)  # scalar or per-node array
    n = values.size
    if alpha == 2.0:
        padded = np.pad(values, 1, mode="edge")
        second = (padded[:-2] - 2.0 * values + padded[2:]) / h ** 2
        return 0.5 * scale_arr * second
    idx = np.arange(n)
    m = np.arange(1, n)                  # offsets in cells
    up = np.minimum(idx[:, None] + m[None, :], n - 1)
    dn = np.maximum(idx[:, None] - m[None, :], 0)
    G = values[up] + values[dn] - 2.0 * values[:, None]   # (n, n-1)
    r = m * h
    total = np.zeros(n)
    # first cell [0, h]: quadratic local model through G(h)
    total += G[:, 0] / h ** 2 * h ** (2.0 - alpha) / (2.0 - alpha)
    # interior cells [mh, (m+1)h] with the linear interpolant of G
    r1, r2 = r[:-1], r[1:]
    slope = (G[:, 1:] - G[:, :-1]) / h
    intercept = G[:, :-1] - slope * r1[None, :]
    ia = (r1 ** (-alpha) - r2 ** (-alpha)) / alpha
    ib = (r2 ** (1.0 - alpha) - r1 ** (1.0 - alpha)) / (1.0 - alpha)
    total += intercept @ ia + slope @ ib
    # constant tail beyond the window reach
    reach = (n - 1) * h
    total += G[:, -1] * reach ** (-alpha) / alpha
    return scale_arr * total


def _inner_generator_matrix(ctrl: ControlGenerator, y: np.ndarray) -> np.ndarray | None:
    """Upwind drift plus central diffusion matrix for B^u, or None."""
    drift = ctrl.drift_at(y)
    diff = ctrl.diffusion_at(y)
    if drift is None and diff is None:
        return None
    n = y.size
    h = y[1] - y[0]
    B = np.zeros((n, n))
    for j in range(n):
        jm, jp = max(j - 1, 0), min(j + 1, n - 1)
        if diff is not None and diff[j] != 0.0:
            c = 0.5 * diff[j] ** 2 / h ** 2
            B[j, jm] += c
            B[j, jp] += c
            B[j, j] -= 2.0 * c
        if drift is not None and drift[j] != 0.0:
            b = drift[j]
            if b > 0:
                B[j, jp] += b / h
                B[j, j] -= b / h
            else:
                B[j, jm] += -b / h
                B[j, j] -= -b / h
    return B


def _operator_matrix(problem: FhjbProblem, u: int, y: np.ndarray) -> np.ndarray:
    """Dense matrix of L_alpha^u + B^u on the slice (operators are linear)."""
    n = y.size
    h = float(y[1] - y[0])
    ctrl = problem.controls[u]
    scale = ctrl.scale_at(y)
    L = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        L[:, j] = apply_l_alpha(e, h, problem.alpha, 1.0)
    L = scale[:, None] * L
    B = _inner_generator_matrix(ctrl, y)
    return L if B is None else L + B


def _reward_stack(problem: FhjbProblem, y: np.ndarray, native_t: float,
                  remaining: float):
    """sup-argument reward terms per control: 2 g * remaining^{1-b} + F."""
    terms = []
    for u in range(problem.n_controls):
        term = np.zeros_like(y)
        if problem.jump_reward_density is not None:
            term = term + np.asarray(problem.jump_reward_density(u, y), dtype=float)
        if problem.waiting_reward is not None:
            g_u = np.asarray(problem.waiting_reward(u, native_t, y), dtype=float)
            term = term + 2.0 * g_u * remaining ** (1.0 - problem.beta)
        terms.append(term)
    return terms


def stability_limit(problem: FhjbProblem, y: np.ndarray) -> float:
    """Largest admissible explicit step for the stiffest control row."""
    dmax = 0.0
    for u in range(problem.n_controls):
        A = _operator_matrix(problem, u, y)
        dmax = max(dmax, float(np.max(-np.diag(A))))
    if dmax <= 0.0:
        return math.inf
    return (problem.beta / dmax) ** (1.0 / problem.beta)


def solve_fhjb(problem: FhjbProblem, grid: GridFunction) -> GridFunction:
    """March the Caputo-equivalent form with Grunwald-Letnikov history weights.

    The grid's first time node is t0 = h_t > 0 (the t^{-beta} source is
    singular at 0); the initial slice at t = 0 is the problem data and is
    not part of the output.  For elapsed-time problems the grid covers
    [0, T - h_t] and the terminal data sits at T.
    """
    grid.require_uniform()
    t, y = grid.t_nodes, grid.y_nodes
    h = grid.h_t
    elapsed = problem.direction == DIRECTION_ELAPSED
    if elapsed:
        T = float(problem.horizon)
        internal = np.sort(T - t)
        if abs(internal[0] - h) > 1e-9 * h:
            raise ValidationError("elapsed-time grids must cover [0, T - h_t]")
    else:
        internal = t
        if abs(t[0] - h) > 1e-9 * h:
            raise ValidationError(
                "remaining-time grids must start at t0 = h_t (the source is singular at 0)")
    n_t = internal.size
    mats = [_operator_matrix(problem, u, y) for u in range(problem.n_controls)]
    dmax = max(float(np.max(-np.diag(A))) for A in mats)
    if h ** problem.beta * dmax > problem.beta * (1.0 + 1e-12):
        admissible = (problem.beta / dmax) ** (1.0 / problem.beta)
        raise StabilityError(
            f"explicit step h_t={h:.3g} violates the stability bound; "
            f"largest admissible step is {admissible:.6g}")
    w = gl_weights(problem.beta, n_t)
    s0 = np.asarray(problem.terminal(y), dtype=float)
    V = np.zeros((n_t + 1, y.size))
    cur = s0.copy()
    hb = h ** problem.beta
    for n in range(1, n_t + 1):
        t_n = internal[n - 1]
        native_t = (problem.horizon - t_n) if elapsed else t_n
        rewards = _reward_stack(problem, y, native_t, t_n)
        phi = np.maximum.reduce([mats[u] @ cur + rewards[u]
                                 for u in range(problem.n_controls)])
        hist = np.tensordot(w[1:n + 1], V[n - 1::-1][:n], axes=(0, 0))
        V[n] = hb * phi - hist
        cur = s0 + V[n]
    values = s0[None, :] + V[1:]
    if elapsed:
        values = values[::-1]
    return GridFunction(t, y, values)


def fhjb_residual(problem: FhjbProblem, S: GridFunction, form: str = "rl",
                  time_margin: float = 0.0) -> float:
    """Max-norm residual of the stated limiting equation on the grid.

    ``form='rl'`` evaluates the nonlocal time term with
    ``dual_generator_form`` on the zero-extended time axis (the equation as
    boxed); ``form='caputo'`` uses the Caputo derivative anchored at the
    first node instead.  The two residuals differ exactly by the
    discretized boundary term S(t0, y)(t - t0)^{-beta}/Gamma(1-beta).

    Nodes with t below ``time_margin`` are excluded from the max; the first
    node itself is evaluable only where the value vanishes (the zero
    extension makes the operator singular there) and is skipped otherwise.
    """
    if form not in ("rl", "caputo"):
        raise ValidationError("form must be 'rl' or 'caputo'")
    grid_t, y = S.t_nodes, S.y_nodes
    h = float(grid_t[1] - grid_t[0])
    elapsed = problem.direction == DIRECTION_ELAPSED
    order = FracOrder(problem.beta)
    if elapsed:
        internal_t = np.sort(float(problem.horizon) - grid_t)
        vals = S.values[::-1]
    else:
        internal_t = grid_t
        vals = S.values
    s0 = np.asarray(problem.terminal(y), dtype=float)
    mats = [_operator_matrix(problem, u, y) for u in range(problem.n_controls)]
    n_t = internal_t.size
    worst = 0.0
    source_coeff = 1.0 / gamma(1.0 - problem.beta)
    t0 = float(internal_t[0])
    columns = [SampledFunction(a=t0, b=float(internal_t[-1]), h=h, values=vals[:, j],
                               decay_model=frac_calc.DECAY_ZERO)
               for j in range(y.size)]
    for i in range(n_t):
        t_i = float(internal_t[i])
        if t_i < time_margin:
            continue
        native_t = (problem.horizon - t_i) if elapsed else t_i
        rewards = _reward_stack(problem, y, native_t, t_i)
        sup_term = np.maximum.reduce([mats[u] @ vals[i] + rewards[u]
                                      for u in range(problem.n_controls)])
        source = t_i ** (-problem.beta) * source_coeff * s0
        if i == 0:
            # dual operator on the zero-extension is singular at the window
            # edge unless the value vanishes there; only those nodes count
            mask = vals[0] == 0.0
            if mask.any():
                worst = max(worst, float(np.max(np.abs((source + sup_term)[mask]))))
            continue
        nonlocal_term = np.array([dual_generator_form(columns[j], order, t_i)
                                  for j in range(y.size)])
        if form == "caputo":
            nonlocal_term = nonlocal_term + vals[0] * (t_i - t0) ** (-problem.beta) \
                * source_coeff
        worst = max(worst, float(np.max(np.abs(source + sup_term + nonlocal_term))))
    return worst


# ---------------------------------------------------------------------------
# Pairing with a CTRW model
# ---------------------------------------------------------------------------

def derive_problem(model: ModelSpec) -> FhjbProblem:
    """Limiting problem matched to a model through the shared normalization.

    Gaussian jumps of std sigma pair with stable scale sigma^2 at alpha = 2
    (the limit is (sigma^2/2) d^2/dy^2); symmetric Pareto tails of scale c
    pair with alpha * c / 2.  Jump rewards become their expectation under
    the unscaled law; the waiting reward passes through unchanged.
    """
    controls = []
    for u in range(model.n_controls):
        law = model.jumps_per_control[u]
        scale = law.limit_generator_scale()
        drift = diffusion = None
        if model.inner_motion is not None:
            im = model.inner_motion
            drift = (lambda yy, _u=u, _d=im.drift: np.asarray(
                [_d(_u, v) for v in np.atleast_1d(yy)], dtype=float))
            diffusion = (lambda yy, _u=u, _d=im.diffusion: np.asarray(
                [_d(_u, v) for v in np.atleast_1d(yy)], dtype=float))
        controls.append(ControlGenerator(stable_scale=scale, drift=drift,
                                         diffusion=diffusion))
    F = None
    if model.jump_reward is not None:
        if model.alpha >= 2.0:
            seconds = [law.second_moment() for law in model.jumps_per_control]

            def F(u, yy, _seconds=seconds):
                # order-2 homogeneity: f(u,y,xi) = xi^2 * f(u,y,sign(xi));
                # symmetric laws split E[xi^2] evenly between the half-lines
                yy = np.asarray(yy, dtype=float)
                even = 0.5 * (np.asarray(model.jump_reward(u, yy, 1.0), dtype=float)
                              + np.asarray(model.jump_reward(u, yy, -1.0), dtype=float))
                return even * _seconds[u]
        else:
            raise ConfigurationError(
                "alpha-homogeneous jump rewards do not integrate against "
                "exact power tails with alpha < 2; no limit density exists")
    return FhjbProblem(
        beta=model.waiting.beta,
        alpha=model.alpha,
        controls=tuple(controls),
        terminal=model.terminal,
        jump_reward_density=F,
        waiting_reward=model.waiting_reward,
        direction=model.direction,
        horizon=model.horizon,
    )
