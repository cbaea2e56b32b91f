"""Seeded randomized model corpus shared by property tests and acceptance."""

import numpy as np

from ctrwlab.ctrw_sim import ModelSpec
from ctrwlab.dp_solver import GridFunction
from ctrwlab.stable_rng import JumpLaw, WaitingLaw

TERMINALS = [
    lambda y: np.asarray(y, float) ** 2,
    lambda y: np.abs(np.asarray(y, float)),
    lambda y: np.cos(np.asarray(y, float)),
    lambda y: np.exp(-np.asarray(y, float) ** 2),
    lambda y: np.asarray(y, float) ** 2 + np.sin(np.asarray(y, float)),
]


def random_model(k: int, with_rewards: bool = False):
    """Model k of the fixed corpus: |U| = 2, gaussian jumps, beta varied."""
    rng = np.random.default_rng(1000 + k)
    beta = float(rng.uniform(0.35, 0.75))
    scales = sorted(float(rng.uniform(0.4, 1.8)) for _ in range(2))
    jump_reward = None
    waiting_reward = None
    if with_rewards:
        coeffs = [float(rng.uniform(0.0, 0.4)) for _ in range(2)]
        jump_reward = (lambda u, y, xi, _c=coeffs:
                       _c[u] * xi ** 2 * np.ones_like(np.asarray(y, float)))
        g_vals = [float(rng.uniform(0.0, 0.3)) for _ in range(2)]
        waiting_reward = (lambda u, t, y, _g=g_vals:
                          _g[u] * np.ones_like(np.asarray(y, float)))
    model = ModelSpec(
        waiting=WaitingLaw(beta=beta),
        jumps_per_control=(JumpLaw(2.0, "gaussian", scales[0]),
                           JumpLaw(2.0, "gaussian", scales[1])),
        controls=("a", "b"),
        terminal=TERMINALS[k % len(TERMINALS)],
        alpha=2.0,
        jump_reward=jump_reward,
        waiting_reward=waiting_reward,
        tau=0.1,
        horizon=1.0,
    )
    return model


def corpus_grid() -> GridFunction:
    return GridFunction.template(1.0, 40, -5.0, 5.0, 21)


def stable_fhjb_grid(beta: float, sigma_max: float, t_max: float = 1.0,
                     n_t: int = 40, y_half: float = 5.0):
    """Limit-solver grid whose spacing satisfies the explicit stability bound."""
    h_t = t_max / n_t
    h_min = sigma_max / np.sqrt(beta * h_t ** (-beta)) * 1.05
    n_y = max(5, int(2 * y_half / h_min) + 1)
    if n_y % 2 == 0:
        n_y -= 1  # keep y = 0 on the grid
    t = np.linspace(h_t, t_max, n_t)
    y = np.linspace(-y_half, y_half, n_y)
    return GridFunction(t, y, np.zeros((t.size, y.size)))
