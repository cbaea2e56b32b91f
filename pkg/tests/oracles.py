"""Independent reference computations used to pin expected test values.

Everything here is deliberately built on different machinery than the
package: adaptive quadrature for the singular integrals, a direct stable
sampler for the inverse time change, and exhaustive enumeration for the
discrete dynamic program.
"""

import itertools
import math

import numpy as np
from scipy import integrate


def caputo_left_quad(df, a, x, beta):
    """Adaptive quadrature of the defining integral with f' supplied."""
    val, _ = integrate.quad(df, a, x, weight="alg", wvar=(0.0, -beta), limit=200)
    return val / math.gamma(1.0 - beta)


def caputo_right_quad(df, x, b, beta):
    val, _ = integrate.quad(df, x, b, weight="alg", wvar=(-beta, 0.0), limit=200)
    return -val / math.gamma(1.0 - beta)


def rl_left_quad(f, df, a, x, beta):
    return caputo_left_quad(df, a, x, beta) \
        + f(a) * (x - a) ** (-beta) / math.gamma(1.0 - beta)


def rl_right_quad(f, df, x, b, beta):
    return caputo_right_quad(df, x, b, beta) \
        + f(b) * (b - x) ** (-beta) / math.gamma(1.0 - beta)


def generator_form_quad(f, x, beta, support_lo=0.0):
    """Brute-force quadrature of the descending increment integral.

    Assumes f vanishes below ``support_lo`` (zero extension), so the tail
    beyond x - support_lo is analytic.
    """
    fx = f(x)

    def integrand(yv):
        return (f(x - yv) - fx) * yv ** (-1.0 - beta)

    reach = x - support_lo
    val, _ = integrate.quad(integrand, 0.0, reach, limit=400,
                            points=[reach / 2.0])
    tail = (0.0 - fx) * reach ** (-beta) / beta
    return (val + tail) / math.gamma(-beta)


def a_beta_quad(f, x, beta, support_hi):
    """Brute-force quadrature of the ascending increment integral."""
    fx = f(x)

    def integrand(yv):
        return (f(x + yv) - fx) * yv ** (-1.0 - beta)

    reach = support_hi - x
    val, _ = integrate.quad(integrand, 0.0, reach, limit=400)
    tail = (0.0 - fx) * reach ** (-beta) / beta
    return -(val + tail) / math.gamma(-beta)


def kanter_inverse_stable_mean(beta, t, n, seed):
    """Monte Carlo of E[E_t] for the inverse of the standard beta-stable
    subordinator (Laplace exponent s^beta), via Kanter's representation:
    X_1 = (a(U)/E)^{(1-beta)/beta} and E_t =d (t / X_1)^beta.
    """
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, n)
    e = rng.exponential(1.0, n)
    a = (np.sin(beta * math.pi * u) ** beta
         * np.sin((1.0 - beta) * math.pi * u) ** (1.0 - beta)
         / np.sin(math.pi * u)) ** (1.0 / (1.0 - beta))
    stable = (a / e) ** ((1.0 - beta) / beta)
    samples = (t / stable) ** beta
    return float(np.mean(samples)), float(np.std(samples) / math.sqrt(n))


def enumerate_discrete_dp(t_nodes, y_nodes, waiting_atoms, mass_beyond,
                          jump_atom_sets, terminal, jump_reward=None,
                          waiting_reward=None):
    """Optimal value by exhaustive enumeration over all feedback policies.

    Laws are discrete with renewal atoms on the time grid and jump atoms on
    grid offsets; positions clip at the window edges (constant
    extrapolation).  Returns the pointwise max over policies.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    y_nodes = np.asarray(y_nodes, dtype=float)
    n_t, n_y = t_nodes.size, y_nodes.size
    n_u = len(jump_atom_sets)
    h_y = y_nodes[1] - y_nodes[0]

    def tail_above(t):
        return mass_beyond + sum(p for r, p in waiting_atoms if r > t)

    def value_for(policy):
        V = np.empty((n_t, n_y))
        V[0] = [terminal(y) for y in y_nodes]
        for i in range(1, n_t):
            t = t_nodes[i]
            for j, y in enumerate(y_nodes):
                u = policy[i, j]
                acc = terminal(y) * tail_above(t)
                if waiting_reward is not None:
                    g = waiting_reward(u, t, y)
                    acc += g * t * tail_above(t)
                    acc += g * sum(r * p for r, p in waiting_atoms if r <= t)
                for r, pr in waiting_atoms:
                    if r > t:
                        continue
                    i_tgt = int(round((t - r) / (t_nodes[1] - t_nodes[0])))
                    for xi, px in jump_atom_sets[u]:
                        jj = int(np.clip(round((y + xi - y_nodes[0]) / h_y), 0, n_y - 1))
                        contrib = V[i_tgt, jj]
                        if jump_reward is not None:
                            contrib += jump_reward(u, y, xi)
                        acc += pr * px * contrib
                V[i, j] = acc
        return V

    best = np.full((n_t, n_y), -np.inf)
    for bits in itertools.product(range(n_u), repeat=n_t * n_y):
        policy = np.array(bits).reshape(n_t, n_y)
        best = np.maximum(best, value_for(policy))
    return best
