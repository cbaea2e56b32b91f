"""Seeded samplers for heavy-tailed waiting times and stable-domain jumps.

The waiting law is an exact Pareto tail t^{-beta}/Gamma(1-beta) spliced
with a uniform density on [0, t0], where t0 is fixed by continuity and
total mass one:

    t0 = ((1+beta)/Gamma(1-beta))^(1/beta).

Only the tail matters for the scaling limit, and making it exact pins the
limiting subordinator normalization (Laplace exponent s^beta), which the
solvers and the convergence harness rely on.

Jumps are either Gaussian (the finite-variance alpha = 2 branch) or
symmetric Pareto with exact two-sided tail scale * n^{-alpha} (domain of
attraction of a symmetric alpha-stable law; exact stable sampling is a
non-goal).  Discrete and deterministic stub laws used by tests and the
brute-force dynamic-programming oracle share the same small interface:
``tail``/``mass_at_least``/``point_mass``/``truncated_mean``/``sample``.

Randomness is counter-based (Philox keyed by (seed, counter)), so a given
(seed, counter) pair always reproduces the same stream and distinct
counters give independent streams for parallel path simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPathError, ValidationError

gamma = math.gamma


@dataclass(frozen=True)
class RngState:
    """Counter-based RNG state: (seed, counter) fully determines the stream."""

    seed: int
    counter: int = 0

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValidationError("seed must fit in 64 bits")
        if int(self.counter) < 0:
            raise ValidationError("counter must be non-negative")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[int(self.seed), int(self.counter)]))

    def stream(self, k: int) -> "RngState":
        """Sub-stream k of this state (used per path index)."""
        return RngState(self.seed, self.counter + k)


# ---------------------------------------------------------------------------
# Waiting-time laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WaitingLaw:
    """Heavy-tailed waiting law with exact Pareto tail beyond the cutoff t0."""

    beta: float

    def __post_init__(self):
        if not (0.0 < self.beta < 1.0):
            raise ValidationError(f"waiting tail index must lie in (0,1), got {self.beta}")

    @property
    def t0(self) -> float:
        return ((1.0 + self.beta) / gamma(1.0 - self.beta)) ** (1.0 / self.beta)

    @property
    def uniform_density(self) -> float:
        return self.beta / ((1.0 + self.beta) * self.t0)

    def tail(self, s):
        """P(gamma > s); equals s^{-beta}/Gamma(1-beta) exactly for s >= t0."""
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            pareto = np.where(s > 0, s, 1.0) ** (-self.beta) / gamma(1.0 - self.beta)
        out = np.where(s <= self.t0, 1.0 - self.uniform_density * s, pareto)
        out = np.where(s <= 0.0, 1.0, out)
        return out if out.ndim else float(out)

    def mass_above(self, s) -> float:
        return self.tail(s)

    def mass_at_least(self, s):
        return self.tail(s)  # continuous law

    def point_mass(self, s) -> float:
        return 0.0

    def truncated_mean(self, s):
        """E[min(gamma, s)] = int_0^s tail(r) dr, in closed form."""
        s = np.asarray(s, dtype=float)
        s_pos = np.maximum(s, 0.0)
        core = np.minimum(s_pos, self.t0)
        m = core - 0.5 * self.uniform_density * core ** 2
        capped = np.maximum(s_pos, self.t0)
        tail_part = np.where(
            s_pos > self.t0,
            (capped ** (1.0 - self.beta) - self.t0 ** (1.0 - self.beta))
            / ((1.0 - self.beta) * gamma(1.0 - self.beta)),
            0.0,
        )
        out = m + tail_part
        return out if out.ndim else float(out)

    def partial_mean(self, lo, hi):
        """int_{[lo,hi)} r dF = [m(s) - s*tail(s)] evaluated between lo and hi."""
        def g(s):
            return self.truncated_mean(s) - np.asarray(s, dtype=float) * self.tail(s)
        out = g(hi) - g(lo)
        return out if np.ndim(out) else float(out)

    def quantile_from_tail(self, u):
        """The unique t with tail(t) = u, for u in (0, 1)."""
        u = np.asarray(u, dtype=float)
        tail_at_t0 = 1.0 / (1.0 + self.beta)
        pareto = (np.maximum(u, 1e-300) * gamma(1.0 - self.beta)) ** (-1.0 / self.beta)
        core = (1.0 - u) / self.uniform_density
        out = np.where(u <= tail_at_t0, pareto, core)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.uniform(0.0, 1.0, size)
        return self.quantile_from_tail(u)


@dataclass(frozen=True)
class DeterministicWaitingLaw:
    """Stub law: every wait equals ``wait`` exactly."""

    wait: float

    def __post_init__(self):
        if not self.wait > 0:
            raise ValidationError("wait must be positive")

    def tail(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s < self.wait, 1.0, 0.0)
        return out if out.ndim else float(out)

    mass_above = tail

    def mass_at_least(self, s):
        s = np.asarray(s, dtype=float)
        out = np.where(s <= self.wait, 1.0, 0.0)
        return out if out.ndim else float(out)

    def point_mass(self, s) -> float:
        return 1.0 if s == self.wait else 0.0

    def truncated_mean(self, s):
        s = np.asarray(s, dtype=float)
        out = np.minimum(np.maximum(s, 0.0), self.wait)
        return out if out.ndim else float(out)

    def partial_mean(self, lo, hi) -> float:
        return self.wait if lo <= self.wait < hi else 0.0

    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return self.wait
        return np.full(size, self.wait)


@dataclass(frozen=True)
class DiscreteWaitingLaw:
    """Stub law with atoms [(r_k, p_k)] plus optional mass beyond every horizon."""

    atoms: tuple
    mass_beyond: float = 0.0

    def __post_init__(self):
        atoms = tuple((float(r), float(p)) for r, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if any(r <= 0 or p < 0 for r, p in atoms):
            raise ValidationError("atoms need positive support and non-negative mass")
        total = sum(p for _, p in atoms) + self.mass_beyond
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"atom masses plus mass_beyond must sum to 1, got {total}")

    def tail(self, s):
        s_arr = np.asarray(s, dtype=float)
        out = np.full(s_arr.shape, self.mass_beyond)
        for r, p in self.atoms:
            out = out + p * (s_arr < r)
        return out if out.ndim else float(out)

    mass_above = tail

    def mass_at_least(self, s):
        s_arr = np.asarray(s, dtype=float)
        out = np.full(s_arr.shape, self.mass_beyond)
        for r, p in self.atoms:
            out = out + p * (s_arr <= r)
        return out if out.ndim else float(out)

    def point_mass(self, s) -> float:
        return sum(p for r, p in self.atoms if r == s)

    def truncated_mean(self, s):
        s_arr = np.asarray(s, dtype=float)
        out = self.mass_beyond * np.maximum(s_arr, 0.0)
        for r, p in self.atoms:
            out = out + p * np.minimum(np.maximum(s_arr, 0.0), r)
        return out if out.ndim else float(out)

    def partial_mean(self, lo, hi) -> float:
        return sum(r * p for r, p in self.atoms if lo <= r < hi)

    def sample(self, rng: np.random.Generator, size=None):
        rs = np.array([r for r, _ in self.atoms] + [np.inf])
        ps = np.array([p for _, p in self.atoms] + [self.mass_beyond])
        idx = rng.choice(len(rs), size=size, p=ps / ps.sum())
        return rs[idx]


class ScaledWaitingLaw:
    """Law of gamma * factor for a base waiting law (factor = tau^{1/beta})."""

    def __init__(self, base, factor: float):
        if not factor > 0:
            raise ValidationError("scale factor must be positive")
        self.base = base
        self.factor = factor

    def tail(self, s):
        return self.base.tail(np.asarray(s, dtype=float) / self.factor)

    mass_above = tail

    def mass_at_least(self, s):
        return self.base.mass_at_least(np.asarray(s, dtype=float) / self.factor)

    def point_mass(self, s) -> float:
        return self.base.point_mass(s / self.factor)

    def truncated_mean(self, s):
        return self.factor * self.base.truncated_mean(np.asarray(s, dtype=float) / self.factor)

    def partial_mean(self, lo, hi):
        return self.factor * self.base.partial_mean(lo / self.factor, hi / self.factor)

    def sample(self, rng: np.random.Generator, size=None):
        return self.factor * self.base.sample(rng, size)


# ---------------------------------------------------------------------------
# Jump laws
# ---------------------------------------------------------------------------

KIND_GAUSSIAN = "gaussian"
KIND_PARETO = "symmetric-pareto"


def _norm_cdf(x):
    return 0.5 * (1.0 + np.vectorize(math.erf)(np.asarray(x, dtype=float) / math.sqrt(2.0)))


@dataclass(frozen=True)
class JumpLaw:
    """Jump-size law: Gaussian at alpha = 2, symmetric Pareto for alpha < 2.

    For the Pareto kind the two-sided tail is exactly scale * n^{-alpha}
    beyond n1 = ((1+alpha)*scale)^{1/alpha}, split equally between the two
    half-lines, with a uniform core on [-n1, n1] fixed by continuity.
    """

    alpha: float
    kind: str
    scale: float
    mean_shift: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValidationError(f"jump stability index must lie in (0,2], got {self.alpha}")
        if self.kind == KIND_GAUSSIAN:
            if self.alpha != 2.0:
                raise ValidationError("gaussian jumps require alpha = 2")
            if self.scale < 0:
                raise ValidationError("gaussian scale must be >= 0")
        elif self.kind == KIND_PARETO:
            if not self.alpha < 2.0:
                raise ValidationError("symmetric-pareto jumps require alpha < 2")
            if not self.scale > 0:
                raise ValidationError("pareto tail scale must be positive")
            if self.mean_shift != 0.0:
                raise ValidationError("pareto jumps are symmetric; mean_shift must be 0")
        else:
            raise ValidationError(f"unknown jump kind {self.kind!r}")

    # -- pareto geometry
    @property
    def core_radius(self) -> float:
        return ((1.0 + self.alpha) * self.scale) ** (1.0 / self.alpha)

    @property
    def core_density(self) -> float:
        """Uniform density on [-n1, n1]; continuity at n1 fixes it."""
        return self.alpha / (2.0 * (1.0 + self.alpha) * self.core_radius)

    def two_sided_tail(self, n):
        """P(|xi| > n)."""
        n = np.asarray(n, dtype=float)
        if self.kind == KIND_GAUSSIAN:
            if self.scale == 0.0:
                return np.where(n >= abs(self.mean_shift), 0.0, 1.0)
            z_hi = (n - self.mean_shift) / self.scale
            z_lo = (-n - self.mean_shift) / self.scale
            return 1.0 - _norm_cdf(z_hi) + _norm_cdf(z_lo)
        n1 = self.core_radius
        inside = 1.0 - 2.0 * self.core_density * np.maximum(n, 0.0)
        with np.errstate(divide="ignore"):
            outside = self.scale * np.where(n > 0, n, 1.0) ** (-self.alpha)
        return np.where(n <= n1, inside, outside)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == KIND_GAUSSIAN:
            if self.scale == 0.0:
                return np.where(x >= self.mean_shift, 1.0, 0.0)
            return _norm_cdf((x - self.mean_shift) / self.scale)
        n1 = self.core_radius
        # one-sided tail P(xi > x) = 0.5*scale*x^{-alpha} for x >= n1
        out = np.empty_like(x, dtype=float)
        hi = x >= n1
        lo = x <= -n1
        mid = ~hi & ~lo
        with np.errstate(divide="ignore"):
            out[hi] = 1.0 - 0.5 * self.scale * np.where(x[hi] > 0, x[hi], 1.0) ** (-self.alpha)
            out[lo] = 0.5 * self.scale * np.abs(np.where(x[lo] < 0, x[lo], -1.0)) ** (-self.alpha)
        out[mid] = 0.5 + self.core_density * x[mid]
        return out if out.ndim else float(out)

    def mean(self) -> float:
        if self.kind == KIND_GAUSSIAN:
            return self.mean_shift
        return 0.0

    def second_moment(self) -> float | None:
        """E[xi^2]; None when infinite (pareto alpha < 2)."""
        if self.kind == KIND_GAUSSIAN:
            return self.scale ** 2 + self.mean_shift ** 2
        return None

    def tail_radius(self, eps: float) -> float:
        """Radius R with P(|xi| > R) <= eps."""
        if self.kind == KIND_GAUSSIAN:
            if self.scale == 0.0:
                return abs(self.mean_shift)
            # invert the two-sided normal tail by bisection on a safe bracket
            lo_r, hi_r = 0.0, 40.0 * self.scale + abs(self.mean_shift) + 1.0
            for _ in range(200):
                mid = 0.5 * (lo_r + hi_r)
                if self.two_sided_tail(mid) > eps:
                    lo_r = mid
                else:
                    hi_r = mid
            return hi_r
        return max((self.scale / eps) ** (1.0 / self.alpha), self.core_radius)

    def limit_generator_scale(self) -> float:
        """Constant pairing this law with the limiting spatial generator.

        alpha = 2: the limit is (v/2) d^2/dy^2 with v = E[xi^2]; requires a
        centered law.  alpha < 2: the limit is
        scale_out * int (f(y+r) - f(y) - comp) |r|^{-1-alpha} dr with
        scale_out = alpha * scale / 2.
        """
        if self.kind == KIND_GAUSSIAN:
            if self.mean_shift != 0.0:
                raise ValidationError(
                    "mean-shifted gaussian jumps have no tau -> 0 limit; center the law")
            return self.scale ** 2
        return 0.5 * self.alpha * self.scale

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == KIND_GAUSSIAN:
            if self.scale == 0.0:
                return (self.mean_shift if size is None
                        else np.full(size, self.mean_shift))
            return rng.normal(self.mean_shift, self.scale, size)
        scalar = size is None
        n = 1 if scalar else int(np.prod(size))
        u = rng.uniform(0.0, 1.0, n)       # two-sided tail level for |xi|
        sign = np.where(rng.uniform(0.0, 1.0, n) < 0.5, -1.0, 1.0)
        tail_at_n1 = 1.0 / (1.0 + self.alpha)  # P(|xi| > n1) = scale*n1^{-alpha}
        mag = np.where(
            u <= tail_at_n1,
            (np.maximum(u, 1e-300) / self.scale) ** (-1.0 / self.alpha),
            (1.0 - u) / (2.0 * self.core_density),
        )
        out = sign * mag
        if scalar:
            return float(out[0])
        return out.reshape(size)


@dataclass(frozen=True)
class DiscreteJumpLaw:
    """Stub jump law with atoms [(displacement, mass)]."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(x), float(p)) for x, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if any(p < 0 for _, p in atoms):
            raise ValidationError("atom masses must be non-negative")
        if abs(sum(p for _, p in atoms) - 1.0) > 1e-12:
            raise ValidationError("atom masses must sum to 1")

    def mean(self) -> float:
        return sum(x * p for x, p in self.atoms)

    def second_moment(self) -> float:
        return sum(x * x * p for x, p in self.atoms)

    def tail_radius(self, eps: float) -> float:
        return max(abs(x) for x, _ in self.atoms)

    def sample(self, rng: np.random.Generator, size=None):
        xs = np.array([x for x, _ in self.atoms])
        ps = np.array([p for _, p in self.atoms])
        idx = rng.choice(len(xs), size=size, p=ps / ps.sum())
        return xs[idx]


# ---------------------------------------------------------------------------
# Sampler entry points and the counting process
# ---------------------------------------------------------------------------

def sample_waiting(law, rng: RngState, size=None):
    """Draw waiting time(s) by CDF inversion; pure in (law, rng)."""
    return law.sample(rng.generator(), size)


def sample_jump(law, rng: RngState, size=None):
    """Draw jump size(s); pure in (law, rng)."""
    return law.sample(rng.generator(), size)


def counting_process(waits, t: float) -> int:
    """Smallest n with gamma_1 + ... + gamma_n >= t; 0 for t <= 0.

    The inf over n >= 0 with an empty sum at n = 0 makes t = 0 return 0.
    """
    if t <= 0:
        return 0
    waits = np.asarray(waits, dtype=float)
    if waits.size and np.any(waits <= 0):
        raise ValidationError("waits must be positive")
    cum = np.cumsum(waits)
    idx = int(np.searchsorted(cum, t, side="left"))
    if idx >= waits.size and (waits.size == 0 or cum[-1] < t):
        raise InsufficientPathError(
            f"cumulative waits reach {cum[-1] if waits.size else 0.0} < t={t}")
    return idx + 1
