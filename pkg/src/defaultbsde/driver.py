"""BSDE drivers and their pointwise minimization over a compact strategy set.

Per-strategy linear driver (the generator of the per-strategy value process):

    f_pi = (gamma^2/2) pi^2 sigma^2 y - gamma pi (mu y + sigma z)
           - lam (1 - exp(-gamma pi beta)) (y + u)

The value-function driver is the infimum of f_pi over pi in C = [lo, hi].
On the domain y > 0, y + u >= 0 the map pi -> f_pi is strictly convex
(d2f/dpi2 = gamma^2 sigma^2 y + lam gamma^2 beta^2 e^{-gamma pi beta}(y+u)),
so the argmin is unique and a safeguarded Newton iteration on df/dpi with a
bisection fallback converges with a guaranteed bracket.

After the change of variables y = (1/gamma) log Y, z = Z/(gamma Y),
u = (1/gamma) log(1 + U/Y), the same infimum becomes the quadratic driver

    g = inf_pi { (gamma/2) |pi sigma - (z + theta/gamma)|^2 + |u - pi beta|_g }
        - theta z - theta^2 / (2 gamma),
    theta = (mu + lam beta) / sigma,
    |v|_g = lam (exp(gamma v) - 1 - gamma v) / gamma,

and the two are linked by f_min(y, z, u) = gamma * y * g(z/(gamma y),
(1/gamma) log(1 + u/y)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CoeffSnapshot",
    "StrategySet",
    "f_pi",
    "minimize_driver",
    "minimize_driver_grid",
    "g_quadratic",
    "lipschitz_bound",
    "jump_comparison_bounds",
]

# absolute argmin tolerance is ARGMIN_TOL * (1 + hi - lo)
ARGMIN_TOL = 1e-10
_MAX_ITER = 200


@dataclass(frozen=True)
class CoeffSnapshot:
    """Coefficient values frozen at one (time, regime) point."""

    mu: float
    sigma: float
    lam: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not self.beta > -1:
            raise ValueError("beta must exceed -1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")


@dataclass(frozen=True)
class StrategySet:
    """Compact strategy interval C = [lo, hi]."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("strategy bounds must be finite")
        if self.lo > self.hi:
            raise ValueError("lo must not exceed hi")

    @classmethod
    def symmetric(cls, k: float) -> "StrategySet":
        return cls(-abs(k), abs(k))

    @property
    def width(self) -> float:
        return self.hi - self.lo


def f_pi(c: CoeffSnapshot, pi, y, z, u):
    """Per-strategy linear driver; vectorizes over any argument."""
    g = c.gamma
    with np.errstate(over="ignore"):
        jump = c.lam * (1.0 - np.exp(-g * pi * c.beta)) * (y + u)
    return 0.5 * g * g * pi * pi * c.sigma ** 2 * y - g * pi * (c.mu * y + c.sigma * z) - jump


def _newton_argmin(d1, d2, lo: float, hi: float, tol: float, x0) -> np.ndarray:
    """Vectorized safeguarded Newton for the root of an increasing d1 on [lo, hi].

    d1 must be strictly increasing with d1(lo) < 0 < d1(hi) elementwise;
    callers clip out the boundary cases first.
    """
    lo_b = np.full_like(x0, lo)
    hi_b = np.full_like(x0, hi)
    x = np.clip(x0, lo_b, hi_b)
    for _ in range(_MAX_ITER):
        with np.errstate(over="ignore", invalid="ignore"):
            d = d1(x)
            lo_b = np.where(d <= 0.0, x, lo_b)
            hi_b = np.where(d > 0.0, x, hi_b)
            step = d / d2(x)
            cand = x - step
        mid = 0.5 * (lo_b + hi_b)
        good = np.isfinite(cand) & (cand > lo_b) & (cand < hi_b) & (cand != x)
        x = np.where(good, cand, mid)
        if float(np.max(hi_b - lo_b)) < tol:
            break
    return x


def minimize_driver_grid(c: CoeffSnapshot, strat: StrategySet, y, z, u):
    """Vectorized constrained infimum of f_pi; returns (f_min, pi_star) arrays.

    Inputs are normalized by y before minimizing, which makes positive
    homogeneity of degree one exact up to rounding:
    f_min(t y, t z, t u) = t f_min(y, z, u) with the same argmin.
    """
    y, z, u = np.broadcast_arrays(np.asarray(y, dtype=float),
                                  np.asarray(z, dtype=float),
                                  np.asarray(u, dtype=float))
    if np.any(y <= 0.0):
        raise ValueError("driver minimization requires y > 0")
    if np.any(y + u < 0.0):
        raise ValueError("driver minimization requires y + u >= 0")

    zn = z / y
    un = u / y
    g, sig, lam, beta = c.gamma, c.sigma, c.lam, c.beta
    lo, hi = strat.lo, strat.hi
    tol = ARGMIN_TOL * (1.0 + strat.width)

    vertex = (c.mu + sig * zn) / (g * sig * sig)
    jump_w = lam * beta * (1.0 + un)          # weight of the jump term in d1
    pi = np.clip(vertex, lo, hi)              # exact for nodes without jump term

    active = jump_w != 0.0
    if np.any(active):
        zn_a = zn[active]
        w_a = jump_w[active]

        def d1(x):
            return (g * g * sig * sig * x - g * (c.mu + sig * zn_a)
                    - g * w_a * np.exp(-g * x * beta))

        def d2(x):
            return g * g * sig * sig + g * g * beta * w_a * np.exp(-g * x * beta)

        with np.errstate(over="ignore", invalid="ignore"):
            at_lo = d1(np.full(w_a.shape, float(lo))) >= 0.0
            at_hi = d1(np.full(w_a.shape, float(hi))) <= 0.0
        sol = np.where(at_lo, lo, np.where(at_hi, hi, 0.0))
        interior = ~(at_lo | at_hi)
        if np.any(interior):
            x0 = pi[active][interior].astype(float)
            zi = zn_a[interior]
            wi = w_a[interior]

            def d1_i(x):
                return (g * g * sig * sig * x - g * (c.mu + sig * zi)
                        - g * wi * np.exp(-g * x * beta))

            def d2_i(x):
                return g * g * sig * sig + g * g * beta * wi * np.exp(-g * x * beta)

            sol[interior] = _newton_argmin(d1_i, d2_i, lo, hi, tol, x0)
        pi = pi.copy()
        pi[active] = sol

    f_min = y * f_pi(c, pi, 1.0, zn, un)
    return f_min, pi


def minimize_driver(c: CoeffSnapshot, strat: StrategySet, y: float, z: float,
                    u: float) -> tuple[float, float]:
    """Constrained infimum of f_pi over pi in [lo, hi] and its argmin.

    Requires y > 0 and y + u >= 0 (the domain where the value function lives;
    a violation signals an out-of-domain solver iterate).  The argmin is
    accurate to 1e-10 * (1 + hi - lo); under strict convexity it is unique,
    and in the degenerate width-zero set it is the single point (ties toward
    the smallest |pi| never arise otherwise).
    """
    f, p = minimize_driver_grid(c, strat, np.atleast_1d(float(y)),
                                np.atleast_1d(float(z)), np.atleast_1d(float(u)))
    return float(f[0]), float(p[0])


def g_quadratic(c: CoeffSnapshot, strat: StrategySet, z: float, u: float) -> float:
    """Quadratic driver after the log change of variables.

    Minimizes (gamma/2)(pi sigma - a)^2 + |u - pi beta|_g over [lo, hi] with
    a = z + theta/gamma, theta = (mu + lam beta)/sigma, then subtracts
    theta z + theta^2/(2 gamma).
    """
    g, sig, lam, beta = c.gamma, c.sigma, c.lam, c.beta
    theta = (c.mu + lam * beta) / sig
    a = z + theta / g
    lo, hi = strat.lo, strat.hi
    tol = ARGMIN_TOL * (1.0 + strat.width)

    if lam * beta == 0.0:
        pi = min(max(a / sig, lo), hi)
    else:
        def d1(x):
            return g * sig * (x * sig - a) - lam * beta * (np.exp(g * (u - x * beta)) - 1.0)

        def d2(x):
            return g * sig * sig + lam * g * beta * beta * np.exp(g * (u - x * beta))

        with np.errstate(over="ignore"):
            if d1(np.float64(lo)) >= 0.0:
                pi = lo
            elif d1(np.float64(hi)) <= 0.0:
                pi = hi
            else:
                x0 = np.atleast_1d(np.clip(a / sig, lo, hi))
                pi = float(_newton_argmin(d1, d2, lo, hi, tol, x0)[0])

    v = u - pi * beta
    penalty = 0.5 * g * (pi * sig - a) ** 2 + lam * (math.exp(g * v) - 1.0 - g * v) / g
    return penalty - theta * z - theta * theta / (2.0 * g)


def _jump_size_bound(c: CoeffSnapshot, pi: float) -> float:
    return c.lam * abs(1.0 - math.exp(-c.gamma * pi * c.beta))


def lipschitz_bound(c: CoeffSnapshot, strat: StrategySet) -> float:
    """Lipschitz constant of the infimum driver in (y, z, u), l1 norm.

    The infimum of affine functions inherits the largest coefficient bound;
    each partial coefficient of f_pi is maximized at an endpoint of [lo, hi]
    since all three are V-shaped in pi with minimum at 0.
    """
    g = c.gamma
    best = 0.0
    for pi in (strat.lo, strat.hi):
        jump = _jump_size_bound(c, pi)
        coef_y = 0.5 * g * g * pi * pi * c.sigma ** 2 + g * abs(pi) * abs(c.mu) + jump
        coef_z = g * abs(pi) * c.sigma
        best = max(best, coef_y, coef_z, jump)
    return best


def jump_comparison_bounds(c: CoeffSnapshot, strat: StrategySet) -> tuple[float, float]:
    """(C1, C2) with C1 <= exp(-gamma pi beta) - 1 <= C2 on [lo, hi]; C1 > -1 always.

    This coefficient multiplies jump-size differences in the driver and must
    stay above -1 for solution comparison/monotonicity arguments to apply;
    pi -> it is monotone, so the extrema sit at the interval endpoints.
    """
    vals = [math.exp(-c.gamma * pi * c.beta) - 1.0 for pi in (strat.lo, strat.hi)]
    return min(vals), max(vals)
