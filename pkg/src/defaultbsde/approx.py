"""k-truncation of the strategy set: sweeps over C = [-k, k] and the k -> inf limit.

The value function with unconstrained strategies is the nonincreasing limit
of the value functions over strategies bounded by k.  Each k gives a
Lipschitz BSDE solved by the grid scheme; the unconstrained value is reached
by geometric doubling of k with a relative Cauchy stopping rule (once the
constraint stops binding, J0(k) flattens exponentially fast).

Exact monotonicity in k holds in continuous time; the discrete scheme can
break it by rounding-level noise, so violations beyond 1e-9 plus a reported
noise bound are recorded on the result rather than asserted away.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ._util import open_output
from .driver import StrategySet
from .model import Claim, MarketModel
from .solver import (Quadrature, SolverError, SpaceGrid, ValueSurface,
                     solve_bsde, surface_at_origin)

__all__ = ["KSweepResult", "NonConvergenceError", "k_sweep", "converge", "solve_j0"]

MONOTONE_TOL = 1e-9
MAX_DOUBLINGS = 20


class NonConvergenceError(RuntimeError):
    """k-doubling hit the cap without meeting the Cauchy criterion."""

    def __init__(self, message: str, ks: list[float], j0s: list[float]):
        super().__init__(message)
        self.ks = ks
        self.j0s = j0s


@dataclass
class KSweepResult:
    """J0 values along an increasing k-schedule plus convergence diagnostics."""

    ks: list[float]
    j0s: list[float]
    runtimes_ms: list[float]
    converged: bool = False
    k_star: float | None = None
    monotone_violations: list[tuple[float, float, float]] = field(default_factory=list)
    noise_bound: float = 0.0
    surfaces: list[ValueSurface] | None = None

    def to_csv(self, path) -> None:
        """Columns k,J0,runtime_ms (runtime is a wall-clock diagnostic)."""
        with open_output(path) as fh:
            fh.write("k,J0,runtime_ms\n")
            for k, j0, ms in zip(self.ks, self.j0s, self.runtimes_ms):
                fh.write(f"{k:.12g},{j0:.12g},{ms:.3f}\n")


def solve_j0(model: MarketModel, claim: Claim, space: SpaceGrid, quad: Quadrature,
             k: float, refine: bool = False,
             keep_surface: bool = False):
    """One BSDE solve on C = [-k, k]; returns (J0, surface or None, runtime_ms)."""
    t0 = time.perf_counter()
    surface = solve_bsde(model, claim, StrategySet.symmetric(k), space, quad,
                         refine=refine)
    j0 = surface_at_origin(surface)
    ms = 1e3 * (time.perf_counter() - t0)
    return j0, (surface if keep_surface else None), ms


def _finalize(res: KSweepResult) -> KSweepResult:
    res.noise_bound = 32.0 * np.finfo(float).eps * max(abs(v) for v in res.j0s)
    for (k1, j1), (k2, j2) in zip(zip(res.ks, res.j0s), zip(res.ks[1:], res.j0s[1:])):
        excess = j2 - j1 - MONOTONE_TOL - res.noise_bound
        if excess > 0.0:
            res.monotone_violations.append((k1, k2, excess))
    return res


def k_sweep(model: MarketModel, claim: Claim, space: SpaceGrid, quad: Quadrature,
            ks: list[float], keep_surfaces: bool = False,
            refine: bool = False) -> KSweepResult:
    """Solve once per k in an increasing positive schedule; record J0 and runtime.

    Monotone nonincrease of J0 is checked within 1e-9 plus the reported noise
    bound; violations are recorded on the result, not silently tolerated.
    Solver failures propagate tagged with the offending k.
    """
    if not ks:
        raise ValueError("ks must be nonempty")
    if any(k <= 0 for k in ks) or any(b >= a for a, b in zip(ks[1:], ks[:-1])):
        raise ValueError("ks must be strictly increasing and positive")
    res = KSweepResult(ks=list(ks), j0s=[], runtimes_ms=[],
                       surfaces=[] if keep_surfaces else None)
    for k in ks:
        try:
            j0, surf, ms = solve_j0(model, claim, space, quad, k,
                                    refine=refine, keep_surface=keep_surfaces)
        except (SolverError, ValueError) as exc:
            raise type(exc)(f"k={k:g}: {exc}") from exc
        res.j0s.append(j0)
        res.runtimes_ms.append(ms)
        if keep_surfaces:
            res.surfaces.append(surf)
    return _finalize(res)


def converge(model: MarketModel, claim: Claim, space: SpaceGrid, quad: Quadrature,
             k0: float, tol_rel: float, refine: bool = False,
             max_doublings: int = MAX_DOUBLINGS) -> tuple[float, KSweepResult]:
    """Double k from k0 until |J0(2k) - J0(k)| <= tol_rel * J0(k).

    Returns the last value as the unconstrained J(0) together with the sweep.
    Raises NonConvergenceError (with the full sequence) after ``max_doublings``
    doublings (default 20).
    """
    if not k0 > 0:
        raise ValueError("k0 must be positive")
    if not tol_rel > 0:
        raise ValueError("tol_rel must be positive")
    res = KSweepResult(ks=[], j0s=[], runtimes_ms=[])
    k = k0
    for _ in range(max_doublings + 1):
        j0, _, ms = solve_j0(model, claim, space, quad, k, refine=refine)
        res.ks.append(k)
        res.j0s.append(j0)
        res.runtimes_ms.append(ms)
        if len(res.j0s) >= 2 and abs(res.j0s[-1] - res.j0s[-2]) <= tol_rel * abs(res.j0s[-2]):
            res.converged = True
            res.k_star = k
            return j0, _finalize(res)
        k *= 2.0
    raise NonConvergenceError(
        f"approx: no k-convergence after {max_doublings} doublings from k0={k0:g} "
        f"(J0 sequence: {res.j0s})", res.ks, res.j0s)
