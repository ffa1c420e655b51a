"""Small-order limit of the liquidation problem.

As ``D -> 0`` with ``Lambda_D = Lambda / D`` the excess value converges to
the viscosity solution of::

    -gamma d_t theta - gamma mu q + 0.5 gamma^2 sigma^2 q^2 - H(d_q theta) = 0

with ``H(p) = gamma sup_d Lambda(d)(d - p)``.  The scheme here uses the
same upwind difference as the finite-``D`` system, with ``H`` in place of
``H_D``; it is monotone while ``dt * max Lambda(delta*) <= dq``.

Also here: the ``D``-convergence study and the bridge to an instantaneous
market-impact function ``f(v) = -Lambda^{-1}(v)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _backend
from .errors import ConfigError, InvalidArgumentError, NumericalFailure, OutOfRangeError
from .hamiltonian import QuoteContext, _mode
from .intensity import IntensityModel
from .value_solver import (LiquidationProblem, ValueGrid, _is_multiple, compute_quote_surface,
                           solve_theta, theta_bounds, time_grid)

MAX_DEPTH = -50.0


@dataclass
class LimitGrid(ValueGrid):
    dq: float = 0.0


def _limit_inventories(problem: LiquidationProblem, dq: float) -> np.ndarray:
    if not dq > 0 or not _is_multiple(problem.q0, dq):
        raise InvalidArgumentError(f"dq={dq} must be positive and divide q0={problem.q0}")
    return dq * np.arange(int(round(problem.q0 / dq)) + 1)


def solve_limit_hj(problem: LiquidationProblem, base_intensity: IntensityModel, dq: float,
                   dt: float | None = None, terminal=None) -> LimitGrid:
    """Explicit monotone march of the limit equation on step ``dq``.

    ``problem.delta_size`` is ignored.  The step restriction is checked
    against the gradients met at every time step; a violation raises
    :class:`ConfigError` with a suggested ``dt``.
    """
    if not base_intensity.solvable:
        raise InvalidArgumentError("intensity must be positive and strictly decreasing")
    inv = _limit_inventories(problem, dq)
    nsteps, dt = time_grid(problem.horizon, dt)
    g = problem.gamma
    src = g * problem.mu * inv - 0.5 * g * g * problem.sigma ** 2 * inv * inv
    th = -np.asarray(problem.penalty(inv)) * inv if terminal is None \
        else np.asarray(terminal, dtype=float).copy()
    kind, prm = base_intensity.packed()
    mode = _mode(base_intensity)
    kern = _backend.get_kernels()
    m = inv.size - 1
    guess = np.full(m, np.nan)
    d = np.empty(m)
    h = np.empty(m)
    out = np.empty((nsteps + 1, inv.size))
    quotes = np.empty((nsteps + 1, m))
    times = np.linspace(0.0, problem.horizon, nsteps + 1)
    out[nsteps] = th
    for n in range(nsteps, -1, -1):
        p = (th[1:] - th[:-1]) / dq
        bad = kern.quote_batch(kind, prm, mode, 0.0, g, p, guess, d, h)
        if bad >= 0:
            raise NumericalFailure(f"quote solve failed at t={times[n]!r}, q={inv[bad + 1]!r}",
                                   node=(float(times[n]), float(inv[bad + 1])))
        quotes[n] = d
        if n == 0:
            break
        # |H'(p)| = gamma Lambda(delta*); monotone iff dt |H'| / (gamma dq) <= 1
        lam_max = float(np.exp(kern.log_intensity(kind, prm, d)[0]).max())
        if dt * lam_max > dq:
            raise ConfigError(
                f"step restriction violated at t={times[n]!r}: dt={dt} exceeds "
                f"dq / max Lambda(delta*) = {dq / lam_max:.6g}; try dt <= {0.9 * dq / lam_max:.6g}",
                field="dt")
        guess[:] = d
        th = np.concatenate([[0.0], th[1:] + dt * (src[1:] + h) / g])
        out[n - 1] = th
    return LimitGrid(times, inv, out, quotes, dq)


def limit_bound_violations(grid: LimitGrid, problem: LiquidationProblem,
                           base_intensity: IntensityModel, slack: float = 1e-9) -> int:
    # the bound helper expects a per-order model for lots of delta_size
    per_order = base_intensity.scaled(1.0 / problem.delta_size)
    lo, hi = theta_bounds(problem, per_order, grid.times)
    tol = slack * max(1.0, float(np.max(np.abs(grid.theta))))
    return int(np.sum(grid.theta < lo[:, None] - tol) + np.sum(grid.theta > hi[:, None] + tol))


def step_interpolant(grid: ValueGrid, q) -> np.ndarray:
    """Right-continuous piecewise-constant extension in q: value at ceil(q/D) D."""
    D = grid.inventories[1] - grid.inventories[0]
    j = np.ceil(np.asarray(q) / D - 1e-9).astype(int)
    return grid.theta[:, np.clip(j, 0, len(grid.inventories) - 1)]


@dataclass
class StudyResult:
    delta_sizes: list
    sup_errors: list
    ratios: list

    def strictly_decreasing(self) -> bool:
        e = self.sup_errors
        return all(b < a for a, b in zip(e, e[1:]))

    def to_csv(self, path):
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["delta_size", "sup_error", "ratio"])
            for d, e, r in zip(self.delta_sizes, self.sup_errors, self.ratios):
                w.writerow([repr(float(d)), repr(float(e)), "" if r is None else repr(float(r))])


def convergence_study(problem: LiquidationProblem, base_intensity: IntensityModel, deltas,
                      dq: float, dt: float | None = None, limit: LimitGrid | None = None) -> StudyResult:
    """Sup distance between each ``theta_D`` (with ``Lambda / D``) and the limit grid."""
    if limit is None:
        limit = solve_limit_hj(problem, base_intensity, dq, dt)
    dt = limit.dt
    errs, ratios = [], []
    for D in deltas:
        sub = problem.with_(delta_size=float(D))
        grid = solve_theta(sub, base_intensity.scaled(1.0 / D), dt)
        err = float(np.max(np.abs(step_interpolant(grid, limit.inventories) - limit.theta)))
        ratios.append(errs[-1] / err if errs else None)
        errs.append(err)
    return StudyResult([float(d) for d in deltas], errs, ratios)


def refinement_quote_gap(problem: LiquidationProblem, intensity: IntensityModel,
                         factor: int = 2, dt: float | None = None) -> float:
    """Sup gap between quotes for ``(Lambda_D, D)`` and ``(factor Lambda_D, D / factor)``.

    Compared on the coarse inventory levels ``q > 0`` and on the common time grid.
    """
    coarse = solve_theta(problem, intensity, dt)
    fine_p = problem.with_(delta_size=problem.delta_size / factor)
    fine_i = intensity.scaled(float(factor))
    fine = solve_theta(fine_p, fine_i, coarse.dt)
    sc = compute_quote_surface(coarse, QuoteContext(problem.gamma, problem.delta_size, intensity))
    sf = compute_quote_surface(fine, QuoteContext(problem.gamma, fine_p.delta_size, fine_i))
    cols = [int(round(q / fine_p.delta_size)) - 1 for q in sc.inventories]
    return float(np.max(np.abs(sc.delta_star - sf.delta_star[:, cols])))


# ---------------------------------------------------------------- bridge

def ac_impact_function(intensity: IntensityModel, v, max_depth: float = MAX_DEPTH):
    """``f(v) = -Lambda^{-1}(v)`` in ticks per share, for ``0 < v <= Lambda(max_depth)``."""
    vs = np.atleast_1d(np.asarray(v, dtype=float))
    top = float(intensity(max_depth))
    if np.any(~(vs > 0)) or np.any(vs > top):
        raise OutOfRangeError(f"trading rate must lie in (0, {top:g}] (intensity at {max_depth} ticks)")
    out = np.empty_like(vs)
    for i, x in enumerate(vs):
        lx = math.log(x)

        def g(d):
            return float(intensity.log_eval(d)[0][0]) - lx
        hi = 1.0
        while g(hi) > 0:
            hi = 2.0 * hi + 1.0
            if hi > 1e12:
                raise OutOfRangeError(f"rate {x} is below the intensity tail")
        out[i] = -brentq(g, max_depth, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500) \
            if g(max_depth) > 0 else -max_depth
    return float(out[0]) if np.ndim(v) == 0 else out


def ac_hamiltonian(intensity: IntensityModel, p, max_depth: float = MAX_DEPTH):
    """``H~(p) = sup_{v > 0} v (-f(v) - p)``, maximised over the trading rate.

    A log-spaced rate grid locates the peak; a bounded scalar search in
    ``log v`` refines it.
    """
    ps = np.atleast_1d(np.asarray(p, dtype=float))
    top = float(intensity(max_depth))
    out = np.empty_like(ps)
    for i, pi in enumerate(ps):
        def val(lv):
            x = math.exp(lv)
            return x * (-ac_impact_function(intensity, x, max_depth) - pi)
        lvs = np.linspace(math.log(top) - 80.0, math.log(top), 321)
        vals = np.array([val(x) for x in lvs])
        k = int(np.argmax(vals))
        if vals[k] <= 0:
            out[i] = 0.0
            continue
        a, b = lvs[max(k - 1, 0)], lvs[min(k + 1, len(lvs) - 1)]
        res = minimize_scalar(lambda x: -val(x), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-11})
        out[i] = max(-res.fun, vals[k])
    return float(out[0]) if np.ndim(p) == 0 else out


@dataclass(frozen=True)
class ImpactBridge:
    """Market-impact view of an intensity curve."""
    intensity: IntensityModel
    max_depth: float = MAX_DEPTH

    def impact_f(self, v):
        return ac_impact_function(self.intensity, v, self.max_depth)

    def hamiltonian_tilde(self, p):
        return ac_hamiltonian(self.intensity, p, self.max_depth)


__all__ = ["LimitGrid", "solve_limit_hj", "limit_bound_violations", "step_interpolant",
           "StudyResult", "convergence_study", "refinement_quote_gap", "ac_impact_function",
           "ac_hamiltonian", "ImpactBridge", "MAX_DEPTH"]
