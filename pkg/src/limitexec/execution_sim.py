"""Monte Carlo liquidation under a given quote policy.

The reference price is arithmetic Brownian motion.  On each time step of
length ``dt`` the resting order at offset ``delta`` is filled with
probability ``1 - exp(-Lambda_D(delta) dt)`` (at most one fill per step);
cash gains ``(S + delta) D`` per fill and the remainder is sold at
``S_T - l(q_T)``.  Terminal utility is ``-exp(-gamma * wealth)``.

Random numbers come from a counter-based hash of ``(seed, path, stream,
counter)`` so every path is reproducible on its own and all policies see
common random numbers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .errors import InvalidArgumentError, InvalidStateError
from .intensity import IntensityModel
from .value_solver import LiquidationProblem, QuoteSurface, time_grid


# ----------------------------------------------------------------- policies

class QuotePolicy:
    """Maps (time, inventory level) to a quote offset in ticks."""

    name = "policy"

    def table(self, times: np.ndarray, inventories: np.ndarray) -> np.ndarray:
        """Quotes at each ``times[n]`` (rows) and inventory (columns, q > 0)."""
        raise NotImplementedError


@dataclass
class SurfacePolicy(QuotePolicy):
    """Quotes read off a solved surface, nearest node in time."""
    surface: QuoteSurface
    name: str = "optimal"

    def table(self, times, inventories):
        st = self.surface.times
        dt = st[1] - st[0]
        rows = np.clip(np.rint((np.asarray(times) - st[0]) / dt).astype(int), 0, len(st) - 1)
        cols = []
        for q in inventories:
            j = int(np.argmin(np.abs(self.surface.inventories - q)))
            if not math.isclose(self.surface.inventories[j], q, rel_tol=1e-12):
                raise InvalidArgumentError(f"policy surface has no inventory level {q}")
            cols.append(j)
        return self.surface.delta_star[np.ix_(rows, cols)]


@dataclass
class ConstantPolicy(QuotePolicy):
    offset: float
    name: str = "constant"

    def table(self, times, inventories):
        return np.full((len(times), len(inventories)), float(self.offset))


@dataclass
class ShiftedPolicy(QuotePolicy):
    """Another policy moved by ``eps`` ticks."""
    base: QuotePolicy
    eps: float
    name: str = ""

    def __post_init__(self):
        if not self.name:
            self.name = f"{self.base.name}{self.eps:+g}"

    def table(self, times, inventories):
        return self.base.table(times, inventories) + self.eps


# -------------------------------------------------------------- simulation

@dataclass(frozen=True)
class SimulationConfig:
    paths: int = 100_000
    dt: float = 0.05
    seed: int = 0
    x0: float = 0.0
    s0: float = 0.0

    def __post_init__(self):
        if int(self.paths) != self.paths or self.paths < 1:
            raise InvalidArgumentError(f"paths must be a positive integer, got {self.paths}")
        if not self.dt > 0:
            raise InvalidArgumentError(f"dt must be positive, got {self.dt}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidArgumentError("seed must fit in an unsigned 64-bit integer")


@dataclass
class SimulationStats:
    mean_utility: float
    se_utility: float
    certainty_equivalent: float
    se_certainty_equivalent: float
    fill_histogram: np.ndarray
    inventory_histogram: dict
    gamma: float
    utilities: np.ndarray = field(repr=False)
    fills: np.ndarray = field(repr=False)
    cash: np.ndarray = field(repr=False)
    q_end: np.ndarray = field(repr=False)
    s_end: np.ndarray = field(repr=False)

    def write_paths_csv(self, path):
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["path", "fills", "X_T", "q_T", "S_T", "utility"])
            for i in range(len(self.utilities)):
                w.writerow([i, int(self.fills[i]), repr(float(self.cash[i])),
                            repr(float(self.q_end[i])), repr(float(self.s_end[i])),
                            repr(float(self.utilities[i]))])


def certainty_equivalent(stats_or_mean, se=None, gamma=None):
    """``-(1/gamma) log(-E[U])`` and its delta-method standard error.

    Accepts a :class:`SimulationStats` or ``(mean_utility, se, gamma)``.
    """
    if isinstance(stats_or_mean, SimulationStats):
        mean, se, gamma = stats_or_mean.mean_utility, stats_or_mean.se_utility, stats_or_mean.gamma
    else:
        mean = float(stats_or_mean)
        se = 0.0 if se is None else float(se)
        if gamma is None:
            raise InvalidArgumentError("gamma is required with a bare mean utility")
    if not mean < 0:
        raise InvalidStateError(f"mean utility must be negative, got {mean}")
    return -math.log(-mean) / gamma, se / (gamma * abs(mean))


def _depth(nsteps: int) -> int:
    return max(1, int(math.ceil(math.log2(max(nsteps, 1)))))


def policy_quotes(problem: LiquidationProblem, policy: QuotePolicy, dt: float):
    nsteps, dt = time_grid(problem.horizon, dt)
    times = dt * np.arange(nsteps)
    inv = problem.inventories()[1:]
    q = np.asarray(policy.table(times, inv), dtype=float)
    if q.shape != (nsteps, len(inv)):
        raise InvalidArgumentError("policy table has the wrong shape")
    if not np.all(np.isfinite(q)):
        raise InvalidArgumentError("policy must give finite quotes for every q > 0")
    return nsteps, dt, np.column_stack([np.zeros(nsteps), q])


def simulate(problem: LiquidationProblem, intensity: IntensityModel, policy: QuotePolicy,
             config: SimulationConfig) -> SimulationStats:
    """Simulate ``config.paths`` liquidations; returns utility statistics.

    The per-step Bernoulli fills are drawn by inverting each level's
    cumulative hazard against one exponential variate, which gives the same
    law at a cost proportional to the number of fills.
    """
    nsteps, dt, quotes = policy_quotes(problem, policy, config.dt)
    nlev = problem.n_levels
    lam = np.exp(intensity.log_eval(quotes.ravel())[0]).reshape(quotes.shape)
    lam[:, 0] = 0.0
    hazard = np.zeros((nlev + 1, nsteps + 1))
    hazard[:, 1:] = np.cumsum(lam * dt, axis=0).T
    ell = np.asarray(problem.penalty(problem.inventories()), dtype=float)
    kern = _backend.get_kernels()
    fills, cash, q_end, s_end, util = kern.simulate_paths(
        hazard, np.ascontiguousarray(quotes), np.uint64(int(config.seed)), int(config.paths),
        float(problem.delta_size), float(problem.mu), float(problem.sigma), float(dt),
        float(config.x0), float(config.s0), float(problem.gamma), ell, _depth(nsteps))
    n = len(util)
    mean = float(np.mean(util))
    se = float(np.std(util, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    ce, se_ce = certainty_equivalent(mean, se, problem.gamma)
    levels, counts = np.unique(q_end, return_counts=True)
    return SimulationStats(mean, se, ce, se_ce,
                           np.bincount(fills, minlength=nlev + 1),
                           {float(a): int(b) for a, b in zip(levels, counts)},
                           problem.gamma, util, fills, cash, q_end, s_end)


def value_function_utility(problem: LiquidationProblem, theta0: float, x0: float = 0.0,
                           s0: float = 0.0) -> float:
    """``-exp(-gamma (x + q0 s + theta(0, q0)))``."""
    return -math.exp(-problem.gamma * (x0 + problem.q0 * s0 + theta0))


# -------------------------------------------------------------- tournament

@dataclass
class TournamentRow:
    name: str
    certainty_equivalent: float
    se: float
    gap: float
    joint_se: float
    flagged: bool


def policy_tournament(problem: LiquidationProblem, intensity: IntensityModel, policies,
                      config: SimulationConfig, reference: int = 0, n_se: float = 3.0):
    """Compare policies on common random numbers.

    ``gap`` is CE(policy) - CE(reference); its standard error comes from the
    delta method on the paired per-path utilities.  A policy is flagged when
    it beats the reference by more than ``n_se`` joint standard errors.
    """
    runs = [simulate(problem, intensity, p, config) for p in policies]
    ref = runs[reference]
    g = problem.gamma
    rows = []
    for p, st in zip(policies, runs):
        # d CE / d mean = -1 / (gamma mean); paired difference of linearised terms
        a = ref.utilities / (g * ref.mean_utility)
        b = st.utilities / (g * st.mean_utility)
        diff = a - b
        n = len(diff)
        jse = float(np.std(diff, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        gap = st.certainty_equivalent - ref.certainty_equivalent
        rows.append(TournamentRow(p.name, st.certainty_equivalent, st.se_certainty_equivalent,
                                  gap, jse, bool(gap > n_se * jse and p is not policies[reference])))
    return rows


def tournament_csv(rows, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "certainty_equivalent", "se", "gap_vs_reference", "joint_se", "flagged"])
        for r in rows:
            w.writerow([r.name, repr(r.certainty_equivalent), repr(r.se), repr(r.gap),
                        repr(r.joint_se), int(r.flagged)])


__all__ = ["QuotePolicy", "SurfacePolicy", "ConstantPolicy", "ShiftedPolicy", "SimulationConfig",
           "SimulationStats", "certainty_equivalent", "simulate", "value_function_utility",
           "policy_tournament", "tournament_csv", "TournamentRow", "policy_quotes"]
