"""Backward ODE solvers for the excess value theta(t, q).

The liquidation system is triangular in inventory: level ``q`` depends only
on itself and on ``q - Delta``::

    0 = gamma d_t theta(t,q) + gamma mu q - 0.5 gamma^2 sigma^2 q^2
        + H_D((theta(t,q) - theta(t,q-D)) / D)

    theta(T, q) = -l(q) q,    theta(t, 0) = 0

It is marched backward in time with explicit Euler (default) or classical
RK4.  Also here: the exponential-intensity oracle, the quote-floor variant,
the multi-asset lattice and the two-sided market-maker band.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import _backend
from .errors import (InvalidArgumentError, NumericalFailure,
                     PreconditionError, ResourceLimitError)
from .hamiltonian import (ConstrainedContext, QuoteContext, _mode, limit_hamiltonian,
                          quote_and_value)
from .intensity import IntensityModel

SCHEMES = {"euler": 0, "rk4": 1}
DEFAULT_STEPS = 30000
NODE_CAP = 1_000_000


# ---------------------------------------------------------------- penalties

@dataclass(frozen=True)
class ConstantPenalty:
    """Per-share terminal discount ``l(q) = ell`` ticks."""
    ell: float = 3.0

    def __post_init__(self):
        if not (self.ell >= 0 and math.isfinite(self.ell)):
            raise InvalidArgumentError(f"penalty must be a finite nonnegative number, got {self.ell}")

    def __call__(self, q):
        return np.full(np.shape(q), float(self.ell)) if np.ndim(q) else float(self.ell)

    def to_config(self):
        return {"constant": self.ell}


@dataclass(frozen=True)
class TablePenalty:
    """Piecewise-linear per-share penalty through ``(q, l)`` points."""
    points: tuple

    def __post_init__(self):
        arr = np.asarray(self.points, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 1:
            raise InvalidArgumentError("penalty table needs (q, ell) rows")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise InvalidArgumentError("penalty table inventories must increase")
        if np.any(arr[:, 1] < 0) or np.any(np.diff(arr[:, 1]) < 0):
            raise InvalidArgumentError("penalty must be nonnegative and nondecreasing")
        object.__setattr__(self, "points", tuple(map(tuple, arr.tolist())))

    def __call__(self, q):
        arr = np.asarray(self.points)
        out = np.interp(q, arr[:, 0], arr[:, 1])
        return out if np.ndim(q) else float(out)

    def to_config(self):
        return {"table": [list(p) for p in self.points]}


def make_penalty(spec) -> Callable:
    if isinstance(spec, (ConstantPenalty, TablePenalty)):
        return spec
    if isinstance(spec, (int, float)):
        return ConstantPenalty(float(spec))
    if isinstance(spec, dict) and "constant" in spec:
        return ConstantPenalty(float(spec["constant"]))
    if isinstance(spec, dict) and "table" in spec:
        return TablePenalty(tuple(map(tuple, spec["table"])))
    raise InvalidArgumentError(f"unrecognised penalty spec {spec!r}")


# ------------------------------------------------------------------ problem

def _is_multiple(x: float, step: float) -> bool:
    r = x / step
    return abs(r - round(r)) <= 1e-9 * max(1.0, abs(r))


@dataclass(frozen=True)
class LiquidationProblem:
    """Single-asset liquidation of ``q0`` shares in lots of ``delta_size``.

    Units: shares, seconds, ticks.  ``gamma`` is per tick-share.
    """
    q0: float
    delta_size: float
    horizon: float
    mu: float = 0.0
    sigma: float = 0.3
    gamma: float = 0.001
    penalty: Callable = field(default_factory=ConstantPenalty)

    def __post_init__(self):
        if not self.delta_size > 0:
            raise InvalidArgumentError(f"delta_size must be positive, got {self.delta_size}")
        if not self.q0 > 0 or not _is_multiple(self.q0, self.delta_size):
            raise InvalidArgumentError(
                f"q0 must be a positive multiple of delta_size, got q0={self.q0}, delta={self.delta_size}")
        if not self.horizon > 0:
            raise InvalidArgumentError(f"horizon must be positive, got {self.horizon}")
        if not self.sigma >= 0:
            raise InvalidArgumentError(f"sigma must be nonnegative, got {self.sigma}")
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")
        if not math.isfinite(self.mu):
            raise InvalidArgumentError("mu must be finite")
        object.__setattr__(self, "penalty", make_penalty(self.penalty))

    @property
    def n_levels(self) -> int:
        return int(round(self.q0 / self.delta_size))

    def inventories(self) -> np.ndarray:
        return self.delta_size * np.arange(self.n_levels + 1)

    def terminal_theta(self) -> np.ndarray:
        q = self.inventories()
        return -np.asarray(self.penalty(q)) * q

    def source(self, q):
        """``gamma mu q - 0.5 gamma^2 sigma^2 q^2``."""
        return self.gamma * self.mu * q - 0.5 * self.gamma ** 2 * self.sigma ** 2 * q * q

    def with_(self, **changes) -> "LiquidationProblem":
        return replace(self, **changes)

    def to_config(self):
        return {"q0": self.q0, "delta_size": self.delta_size, "horizon_s": self.horizon,
                "mu": self.mu, "sigma": self.sigma, "gamma": self.gamma,
                "penalty": self.penalty.to_config()}


def time_grid(horizon: float, dt: float | None):
    """(nsteps, dt) with ``dt`` dividing ``horizon``."""
    if dt is None:
        return DEFAULT_STEPS, horizon / DEFAULT_STEPS
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * horizon:
        raise InvalidArgumentError(f"dt={dt} does not divide the horizon {horizon}")
    return n, horizon / n


# ---------------------------------------------------------------- grids

def _write_rows(path, header, rows):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return repr(float(x))


@dataclass
class ValueGrid:
    """theta on ``times x inventories``; row ``n`` is time ``times[n]``."""
    times: np.ndarray
    inventories: np.ndarray
    theta: np.ndarray
    march_quotes: np.ndarray | None = field(default=None, repr=False)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def level(self, q: float) -> int:
        j = int(np.argmin(np.abs(self.inventories - q)))
        if not math.isclose(self.inventories[j], q, rel_tol=1e-12, abs_tol=1e-9):
            raise InvalidArgumentError(f"inventory {q} is not on the grid")
        return j

    def at(self, t: float, q: float) -> float:
        n = int(round(t / self.dt))
        return float(self.theta[n, self.level(q)])

    def to_csv(self, path):
        rows = ((_fmt(t), _fmt(q), _fmt(v)) for t, r in zip(self.times, self.theta)
                for q, v in zip(self.inventories, r))
        _write_rows(path, ["t", "q", "theta"], rows)


@dataclass
class QuoteSurface:
    """delta_star on ``times x inventories`` (inventories exclude 0)."""
    times: np.ndarray
    inventories: np.ndarray
    delta_star: np.ndarray

    def lookup(self, t: float, q: float) -> float:
        n = int(np.clip(round(t / (self.times[1] - self.times[0])), 0, len(self.times) - 1))
        j = int(np.argmin(np.abs(self.inventories - q)))
        return float(self.delta_star[n, j])

    def shifted(self, eps: float) -> "QuoteSurface":
        return QuoteSurface(self.times, self.inventories, self.delta_star + eps)

    def to_csv(self, path):
        rows = ((_fmt(t), _fmt(q), _fmt(v)) for t, r in zip(self.times, self.delta_star)
                for q, v in zip(self.inventories, r))
        _write_rows(path, ["t", "q", "delta_star"], rows)


# ------------------------------------------------------------- liquidation

def _check_solvable(intensity: IntensityModel):
    if not intensity.solvable:
        raise PreconditionError("intensity must be positive and strictly decreasing")


def _raise_node(status, times, inventories, what="quote solve"):
    nq = len(inventories)
    n, j = divmod(int(status), nq)
    raise NumericalFailure(f"{what} failed at t={times[n]!r}, q={inventories[j]!r}",
                           node=(float(times[n]), float(inventories[j])))


def _march(problem, intensity, c, gamma, step, theta_T, dt, nsteps, scheme, dmin, pmin):
    kind, prm = intensity.packed()
    try:
        sch = SCHEMES[scheme]
    except KeyError:
        raise InvalidArgumentError(f"scheme must be one of {sorted(SCHEMES)}, got {scheme!r}") from None
    k = _backend.get_kernels()
    theta, delta, status = k.march_liquidation(
        kind, prm, _mode(intensity), float(c), float(gamma), float(problem.mu),
        float(problem.sigma), float(step), np.ascontiguousarray(theta_T, dtype=float),
        float(dt), int(nsteps), sch, float(dmin), float(pmin))
    return theta, delta, int(status)


def solve_theta(problem: LiquidationProblem, intensity: IntensityModel, dt: float | None = None,
                scheme: str = "euler", hamiltonian: str = "finite",
                terminal: np.ndarray | None = None) -> ValueGrid:
    """March the liquidation system backward from ``T``.

    Parameters
    ----------
    intensity : IntensityModel
        Per-order intensity ``Lambda_D``.
    dt : float, optional
        Time step; must divide the horizon.  Defaults to ``T / 30000``.
    scheme : {"euler", "rk4"}
    hamiltonian : {"finite", "limit"}
        ``"limit"`` substitutes the small-order Hamiltonian ``H`` for
        ``H_D`` (same discrete operator), which is the monotone scheme for
        the limit equation on an inventory step of ``delta_size``.
    terminal : array, optional
        Override of the terminal row (used for comparison tests).
    """
    _check_solvable(intensity)
    nsteps, dt = time_grid(problem.horizon, dt)
    if hamiltonian == "finite":
        c = problem.gamma * problem.delta_size
    elif hamiltonian == "limit":
        c = 0.0
    else:
        raise InvalidArgumentError(f"hamiltonian must be 'finite' or 'limit', got {hamiltonian!r}")
    inv = problem.inventories()
    th_T = problem.terminal_theta() if terminal is None else np.asarray(terminal, dtype=float)
    if th_T.shape != inv.shape:
        raise InvalidArgumentError("terminal row has the wrong length")
    times = np.linspace(0.0, problem.horizon, nsteps + 1)
    theta, delta, status = _march(problem, intensity, c, problem.gamma, problem.delta_size,
                                  th_T, dt, nsteps, scheme, -math.inf, -math.inf)
    if status >= 0:
        _raise_node(status, times, inv)
    return ValueGrid(times, inv, theta, delta[:, 1:])


def solve_theta_exponential(problem: LiquidationProblem, A: float, k: float,
                            dt: float | None = None) -> ValueGrid:
    """Closed-form route for ``Lambda_D = A exp(-k delta)``.

    ``w = exp(k theta / D)`` solves a lower-bidiagonal linear system with
    constant coefficients, so one exact propagator ``expm(dt M)`` advances
    it between grid times.
    """
    if not (A > 0 and k > 0):
        raise InvalidArgumentError("A and k must be positive")
    nsteps, dt = time_grid(problem.horizon, dt)
    D, g = problem.delta_size, problem.gamma
    inv = problem.inventories()
    a = -k * problem.mu * inv / D + g * k * problem.sigma ** 2 * inv ** 2 / (2 * D)
    b = A * (1 + g * D / k) ** (-1 - k / (g * D))
    n = len(inv)
    # backward time: dw/dtau = -a_q w_q + b w_{q-D}; w_0 is pinned at 1
    M = np.zeros((n, n))
    for j in range(1, n):
        M[j, j] = -a[j]
        M[j, j - 1] = b
    P = expm(dt * M)
    w = np.empty((nsteps + 1, n))
    w[nsteps] = np.exp(k / D * problem.terminal_theta())
    for m in range(nsteps, 0, -1):
        w[m - 1] = P @ w[m]
        w[m - 1, 0] = 1.0
    if not np.all(w > 0):
        idx = np.argwhere(~(w > 0))[0]
        raise NumericalFailure("non-positive w in the exponential oracle",
                               node=(float(idx[0] * dt), float(inv[idx[1]])))
    theta = D / k * np.log(w)
    theta[:, 0] = 0.0
    return ValueGrid(np.linspace(0.0, problem.horizon, nsteps + 1), inv, theta)


def exponential_quotes(grid: ValueGrid, problem: LiquidationProblem, k: float) -> QuoteSurface:
    """Quote formula of the exponential case, from theta differences."""
    g, D = problem.gamma, problem.delta_size
    diff = np.diff(grid.theta, axis=1)
    d = diff / D + math.log1p(g * D / k) / (g * D)
    return QuoteSurface(grid.times, grid.inventories[1:], d)


def compute_quote_surface(grid: ValueGrid, ctx: QuoteContext) -> QuoteSurface:
    """Optimal quotes at every node with ``q > 0``."""
    p = np.diff(grid.theta, axis=1) / ctx.delta_size
    guess = grid.march_quotes if grid.march_quotes is not None and \
        grid.march_quotes.shape == p.shape else None
    d, _ = quote_and_value(ctx.intensity, ctx.c, ctx.gamma, p, guess)
    return QuoteSurface(grid.times, grid.inventories[1:], np.asarray(d).reshape(p.shape))


def quote_residuals(surface: QuoteSurface, grid: ValueGrid, ctx: QuoteContext) -> np.ndarray:
    """|f(delta*) - p| at every surface node."""
    p = np.diff(grid.theta, axis=1) / ctx.delta_size
    f = ctx.quote_equation(surface.delta_star.ravel()).reshape(p.shape)
    return np.abs(f - p)


def solve_constrained(problem: LiquidationProblem, intensity: IntensityModel, delta_min: float,
                      dt: float | None = None, scheme: str = "euler"):
    """Solve with quotes restricted to ``delta >= delta_min``.

    Returns ``(ValueGrid, QuoteSurface)``; the surface holds the floored
    quotes ``max(delta_min, argmax)``.
    """
    _check_solvable(intensity)
    nsteps, dt = time_grid(problem.horizon, dt)
    cctx = ConstrainedContext(QuoteContext(problem.gamma, problem.delta_size, intensity),
                              float(delta_min))
    inv = problem.inventories()
    times = np.linspace(0.0, problem.horizon, nsteps + 1)
    theta, delta, status = _march(problem, intensity, cctx.base.c, problem.gamma,
                                  problem.delta_size, problem.terminal_theta(), dt, nsteps,
                                  scheme, cctx.delta_min, cctx.p_min)
    if status >= 0:
        _raise_node(status, times, inv)
    grid = ValueGrid(times, inv, theta, delta[:, 1:])
    return grid, QuoteSurface(times, inv[1:], delta[:, 1:].copy())


# ------------------------------------------------------------------ bounds

def theta_bounds(problem: LiquidationProblem, intensity: IntensityModel, times):
    """Lower and upper envelopes for theta at each time.

    ``intensity`` is the per-order model; the upper bound uses the limit
    Hamiltonian of ``D * Lambda_D`` at 0, which dominates ``H_D(0)``.
    """
    tau = problem.horizon - np.asarray(times, dtype=float)
    q0, g = problem.q0, problem.gamma
    lower = (-float(problem.penalty(q0)) * q0 - max(-problem.mu, 0.0) * q0 * tau
             - 0.5 * g * problem.sigma ** 2 * q0 ** 2 * tau)
    base = intensity.scaled(problem.delta_size)
    h0 = limit_hamiltonian(base, g, 0.0)
    upper = max(problem.mu, 0.0) * q0 * tau + h0 * tau / g
    return lower, upper


def bound_violations(grid: ValueGrid, problem: LiquidationProblem, intensity: IntensityModel,
                     slack: float = 1e-9) -> int:
    """Count of nodes outside the envelopes (relative slack on the scale)."""
    lo, hi = theta_bounds(problem, intensity, grid.times)
    tol = slack * max(1.0, float(np.max(np.abs(grid.theta))))
    th = grid.theta
    return int(np.sum(th < lo[:, None] - tol) + np.sum(th > hi[:, None] + tol))


# ------------------------------------------------------------- multi-asset

@dataclass(frozen=True)
class AssetSpec:
    q0: float
    delta_size: float
    intensity: IntensityModel
    mu: float = 0.0
    sigma: float = 0.3
    penalty: Callable = field(default_factory=ConstantPenalty)

    def __post_init__(self):
        if not self.delta_size > 0 or not self.q0 > 0 or not _is_multiple(self.q0, self.delta_size):
            raise InvalidArgumentError("each q0 must be a positive multiple of its delta_size")
        if not self.sigma >= 0:
            raise InvalidArgumentError("sigma must be nonnegative")
        object.__setattr__(self, "penalty", make_penalty(self.penalty))

    @property
    def n_levels(self):
        return int(round(self.q0 / self.delta_size))


@dataclass(frozen=True)
class MultiAssetProblem:
    assets: tuple
    correlation: np.ndarray
    gamma: float
    horizon: float
    node_cap: int = NODE_CAP

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        rho = np.atleast_2d(np.asarray(self.correlation, dtype=float))
        d = len(self.assets)
        if d < 1:
            raise InvalidArgumentError("need at least one asset")
        if rho.shape != (d, d):
            raise InvalidArgumentError(f"correlation must be {d}x{d}")
        if not np.allclose(rho, rho.T, atol=0, rtol=0) or not np.allclose(np.diag(rho), 1.0):
            raise InvalidArgumentError("correlation must be symmetric with unit diagonal")
        if np.min(np.linalg.eigvalsh(rho)) <= 0:
            raise InvalidArgumentError("correlation must be positive definite")
        if not self.gamma > 0 or not self.horizon > 0:
            raise InvalidArgumentError("gamma and horizon must be positive")
        object.__setattr__(self, "correlation", rho)

    @property
    def shape(self):
        return tuple(a.n_levels + 1 for a in self.assets)


@dataclass
class MultiAssetResult:
    times: np.ndarray
    shape: tuple
    delta_sizes: tuple
    theta: np.ndarray  # (n_times, n_nodes), lattice flattened C-order

    def inventories(self):
        """(n_nodes, d) inventory of every flat node."""
        idx = np.indices(self.shape).reshape(len(self.shape), -1).T
        return idx * np.asarray(self.delta_sizes)

    def theta_nd(self, n: int = 0) -> np.ndarray:
        return self.theta[n].reshape(self.shape)

    def to_csv(self, path):
        inv = self.inventories()
        d = len(self.shape)
        rows = ([_fmt(t)] + [_fmt(x) for x in q] + [_fmt(v)]
                for t, r in zip(self.times, self.theta) for q, v in zip(inv, r))
        _write_rows(path, ["t"] + [f"q{i + 1}" for i in range(d)] + ["theta"], rows)


def _axis_neighbours(shape, axis):
    """(mask of nodes with q_axis > 0, flat index of the q - D e_axis neighbour)."""
    strides = np.cumprod((1,) + tuple(reversed(shape[1:])))[::-1]
    idx = np.indices(shape).reshape(len(shape), -1)
    has = idx[axis] > 0
    nb = np.arange(idx.shape[1]) - strides[axis]
    return has, nb


def solve_multi_asset(mp: MultiAssetProblem, dt: float | None = None,
                      record_every: int | None = None) -> MultiAssetResult:
    """Explicit Euler march over the full inventory lattice.

    ``record_every`` thins the stored time rows (default: keep all unless
    that exceeds about 5e7 values, then only the two ends).
    """
    shape = mp.shape
    nodes = int(np.prod(shape))
    if nodes > mp.node_cap:
        raise ResourceLimitError(f"lattice has {nodes} nodes, cap is {mp.node_cap}")
    for a in mp.assets:
        _check_solvable(a.intensity)
    nsteps, dt = time_grid(mp.horizon, dt)
    if record_every is None:
        record_every = 1 if nodes * (nsteps + 1) <= 5e7 else nsteps
    d = len(shape)
    sizes = tuple(a.delta_size for a in mp.assets)
    idx = np.indices(shape).reshape(d, -1)
    q = idx * np.asarray(sizes)[:, None]
    g = mp.gamma
    sig = np.array([a.sigma for a in mp.assets])
    cov = mp.correlation * np.outer(sig, sig)
    src = g * sum(a.mu * q[i] for i, a in enumerate(mp.assets)) \
        - 0.5 * g * g * np.einsum("in,ij,jn->n", q, cov, q)
    theta = -sum(np.asarray(a.penalty(q[i])) * q[i] for i, a in enumerate(mp.assets))
    theta = np.asarray(theta, dtype=float)
    kern = _backend.get_kernels()
    axes = []
    for i, a in enumerate(mp.assets):
        has, nb = _axis_neighbours(shape, i)
        kind, prm = a.intensity.packed()
        m = int(has.sum())
        axes.append((np.flatnonzero(has), nb[has], kind, prm, _mode(a.intensity),
                     g * a.delta_size, a.delta_size, np.full(m, np.nan),
                     np.empty(m), np.empty(m)))
    times = np.linspace(0.0, mp.horizon, nsteps + 1)
    keep = list(range(0, nsteps + 1, record_every))
    if keep[-1] != nsteps:
        keep.append(nsteps)
    out = np.empty((len(keep), nodes))
    slot = {n: s for s, n in enumerate(keep)}
    out[slot[nsteps]] = theta
    rate = np.empty(nodes)
    for n in range(nsteps - 1, -1, -1):
        rate[:] = src
        for at, nb, kind, prm, mode, c, D, guess, dd, hh in axes:
            p = (theta[at] - theta[nb]) / D
            bad = kern.quote_batch(kind, prm, mode, c, g, p, guess, dd, hh)
            if bad >= 0:
                node = tuple(int(x) for x in idx[:, at[bad]])
                raise NumericalFailure(f"quote solve failed at t={times[n + 1]!r}, node={node}",
                                       node=(float(times[n + 1]), node))
            guess[:] = dd
            rate[at] += hh
        theta = theta + dt * rate / g
        theta[0] = 0.0
        if n in slot:
            out[slot[n]] = theta
    return MultiAssetResult(times[keep], shape, sizes, out)


def multi_asset_quotes(res: MultiAssetResult, mp: MultiAssetProblem, axis: int,
                       row: int = 0) -> np.ndarray:
    """Quotes of asset ``axis`` on the lattice at stored row ``row`` (NaN where q_axis = 0)."""
    a = mp.assets[axis]
    has, nb = _axis_neighbours(res.shape, axis)
    th = res.theta[row]
    p = (th[has] - th[nb[has]]) / a.delta_size
    d, _ = quote_and_value(a.intensity, mp.gamma * a.delta_size, mp.gamma, p)
    out = np.full(th.shape, np.nan)
    out[has] = d
    return out.reshape(res.shape)


# ------------------------------------------------------------ market maker

@dataclass(frozen=True)
class MarketMakerProblem:
    """Two-sided quoting with inventory kept in ``[-Q, Q]``."""
    Q: float
    delta_size: float
    horizon: float
    mu: float = 0.0
    sigma: float = 0.3
    gamma: float = 0.001
    penalty: Callable = field(default_factory=ConstantPenalty)

    def __post_init__(self):
        if not self.delta_size > 0 or not self.Q > 0 or not _is_multiple(self.Q, self.delta_size):
            raise InvalidArgumentError("Q must be a positive multiple of delta_size")
        if not self.gamma > 0 or not self.horizon > 0 or not self.sigma >= 0:
            raise InvalidArgumentError("need gamma > 0, horizon > 0, sigma >= 0")
        object.__setattr__(self, "penalty", make_penalty(self.penalty))

    @property
    def n_side(self) -> int:
        return int(round(self.Q / self.delta_size))

    def inventories(self):
        return self.delta_size * np.arange(-self.n_side, self.n_side + 1)


@dataclass
class MarketMakerResult:
    grid: ValueGrid
    bid: QuoteSurface  # inventories -Q .. Q - D
    ask: QuoteSurface  # inventories -Q + D .. Q

    def to_csv(self, path):
        def rows():
            for n, t in enumerate(self.grid.times):
                for side, s in (("bid", self.bid), ("ask", self.ask)):
                    for q, v in zip(s.inventories, s.delta_star[n]):
                        yield _fmt(t), _fmt(q), side, _fmt(v)
        _write_rows(path, ["t", "q", "side", "delta_star"], rows())


def _mm_rate(theta, src, D, kern, kind, prm, mode, c, g, gb, ga, db, da, hb, ha):
    # ask acts on q > -Q (sell, move down); bid on q < Q (buy, move up)
    pa = (theta[1:] - theta[:-1]) / D
    pb = (theta[:-1] - theta[1:]) / D
    bad = kern.quote_batch(kind, prm, mode, c, g, pa, ga, da, ha)
    if bad < 0:
        bad = kern.quote_batch(kind, prm, mode, c, g, pb, gb, db, hb)
    if bad >= 0:
        return None
    hsum = np.zeros(theta.size)
    hsum[1:] += ha
    hsum[:-1] += hb
    return (src + hsum) / g


def solve_market_maker(mm: MarketMakerProblem, intensity: IntensityModel,
                       dt: float | None = None, scheme: str = "euler") -> MarketMakerResult:
    """Joint backward march over the inventory band (not triangular)."""
    _check_solvable(intensity)
    if scheme not in SCHEMES:
        raise InvalidArgumentError(f"scheme must be one of {sorted(SCHEMES)}")
    nsteps, dt = time_grid(mm.horizon, dt)
    inv = mm.inventories()
    g, D = mm.gamma, mm.delta_size
    src = g * mm.mu * inv - 0.5 * g * g * mm.sigma ** 2 * inv * inv
    aq = np.abs(inv)
    theta = -np.asarray(mm.penalty(aq)) * aq
    kind, prm = intensity.packed()
    mode = _mode(intensity)
    kern = _backend.get_kernels()
    c = g * D
    m = inv.size - 1
    gb, ga = np.full(m, np.nan), np.full(m, np.nan)
    db, da, hb, ha = (np.empty(m) for _ in range(4))
    times = np.linspace(0.0, mm.horizon, nsteps + 1)
    out = np.empty((nsteps + 1, inv.size))
    bid = np.empty((nsteps + 1, m))
    ask = np.empty((nsteps + 1, m))
    out[nsteps] = theta

    def F(th, n):
        r = _mm_rate(th, src, D, kern, kind, prm, mode, c, g, gb, ga, db, da, hb, ha)
        if r is None:
            raise NumericalFailure(f"quote solve failed near t={times[n]!r}", node=(float(times[n]), None))
        return r

    k1 = F(theta, nsteps)
    bid[nsteps], ask[nsteps] = db, da
    for n in range(nsteps - 1, -1, -1):
        gb[:], ga[:] = db, da
        if scheme == "rk4":
            k2 = F(theta + 0.5 * dt * k1, n)
            k3 = F(theta + 0.5 * dt * k2, n)
            k4 = F(theta + dt * k3, n)
            theta = theta + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            theta = theta + dt * k1
        out[n] = theta
        k1 = F(theta, n)
        bid[n], ask[n] = db, da
    grid = ValueGrid(times, inv, out)
    return MarketMakerResult(grid, QuoteSurface(times, inv[:-1], bid),
                             QuoteSurface(times, inv[1:], ask))


__all__ = [
    "ConstantPenalty", "TablePenalty", "make_penalty", "LiquidationProblem", "ValueGrid",
    "QuoteSurface", "time_grid", "solve_theta", "solve_theta_exponential",
    "exponential_quotes", "compute_quote_surface", "quote_residuals", "solve_constrained",
    "theta_bounds", "bound_violations", "AssetSpec", "MultiAssetProblem", "MultiAssetResult",
    "solve_multi_asset", "multi_asset_quotes", "MarketMakerProblem", "MarketMakerResult",
    "solve_market_maker",
]
