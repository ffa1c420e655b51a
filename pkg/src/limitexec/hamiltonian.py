"""Optimal-quote maps and Hamiltonians.

For a per-order intensity ``Lambda_D``, risk aversion ``gamma`` and order
size ``D`` (so ``c = gamma * D``)::

    L_D(p, d) = Lambda_D(d) * (1 - exp(-c (d - p)))
    H_D(p)    = sup_d L_D(p, d)

and in the small-order limit with base intensity ``Lambda``::

    H(p) = gamma * sup_d Lambda(d) (d - p)

The maximiser solves a scalar monotone equation that is found with a
safeguarded Newton iteration (see ``_kernels_numba._newton_quote``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _backend
from .errors import InvalidArgumentError, NumericalFailure, OutOfRangeError
from .intensity import IntensityModel

MODE_NEWTON = 0
MODE_SCAN = 1


def _mode(intensity: IntensityModel) -> int:
    return MODE_NEWTON if intensity.curvature_ok else MODE_SCAN


def quote_and_value(intensity: IntensityModel, c: float, gamma: float, p, guess=None):
    """Vectorised (optimal quote, Hamiltonian) pair.

    ``c = 0`` selects the small-order limit (then ``gamma`` scales H).
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float)).ravel()
    if guess is None:
        g = np.full(p_arr.shape, np.nan)
    else:
        g = np.broadcast_to(np.asarray(guess, dtype=float), np.shape(p)).ravel().copy()
    kind, prm = intensity.packed()
    d = np.empty_like(p_arr)
    h = np.empty_like(p_arr)
    bad = _backend.get_kernels().quote_batch(kind, prm, _mode(intensity), float(c), float(gamma),
                                             p_arr, g, d, h)
    if bad >= 0:
        raise NumericalFailure(f"quote solve failed at p={p_arr[bad]!r}",
                               bracket=(p_arr[bad], math.inf))
    if np.ndim(p) == 0:
        return float(d[0]), float(h[0])
    shape = np.shape(p)
    return d.reshape(shape), h.reshape(shape)


@dataclass(frozen=True)
class QuoteContext:
    gamma: float
    delta_size: float
    intensity: IntensityModel

    def __post_init__(self):
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")
        if not self.delta_size > 0:
            raise InvalidArgumentError(f"delta_size must be positive, got {self.delta_size}")

    @property
    def c(self) -> float:
        return self.gamma * self.delta_size

    def quote_equation(self, delta):
        """Left-hand side of the implicit quote equation at ``delta``."""
        lam, d1, _ = self.intensity.derivatives(np.atleast_1d(delta))
        out = np.asarray(delta) - np.log1p(-self.c * lam / d1) / self.c
        return float(out[0]) if np.ndim(delta) == 0 else out

    def objective(self, p, delta):
        return self.intensity(delta) * -np.expm1(-self.c * (np.asarray(delta) - p))


@dataclass(frozen=True)
class ConstrainedContext:
    base: QuoteContext
    delta_min: float

    @cached_property
    def p_min(self) -> float:
        return float(self.base.quote_equation(float(self.delta_min)))


def optimal_quote(ctx: QuoteContext, p):
    return quote_and_value(ctx.intensity, ctx.c, ctx.gamma, p)[0]


def hamiltonian_value(ctx: QuoteContext, p):
    return quote_and_value(ctx.intensity, ctx.c, ctx.gamma, p)[1]


def hamiltonian_closed_form(ctx: QuoteContext, p):
    """H_D through the closed form c Lambda^2 / (c Lambda - Lambda') at the optimal quote."""
    d = optimal_quote(ctx, p)
    lam, d1, _ = ctx.intensity.derivatives(np.atleast_1d(d))
    out = ctx.c * lam * lam / (ctx.c * lam - d1)
    return float(out[0]) if np.ndim(p) == 0 else out.reshape(np.shape(p))


def limit_quote_equation(intensity: IntensityModel, delta):
    lam, d1, _ = intensity.derivatives(np.atleast_1d(delta))
    out = np.asarray(delta) + lam / d1
    return float(out[0]) if np.ndim(delta) == 0 else out


def limit_optimal_quote(intensity: IntensityModel, p):
    return quote_and_value(intensity, 0.0, 1.0, p)[0]


def limit_hamiltonian(intensity: IntensityModel, gamma: float, p):
    if not gamma > 0:
        raise InvalidArgumentError(f"gamma must be positive, got {gamma}")
    return quote_and_value(intensity, 0.0, gamma, p)[1]


def constrained_quote(ctx: ConstrainedContext, p):
    d = optimal_quote(ctx.base, p)
    return np.maximum(d, ctx.delta_min) if np.ndim(p) else max(d, ctx.delta_min)


def constrained_hamiltonian(ctx: ConstrainedContext, p):
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    out = np.empty_like(p_arr)
    low = p_arr < ctx.p_min
    if low.any():
        out[low] = ctx.base.objective(p_arr[low], np.full(low.sum(), float(ctx.delta_min)))
    if (~low).any():
        out[~low] = hamiltonian_value(ctx.base, p_arr[~low])
    return float(out[0]) if np.ndim(p) == 0 else out.reshape(np.shape(p))


def inverse_hamiltonian(ctx: QuoteContext, y: float, p_limit: float = 1e6) -> float:
    """Solve H_D(p) = y for p by bisection on the decreasing H_D.

    The bracket starts at [-1, 1] and doubles outward; values of ``y`` not
    reached within ``|p| <= p_limit`` are out of range.
    """
    y = float(y)
    if not y > 0:
        raise OutOfRangeError(f"Hamiltonian values are positive; got y={y}")

    def H(p):
        return hamiltonian_value(ctx, p)

    lo, hi = -1.0, 1.0
    while H(lo) < y:
        hi = lo
        lo *= 2.0
        if lo < -p_limit:
            raise OutOfRangeError(f"y={y} exceeds sup H on p >= {-p_limit}")
    while H(hi) > y:
        lo = hi
        hi *= 2.0
        if hi > p_limit:
            raise OutOfRangeError(f"y={y} below H on p <= {p_limit}")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        hm = H(mid)
        if abs(hm - y) <= 1e-14 * y:
            return mid
        if hm > y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
