"""Long-horizon (T -> infinity) limits of the liquidation problem.

With ``y(q) = 0.5 gamma^2 sigma^2 q^2 - gamma mu q`` the stationary excess
value is a partial sum of inverse Hamiltonian values::

    theta_inf(q) = D * sum_{q' = D, 2D, ..., q} H_D^{-1}(y(q'))

and the stationary quote at ``q0`` is ``delta_tilde(H_D^{-1}(y(q0)))``.
Both need ``mu < 0.5 gamma sigma^2 D``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalFailure, PreconditionError
from .hamiltonian import QuoteContext, inverse_hamiltonian, optimal_quote
from .intensity import IntensityModel, validate_hypotheses
from .value_solver import LiquidationProblem

ROUTE_TOL = 1e-9


@dataclass(frozen=True)
class AsymptoticResult:
    inventories: np.ndarray
    theta_inf: np.ndarray
    delta_star_inf: float
    q0: float

    def theta_at(self, q: float) -> float:
        j = int(round(q / (self.inventories[1] - self.inventories[0])))
        return float(self.theta_inf[j])

    def to_csv(self, path, quote_path=None):
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["q", "theta_inf"])
            w.writerows((repr(float(q)), repr(float(v)))
                        for q, v in zip(self.inventories, self.theta_inf))
        if quote_path is not None:
            Path(quote_path).write_text(f"delta_star_inf,{self.delta_star_inf!r}\n",
                                        encoding="utf-8")


def check_preconditions(problem: LiquidationProblem, intensity: IntensityModel):
    bound = 0.5 * problem.gamma * problem.sigma ** 2 * problem.delta_size
    if not problem.mu < bound:
        raise PreconditionError(
            f"asymptotics need mu < 0.5*gamma*sigma^2*delta_size; got mu={problem.mu} >= {bound}")
    rep = validate_hypotheses(intensity, intensity.probe_grid())
    if not (rep.positivity.passed and rep.strict_decrease.passed):
        raise PreconditionError("intensity must be positive and strictly decreasing")
    if not rep.tail.passed:
        raise PreconditionError("intensity tail must vanish (H_D(p) -> 0 as p -> infinity)")


def _y(problem: LiquidationProblem, q):
    g = problem.gamma
    return 0.5 * g * g * problem.sigma ** 2 * q * q - g * problem.mu * q


def _implicit_quote(problem: LiquidationProblem, intensity: IntensityModel, q0: float,
                    start: float) -> float:
    # D Lambda^2 / (c Lambda - Lambda') = y(q0) / gamma, solved in log form
    c = problem.gamma * problem.delta_size
    target = math.log(_y(problem, q0) / problem.gamma / problem.delta_size)

    def g(d):
        L, L1, _ = intensity.log_eval(d)
        return float(L[0] - math.log(c - L1[0]) - target)

    lo, hi, w = start - 1.0, start + 1.0, 1.0
    for _ in range(200):
        if g(lo) > 0 > g(hi):
            break
        w *= 2.0
        lo, hi = start - w, start + w
    else:
        raise NumericalFailure("could not bracket the stationary quote", bracket=(lo, hi))
    return brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def asymptotic_quote(problem: LiquidationProblem, intensity: IntensityModel,
                     q0: float | None = None) -> float:
    """Stationary quote at ``q0`` via both routes, cross-checked."""
    check_preconditions(problem, intensity)
    q0 = problem.q0 if q0 is None else q0
    ctx = QuoteContext(problem.gamma, problem.delta_size, intensity)
    composed = optimal_quote(ctx, inverse_hamiltonian(ctx, _y(problem, q0)))
    implicit = _implicit_quote(problem, intensity, q0, composed)
    if abs(composed - implicit) > ROUTE_TOL:
        raise NumericalFailure(
            f"stationary quote routes disagree: {composed!r} vs {implicit!r}",
            bracket=(min(composed, implicit), max(composed, implicit)))
    return composed


def asymptotic_theta(problem: LiquidationProblem, intensity: IntensityModel) -> AsymptoticResult:
    """Stationary excess value on ``{0, D, ..., q0}`` plus the quote at ``q0``."""
    check_preconditions(problem, intensity)
    ctx = QuoteContext(problem.gamma, problem.delta_size, intensity)
    inv = problem.inventories()
    incr = np.array([inverse_hamiltonian(ctx, _y(problem, q)) for q in inv[1:]])
    theta = np.concatenate([[0.0], problem.delta_size * np.cumsum(incr)])
    return AsymptoticResult(inv, theta, asymptotic_quote(problem, intensity), problem.q0)


__all__ = ["AsymptoticResult", "asymptotic_theta", "asymptotic_quote", "check_preconditions"]
