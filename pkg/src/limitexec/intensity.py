"""Execution-intensity models Lambda(delta) and hypothesis checks.

Two families are supported:

* :class:`ExponentialIntensity` -- ``A * exp(-k * delta)``.
* :class:`TabulatedIntensity` -- knots interpolated by a monotone cubic
  Hermite spline in log-intensity, with a near-flat (or exponential) left
  extension and an exponential right tail.

Both pack into ``(kind, params)`` for the compiled kernels.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import _backend
from .errors import InvalidArgumentError

KIND_EXP = 0
KIND_TAB = 1

DEFAULT_LEFT_SLOPE = -1e-6
CURVATURE_TOL = 1e-9


@dataclass(frozen=True)
class IntensityEval:
    value: float
    d1: float
    d2: float


class IntensityModel:
    """Common interface; subclasses provide ``packed`` and ``scaled``."""

    kind: int

    def packed(self) -> tuple[int, np.ndarray]:
        raise NotImplementedError

    def scaled(self, factor: float) -> "IntensityModel":
        """Model whose values are multiplied by ``factor``."""
        raise NotImplementedError

    def probe_grid(self) -> np.ndarray:
        raise NotImplementedError

    def log_eval(self, delta):
        kind, prm = self.packed()
        x = np.atleast_1d(np.asarray(delta, dtype=float))
        return _backend.get_kernels().log_intensity(kind, prm, x)

    def __call__(self, delta):
        L, _, _ = self.log_eval(delta)
        out = np.exp(L)
        return out[0] if np.ndim(delta) == 0 else out

    def derivatives(self, delta):
        """Arrays (value, first derivative, second derivative)."""
        L, L1, L2 = self.log_eval(delta)
        lam = np.exp(L)
        return lam, L1 * lam, (L2 + L1 * L1) * lam

    @property
    def curvature_ok(self) -> bool:
        """Whether Lambda Lambda'' <= 2 Lambda'^2 holds on the probe grid."""
        return validate_hypotheses(self, self.probe_grid()).curvature.passed

    @property
    def solvable(self) -> bool:
        rep = validate_hypotheses(self, self.probe_grid())
        return rep.positivity.passed and rep.strict_decrease.passed

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialIntensity(IntensityModel):
    scale_A: float
    decay_k: float
    kind: int = field(default=KIND_EXP, init=False, repr=False)

    def __post_init__(self):
        if not (self.scale_A > 0 and self.decay_k > 0):
            raise InvalidArgumentError(
                f"exponential intensity needs A > 0 and k > 0, got A={self.scale_A}, k={self.decay_k}")

    def packed(self):
        return KIND_EXP, np.array([math.log(self.scale_A), self.decay_k])

    def scaled(self, factor):
        return ExponentialIntensity(self.scale_A * factor, self.decay_k)

    def probe_grid(self):
        far = max(20.0, (math.log(self.scale_A) - math.log(1e-12)) / self.decay_k)
        return np.linspace(-20.0, far, 401)

    @property
    def curvature_ok(self):
        return True

    def to_config(self):
        return {"exponential": {"A": self.scale_A, "k": self.decay_k}}


class TabulatedIntensity(IntensityModel):
    """Intensity given at knots, interpolated monotonically in log space.

    Parameters
    ----------
    knots : sequence of (delta, rate)
        Offsets must be strictly increasing and rates positive.  Rates that
        fail to decrease are accepted here and reported by
        :func:`validate_hypotheses`; the solvers refuse such models.
    left_extension : {"constant", "exponential"}
        ``"constant"`` keeps the first rate with a tiny log-slope
        ``left_slope`` below the first knot; ``"exponential"`` continues
        the first segment's log-slope.
    scale : float
        Multiplier applied to every rate (used for order-size rescaling).
    log_slopes : sequence of float, optional
        Explicit derivatives of ``log(rate)`` at the knots.  When omitted
        they come from a PCHIP fit, with the ends pinned to the extensions.
    """

    kind = KIND_TAB

    def __init__(self, knots: Sequence[tuple[float, float]], left_extension: str = "constant",
                 left_slope: float = DEFAULT_LEFT_SLOPE, scale: float = 1.0,
                 log_slopes: Sequence[float] | None = None):
        arr = np.asarray(knots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
            raise InvalidArgumentError("need at least two (delta, rate) knots")
        xs, rates = arr[:, 0].copy(), arr[:, 1].copy()
        if np.any(np.diff(xs) <= 0):
            raise InvalidArgumentError("knot offsets must be strictly increasing")
        if np.any(rates <= 0) or not np.all(np.isfinite(rates)):
            raise InvalidArgumentError("knot rates must be positive and finite")
        if left_extension not in ("constant", "exponential"):
            raise InvalidArgumentError(f"unknown left extension {left_extension!r}")
        if not left_slope < 0:
            raise InvalidArgumentError("left_slope must be negative")
        if not scale > 0:
            raise InvalidArgumentError("scale must be positive")
        self.xs = xs
        self.rates = rates
        self.left_extension = left_extension
        self.left_slope = float(left_slope)
        self.scale = float(scale)
        ys = np.log(rates)
        secants = np.diff(ys) / np.diff(xs)
        if log_slopes is not None:
            slopes = np.asarray(log_slopes, dtype=float).copy()
            if slopes.shape != xs.shape or not np.all(np.isfinite(slopes)):
                raise InvalidArgumentError("log_slopes must be finite, one per knot")
            self.left_slope = float(slopes[0])
        elif len(xs) > 2:
            slopes = PchipInterpolator(xs, ys).derivative()(xs)
        else:
            slopes = np.full(2, secants[0])
        if log_slopes is None:
            # end slopes are pinned to the extensions so the log-intensity stays C1
            slopes[0] = self.left_slope if left_extension == "constant" else secants[0]
            slopes[-1] = secants[-1]
        self.explicit_slopes = log_slopes is not None
        self.slopes = slopes
        self._packed = np.concatenate(
            [[math.log(self.scale), float(len(xs))], xs, ys, slopes])

    @cached_property
    def curvature_ok(self):
        return validate_hypotheses(self, self.probe_grid()).curvature.passed

    @cached_property
    def solvable(self):
        rep = validate_hypotheses(self, self.probe_grid())
        return rep.positivity.passed and rep.strict_decrease.passed

    @property
    def tail_decay(self) -> float:
        return -self.slopes[-1]

    def packed(self):
        return KIND_TAB, self._packed

    def scaled(self, factor):
        return TabulatedIntensity(np.column_stack([self.xs, self.rates]), self.left_extension,
                                  self.left_slope, self.scale * factor,
                                  self.slopes if self.explicit_slopes else None)

    def probe_grid(self):
        lo, hi = self.xs[0] - 10.0, self.xs[-1] + 10.0
        dense = np.linspace(lo, hi, 4001)
        grid = np.union1d(dense, self.xs)
        if self.tail_decay > 0:
            # run the tail out until the rate is negligible
            last = math.log(self.rates[-1] * self.scale)
            far = self.xs[-1] + (last - math.log(1e-12)) / self.tail_decay
            if far > hi:
                grid = np.union1d(grid, np.linspace(hi, far, 200))
        return grid

    def knots(self):
        return list(zip(self.xs.tolist(), (self.rates * self.scale).tolist()))

    def to_config(self):
        return {"tabulated": {"knots": [list(k) for k in zip(self.xs.tolist(), self.rates.tolist())],
                              "left_extension": self.left_extension,
                              "left_slope": self.left_slope, "scale": self.scale,
                              "log_slopes": self.slopes.tolist() if self.explicit_slopes else None}}

    def __repr__(self):
        return (f"TabulatedIntensity(n_knots={len(self.xs)}, left={self.left_extension!r}, "
                f"scale={self.scale:g})")


def eval(model: IntensityModel, delta: float) -> IntensityEval:  # noqa: A001
    """Value and first two derivatives of ``model`` at one offset."""
    v, d1, d2 = model.derivatives(np.array([float(delta)]))
    return IntensityEval(float(v[0]), float(d1[0]), float(d2[0]))


def rescale_for_order_size(base: IntensityModel, delta_size: float) -> IntensityModel:
    """Per-order intensity ``base / delta_size``."""
    if not delta_size > 0:
        raise InvalidArgumentError(f"order size must be positive, got {delta_size}")
    if delta_size == 1:
        return base
    return base.scaled(1.0 / delta_size)


# ------------------------------------------------------------- validation

@dataclass(frozen=True)
class HypothesisResult:
    name: str
    passed: bool
    first_violation: float | None = None


@dataclass(frozen=True)
class ValidationReport:
    positivity: HypothesisResult
    strict_decrease: HypothesisResult
    curvature: HypothesisResult
    tail: HypothesisResult

    @property
    def results(self):
        return [self.positivity, self.strict_decrease, self.curvature, self.tail]

    @property
    def all_passed(self):
        return all(r.passed for r in self.results)

    def as_rows(self):
        return [(r.name, "pass" if r.passed else "fail",
                 "" if r.first_violation is None else repr(r.first_violation))
                for r in self.results]


def _first(grid, bad):
    idx = np.flatnonzero(bad)
    return (False, float(grid[idx[0]])) if idx.size else (True, None)


def validate_hypotheses(model: IntensityModel, probe_grid, tol: float = CURVATURE_TOL,
                        tail_tol: float | None = None) -> ValidationReport:
    """Check the model hypotheses on ``probe_grid``; failures are data.

    The curvature test is ``L L'' <= 2 L'^2 + tol L'^2``; the tail test asks
    that the rate at the last probe point be below ``tail_tol`` (defaults to
    ``tol``).
    """
    grid = np.asarray(probe_grid, dtype=float)
    if grid.size == 0:
        raise InvalidArgumentError("probe grid must be nonempty")
    if np.any(np.diff(grid) < 0):
        raise InvalidArgumentError("probe grid must be sorted")
    tail_tol = tol if tail_tol is None else tail_tol
    v, d1, d2 = model.derivatives(grid)
    pos = _first(grid, ~(v > 0))
    dec = _first(grid, ~(d1 < 0))
    curv = _first(grid, v * d2 > (2.0 + tol) * d1 * d1)
    tail_ok = bool(v[-1] < tail_tol)
    return ValidationReport(
        HypothesisResult("positivity", *pos),
        HypothesisResult("strict_decrease", *dec),
        HypothesisResult("curvature", *curv),
        HypothesisResult("tail", tail_ok, None if tail_ok else float(grid[-1])),
    )


# ---------------------------------------------------------------- loaders

def load_csv(path, left_extension: str = "constant", left_slope: float = DEFAULT_LEFT_SLOPE,
             scale: float = 1.0) -> TabulatedIntensity:
    """Read a ``delta_ticks,intensity_per_s`` CSV into a tabulated model."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != [
                "delta_ticks", "intensity_per_s"]:
            raise InvalidArgumentError(
                f"{path}: expected header 'delta_ticks,intensity_per_s', got {reader.fieldnames}")
        knots = [(float(r["delta_ticks"]), float(r["intensity_per_s"])) for r in reader]
    return TabulatedIntensity(knots, left_extension, left_slope, scale)


def write_csv(model: TabulatedIntensity, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delta_ticks", "intensity_per_s"])
        for x, r in model.knots():
            w.writerow([repr(x), repr(r)])


def figure1_tilde(A: float = 0.1, k: float = 0.3) -> TabulatedIntensity:
    """Plateau-shaped lookalike of the alternative intensity in the
    numerical examples: near-constant for delta <= 0, flatter than the
    exponential on (0, 2), and equal to ``A exp(-k delta)`` for delta >= 2.

    The log-intensity is concave, so the curvature hypothesis holds.  Its
    slope falls from the plateau value to ``-k`` through knots at 0, 1, 2,
    with each segment's secant chosen midway in the concavity window.
    """
    m = [DEFAULT_LEFT_SLOPE, -0.5 * k, -k, -k]
    xs = [0.0, 1.0, 2.0, 3.0]
    ys = [0.0] * 4
    ys[2] = math.log(A) - 2.0 * k
    ys[3] = ys[2] - k
    ys[1] = ys[2] + 0.75 * k
    ys[0] = ys[1] - 0.5 * (m[0] + m[1])
    knots = [(x, math.exp(y)) for x, y in zip(xs, ys)]
    return TabulatedIntensity(knots, left_extension="constant", log_slopes=m)
