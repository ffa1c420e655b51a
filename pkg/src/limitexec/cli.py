"""Command-line front end.

Usage::

    limitexec <subcommand> (--preset NAME | --config FILE) [--out DIR] [--dt S] [--seed N]

Each run writes CSV outputs plus ``manifest.json`` into ``--out``.  Exit
codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, _backend
from .asymptotics import asymptotic_theta
from .errors import (ConfigError, InvalidArgumentError, NumericalFailure, OutOfRangeError,
                     PreconditionError, ResourceLimitError)
from .execution_sim import (ConstantPolicy, ShiftedPolicy, SimulationConfig, SurfacePolicy,
                            policy_tournament, simulate, tournament_csv)
from .hamiltonian import QuoteContext
from .intensity import (ExponentialIntensity, IntensityModel, figure1_tilde, load_csv,
                        validate_hypotheses)
from .limit_pde import (convergence_study, limit_bound_violations, refinement_quote_gap,
                        solve_limit_hj)
from .presets import PRESETS, SCHEMA, deep_merge, preset
from .value_solver import (AssetSpec, LiquidationProblem, MarketMakerProblem, MultiAssetProblem,
                           bound_violations, compute_quote_surface, quote_residuals,
                           solve_constrained, solve_market_maker, solve_multi_asset, solve_theta)

log = logging.getLogger("limitexec")

SUBCOMMANDS = ("validate-intensity", "solve", "quotes", "constrained", "asymptotic", "limit",
               "study", "simulate", "multi", "mm")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# ------------------------------------------------------------------ config

def load_config(preset_name=None, config_path=None, base_dir=None) -> dict:
    if preset_name is None and config_path is None:
        raise ConfigError("give --preset or --config")
    cfg = {}
    if preset_name is not None:
        try:
            cfg = preset(preset_name)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0]), field="preset") from None
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}", field="config") from None
        cfg = deep_merge(cfg, user)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict):
    v = jsonschema.Draft202012Validator(SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        # report the deepest error of a oneOf branch so the field is specific
        while e.context:
            e = max(e.context, key=lambda c: len(c.absolute_path))
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}", field=where)


def build_intensity(spec: dict, base_dir=None) -> IntensityModel:
    (kind, body), = spec.items()
    if kind == "exponential":
        return ExponentialIntensity(float(body["A"]), float(body["k"]))
    if kind == "figure1_tilde":
        return figure1_tilde(float(body.get("A", 0.1)), float(body.get("k", 0.3)))
    path = Path(body["file"])
    if base_dir is not None and not path.is_absolute():
        path = Path(base_dir) / path
    kw = {k: body[k] for k in ("left_extension", "left_slope", "scale") if k in body}
    return load_csv(path, **kw)


def build_problem(cfg: dict) -> LiquidationProblem:
    p = cfg["problem"]
    return LiquidationProblem(q0=float(p["q0"]), delta_size=float(p["delta_size"]),
                              horizon=float(p["horizon_s"]), mu=float(p.get("mu", 0.0)),
                              sigma=float(p.get("sigma", 0.3)), gamma=float(p["gamma"]),
                              penalty=p.get("penalty", {"constant": 3.0}))


# ---------------------------------------------------------------- commands

class Run:
    def __init__(self, cfg, out: Path, base_dir=None):
        self.cfg = cfg
        self.out = out
        self.base_dir = base_dir
        self.files = []
        self.summary = {}
        self.problem = build_problem(cfg)
        self.intensity = build_intensity(cfg["intensity"], base_dir)
        self.dt = cfg.get("solver", {}).get("dt")
        self.scheme = cfg.get("solver", {}).get("scheme", "euler")

    def path(self, name):
        self.files.append(name)
        return self.out / name

    @property
    def ctx(self):
        return QuoteContext(self.problem.gamma, self.problem.delta_size, self.intensity)

    def _solve(self):
        grid = solve_theta(self.problem, self.intensity, self.dt, self.scheme)
        surf = compute_quote_surface(grid, self.ctx)
        self.summary["bound_violations"] = bound_violations(grid, self.problem, self.intensity)
        self.summary["max_quote_residual"] = float(np.max(quote_residuals(surf, grid, self.ctx)))
        self.summary["theta_0_q0"] = float(grid.theta[0, -1])
        self.summary["theta_T_q0"] = float(grid.theta[-1, -1])
        return grid, surf

    def cmd_validate_intensity(self):
        m = self.intensity
        rep = validate_hypotheses(m, m.probe_grid())
        with open(self.path("validation.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write("hypothesis,status,first_violation\n")
            for row in rep.as_rows():
                fh.write(",".join(row) + "\n")
        xs = np.linspace(-1.0, 5.0, 601)
        v, d1, d2 = m.derivatives(xs)
        rows = np.column_stack([xs, v, d1, d2])
        with open(self.path("intensity_curve.csv"), "w", encoding="utf-8", newline="") as fh:
            fh.write("delta_ticks,intensity_per_s,d1,d2\n")
            for r in rows:
                fh.write(",".join(repr(float(x)) for x in r) + "\n")
        self.summary["all_passed"] = rep.all_passed

    def cmd_solve(self):
        grid, surf = self._solve()
        grid.to_csv(self.path("theta.csv"))
        surf.to_csv(self.path("quotes.csv"))

    def cmd_quotes(self):
        _, surf = self._solve()
        surf.to_csv(self.path("quotes.csv"))

    def cmd_constrained(self):
        dmin = float(self.cfg.get("constraint", {}).get("delta_min", 0.0))
        grid, surf = solve_constrained(self.problem, self.intensity, dmin, self.dt, self.scheme)
        free, free_surf = self._solve()
        floored = free_surf.shifted(0.0)
        floored.delta_star = np.maximum(dmin, free_surf.delta_star)
        grid.to_csv(self.path("theta.csv"))
        surf.to_csv(self.path("quotes.csv"))
        floored.to_csv(self.path("quotes_floored.csv"))
        self.summary.update({
            "delta_min": dmin,
            "min_quote": float(np.min(surf.delta_star)),
            "theta_min_0_q0": float(grid.theta[0, -1]),
            "sup_gap_constrained_vs_floored": float(np.max(np.abs(surf.delta_star - floored.delta_star))),
            "max_theta_min_minus_theta": float(np.max(grid.theta - free.theta)),
            "bound_violations": bound_violations(grid, self.problem, self.intensity),
        })

    def cmd_asymptotic(self):
        res = asymptotic_theta(self.problem, self.intensity)
        res.to_csv(self.path("theta_inf.csv"), self.path("delta_star_inf.csv"))
        self.summary["delta_star_inf"] = res.delta_star_inf

    def _limit_cfg(self):
        lc = self.cfg.get("limit", {})
        dq = float(lc.get("dq", self.problem.delta_size / 8))
        return lc, dq, lc.get("dt", self.dt)

    def cmd_limit(self):
        _, dq, dt = self._limit_cfg()
        base = self.intensity.scaled(self.problem.delta_size)
        grid = solve_limit_hj(self.problem, base, dq, dt)
        grid.to_csv(self.path("limit_theta.csv"))
        self.summary["bound_violations"] = limit_bound_violations(grid, self.problem, base)
        self.summary["theta_0_q0"] = float(grid.theta[0, -1])

    def cmd_study(self):
        lc, dq, dt = self._limit_cfg()
        base = self.intensity.scaled(self.problem.delta_size)
        deltas = [float(d) for d in lc.get("deltas", [self.problem.delta_size,
                                                      self.problem.delta_size / 2,
                                                      self.problem.delta_size / 4])]
        res = convergence_study(self.problem, base, deltas, dq, dt)
        res.to_csv(self.path("study.csv"))
        self.summary["sup_errors"] = res.sup_errors
        self.summary["strictly_decreasing"] = res.strictly_decreasing()
        if "comparison" in self.cfg:
            f = int(self.cfg["comparison"].get("factor", 2))
            self.summary["quote_gap_refined_lots"] = refinement_quote_gap(
                self.problem, self.intensity, f, self.dt)

    def cmd_simulate(self):
        sc = self.cfg.get("simulate", {})
        _, surf = self._solve()
        opt = SurfacePolicy(surf)
        pols = []
        for spec in sc.get("policies", [{"type": "optimal"}]):
            if spec["type"] == "optimal":
                pols.append(opt)
            elif spec["type"] == "shifted":
                pols.append(ShiftedPolicy(opt, float(spec["eps"])))
            else:
                pols.append(ConstantPolicy(float(spec["offset"]), name=f"constant{spec['offset']:+g}"))
        conf = SimulationConfig(int(sc.get("paths", 100000)), float(sc.get("dt", 0.05)),
                                int(sc.get("seed", 0)), float(sc.get("x0", 0.0)),
                                float(sc.get("s0", 0.0)))
        rows = policy_tournament(self.problem, self.intensity, pols, conf)
        tournament_csv(rows, self.path("simulation.csv"))
        if sc.get("dump_paths"):
            simulate(self.problem, self.intensity, pols[0], conf).write_paths_csv(self.path("paths.csv"))
        self.summary["flags"] = [r.name for r in rows if r.flagged]
        self.summary["certainty_equivalents"] = {r.name: r.certainty_equivalent for r in rows}

    def cmd_multi(self):
        mc = self.cfg.get("multi_asset", {})
        p = self.problem
        if "assets" in mc:
            assets = []
            for a in mc["assets"]:
                it = build_intensity(a["intensity"], self.base_dir) if "intensity" in a else self.intensity
                assets.append(AssetSpec(float(a["q0"]), float(a["delta_size"]), it,
                                        float(a.get("mu", 0.0)), float(a.get("sigma", 0.3)),
                                        a.get("penalty", {"constant": 3.0})))
        else:
            a = AssetSpec(p.q0, p.delta_size, self.intensity, p.mu, p.sigma, p.penalty)
            assets = [a, a]
        rho = mc.get("correlation", np.eye(len(assets)).tolist())
        kw = {"node_cap": int(mc["node_cap"])} if "node_cap" in mc else {}
        mp = MultiAssetProblem(assets, rho, p.gamma, p.horizon, **kw)
        res = solve_multi_asset(mp, self.dt, int(mc.get("record_every", 1)))
        res.to_csv(self.path("theta_multi.csv"))
        self.summary["theta_0_q0"] = float(res.theta[0, -1])

    def cmd_mm(self):
        p = self.problem
        mm = MarketMakerProblem(float(self.cfg.get("market_maker", {}).get("Q", p.q0)),
                                p.delta_size, p.horizon, p.mu, p.sigma, p.gamma, p.penalty)
        res = solve_market_maker(mm, self.intensity, self.dt, self.scheme)
        res.grid.to_csv(self.path("theta.csv"))
        res.to_csv(self.path("quotes.csv"))
        self.summary["theta_0_0"] = float(res.grid.theta[0, mm.n_side])


def run(subcommand: str, cfg: dict, out_dir, preset_name=None, base_dir=None) -> dict:
    """Execute ``subcommand`` and write the manifest; returns the manifest."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}", field="subcommand")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    r = Run(cfg, out, base_dir)
    getattr(r, "cmd_" + subcommand.replace("-", "_"))()
    manifest = {"tool": "limitexec", "version": __version__, "subcommand": subcommand,
                "preset": preset_name, "backend": _backend.backend_name(), "config": cfg,
                "outputs": r.files, "summary": r.summary}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="limitexec", description="Optimal liquidation with limit orders.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--preset", choices=sorted(PRESETS))
        src.add_argument("--config", type=Path, help="JSON run configuration")
        sp.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        sp.add_argument("--dt", type=float, help="time step in seconds (simulation step for simulate)")
        sp.add_argument("--seed", type=int, help="simulation seed")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.preset, args.config)
        if args.dt is not None:
            key = "simulate" if args.subcommand == "simulate" else "solver"
            cfg.setdefault(key, {})["dt"] = args.dt
        if args.seed is not None:
            cfg.setdefault("simulate", {})["seed"] = args.seed
        validate_config(cfg)
        base = args.config.parent if args.config is not None else None
        manifest = run(args.subcommand, cfg, args.out, args.preset, base)
    except (ConfigError, InvalidArgumentError, PreconditionError, OutOfRangeError,
            ResourceLimitError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    log.info("wrote %s", ", ".join(manifest["outputs"] + ["manifest.json"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
