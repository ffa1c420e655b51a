"""Named parameter sets and the run-config schema.

Presets ``fig1`` .. ``fig6`` follow the captioned parameter sets of the
numerical examples: ``fig1`` the two intensity shapes, ``fig2``/``fig3`` the
exponential and plateau solves, ``fig4`` the quote floor at zero, ``fig5``
the stationary value for 800 shares, ``fig6`` the lot-size comparison.
"""
from __future__ import annotations

import copy

_FIG2_PROBLEM = {"q0": 400, "delta_size": 50, "horizon_s": 300, "mu": 0.0, "sigma": 0.3,
                 "gamma": 0.001, "penalty": {"constant": 3.0}}
_EXP = {"exponential": {"A": 0.1, "k": 0.3}}
_TILDE = {"figure1_tilde": {"A": 0.1, "k": 0.3}}

_COMMON = {
    "solver": {"dt": 0.01, "scheme": "euler"},
    "limit": {"dq": 6.25, "deltas": [50, 25, 12.5], "dt": 0.05},
    "simulate": {"paths": 100000, "dt": 0.05, "seed": 20240601, "x0": 0.0, "s0": 0.0,
                 "policies": [{"type": "optimal"}, {"type": "shifted", "eps": 0.5},
                              {"type": "shifted", "eps": -0.5}]},
    "multi_asset": {"correlation": [[1.0, 0.5], [0.5, 1.0]], "record_every": 100},
    "market_maker": {"Q": 200},
}

PRESETS = {
    "fig1": {"problem": _FIG2_PROBLEM, "intensity": _TILDE},
    "fig2": {"problem": _FIG2_PROBLEM, "intensity": _EXP},
    "fig3": {"problem": _FIG2_PROBLEM, "intensity": _TILDE},
    "fig4": {"problem": _FIG2_PROBLEM, "intensity": _EXP, "constraint": {"delta_min": 0.0}},
    "fig5": {"problem": dict(_FIG2_PROBLEM, q0=800), "intensity": _EXP},
    "fig6": {"problem": dict(_FIG2_PROBLEM, q0=600, horizon_s=1200), "intensity": _EXP,
             "comparison": {"factor": 2}},
}


def preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    out = copy.deepcopy(_COMMON)
    out.update(copy.deepcopy(PRESETS[name]))
    return out


def deep_merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_NUM = {"type": "number"}

_PENALTY = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["constant"],
         "properties": {"constant": _NONNEG}},
        {"type": "object", "additionalProperties": False, "required": ["table"],
         "properties": {"table": {"type": "array", "minItems": 1,
                                  "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                            "items": _NONNEG}}}},
    ]
}

_INTENSITY = {
    "type": "object", "minProperties": 1, "maxProperties": 1, "additionalProperties": False,
    "properties": {
        "exponential": {"type": "object", "additionalProperties": False, "required": ["A", "k"],
                        "properties": {"A": _POS, "k": _POS}},
        "tabulated": {"type": "object", "additionalProperties": False, "required": ["file"],
                      "properties": {"file": {"type": "string"},
                                     "left_extension": {"enum": ["constant", "exponential"]},
                                     "left_slope": {"type": "number", "exclusiveMaximum": 0},
                                     "scale": _POS}},
        "figure1_tilde": {"type": "object", "additionalProperties": False,
                          "properties": {"A": _POS, "k": _POS}},
    },
}

_PROBLEM = {
    "type": "object", "additionalProperties": False,
    "required": ["q0", "delta_size", "horizon_s", "gamma"],
    "properties": {"q0": _POS, "delta_size": _POS, "horizon_s": _POS, "mu": _NUM,
                   "sigma": _NONNEG, "gamma": _POS, "penalty": _PENALTY},
}

_ASSET = {
    "type": "object", "additionalProperties": False, "required": ["q0", "delta_size"],
    "properties": {"q0": _POS, "delta_size": _POS, "mu": _NUM, "sigma": _NONNEG,
                   "penalty": _PENALTY, "intensity": _INTENSITY},
}

SCHEMA = {
    "type": "object", "additionalProperties": False, "required": ["problem", "intensity"],
    "properties": {
        "problem": _PROBLEM,
        "intensity": _INTENSITY,
        "solver": {"type": "object", "additionalProperties": False,
                   "properties": {"dt": _POS, "scheme": {"enum": ["euler", "rk4"]}}},
        "constraint": {"type": "object", "additionalProperties": False, "required": ["delta_min"],
                       "properties": {"delta_min": _NUM}},
        "asymptotic": {"type": "object", "additionalProperties": False, "properties": {}},
        "limit": {"type": "object", "additionalProperties": False,
                  "properties": {"dq": _POS, "dt": _POS,
                                 "deltas": {"type": "array", "minItems": 1, "items": _POS}}},
        "comparison": {"type": "object", "additionalProperties": False,
                       "properties": {"factor": {"type": "integer", "minimum": 2}}},
        "simulate": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "paths": {"type": "integer", "minimum": 1}, "dt": _POS,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "x0": _NUM, "s0": _NUM, "dump_paths": {"type": "boolean"},
                "policies": {"type": "array", "minItems": 1, "items": {
                    "oneOf": [
                        {"type": "object", "additionalProperties": False, "required": ["type"],
                         "properties": {"type": {"const": "optimal"}}},
                        {"type": "object", "additionalProperties": False,
                         "required": ["type", "eps"],
                         "properties": {"type": {"const": "shifted"}, "eps": _NUM}},
                        {"type": "object", "additionalProperties": False,
                         "required": ["type", "offset"],
                         "properties": {"type": {"const": "constant"}, "offset": _NUM}},
                    ]}},
            }},
        "multi_asset": {
            "type": "object", "additionalProperties": False,
            "properties": {"assets": {"type": "array", "minItems": 1, "items": _ASSET},
                           "correlation": {"type": "array", "items": {"type": "array", "items": _NUM}},
                           "node_cap": {"type": "integer", "minimum": 1},
                           "record_every": {"type": "integer", "minimum": 1}}},
        "market_maker": {"type": "object", "additionalProperties": False, "required": ["Q"],
                         "properties": {"Q": _POS}},
    },
}
