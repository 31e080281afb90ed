"""JSON Schemas (draft 2020-12) for the reports written by the command line."""

_pair = {"type": "array", "items": {"type": ["number", "null"]}, "minItems": 2, "maxItems": 2}
_cycle = {
    "type": "object",
    "required": ["period", "point", "multiplier", "residual"],
    "properties": {"period": {"type": "integer", "minimum": 1}, "point": _pair,
                   "multiplier": _pair, "residual": {"type": "number"}},
}
_disk = {"type": "object", "required": ["center", "radius"],
         "properties": {"center": _pair, "radius": {"type": "number", "minimum": 0}}}
_class = {
    "type": "object",
    "required": ["tag", "budget"],
    "properties": {"tag": {"enum": ["attracting", "escaping", "nr_candidate", "undecided"]},
                   "budget": {"type": "integer"}, "cycle": _cycle},
}
_counts = {"type": "object",
           "required": ["n_attracting", "n_escaping", "n_candidate", "n_undecided",
                        "n_hit_annulus"],
           "additionalProperties": {"type": "integer", "minimum": 0}}
_stats = {"type": "object",
          "required": ["radius", "n", "n_used", "sup_ratio_dev", "affine_constant_lo",
                       "affine_constant_hi", "pairs_sampled", "pairs_excluded"]}

RESULTS = {
    "orbit": {
        "type": "object", "required": ["orbit", "ledger"],
        "properties": {
            "orbit": {"type": "object", "required": ["lambda", "points", "status", "policy"]},
            "ledger": {"type": "object",
                       "required": ["columns", "rows", "stop_reason", "levin"]},
        },
    },
    "classify": _class,
    "find-hyp": {
        "type": "object", "required": ["lambda", "cycle", "certificate", "distance_to_seed"],
        "properties": {
            "cycle": _cycle, "distance_to_seed": {"type": "number", "minimum": 0},
            "certificate": {"type": "object",
                            "required": ["period", "initial", "final", "margin", "chain"],
                            "properties": {"initial": _disk, "final": _disk,
                                           "chain": {"type": "array", "items": _disk},
                                           "margin": {"type": "number",
                                                      "exclusiveMinimum": 0}}},
        },
    },
    "density": {
        "type": "object",
        "required": ["lambda0", "delta", "radii", "budgets", "samples", "seed", "cells",
                     "candidate_fraction"],
        "properties": {"cells": {"type": "array",
                                 "items": {"type": "array", "items": _counts}}},
    },
    "motion": {"type": "object",
               "required": ["lambda0", "lambda1", "base_point", "tracked_point",
                            "pullback_depth", "homotopy_steps", "conjugacy_residual", "chain"]},
    "distortion": {"type": "object", "required": ["lambda0", "stats"],
                   "properties": {"stats": {"type": "array", "items": _stats}}},
    "render": {"type": "object", "required": ["plane", "rect", "sha256", "path"]},
    "time-to-scale": {"type": "object", "required": ["lambda0", "radius", "scale", "n"]},
}


def report_schema(command: str) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["schema", "command", "config", "result"],
        "properties": {
            "schema": {"const": "explab/1"},
            "command": {"const": command},
            "config": {"type": "object"},
            "result": RESULTS[command],
        },
    }
