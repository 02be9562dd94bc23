"""Bundled problem specifications exercising every construction family.

Each preset is a complete problem spec (the same JSON documents the CLI
accepts from disk); ``lagrangeforge demo <name>`` runs the listed tasks.
"""
from __future__ import annotations

PRESETS: dict = {
    "free-particle": {
        "version": 1,
        "name": "free-particle",
        "equation": {"family": "standard", "a": "0", "b": "0", "c": "0"},
        "tasks": ["build", "verify", "integrate"],
        "integrate": {"x0": 0.0, "v0": 1.0, "t0": 0.0, "t1": 2.0,
                      "columns": ["t", "x", "v", "L", "E", "p"]},
    },
    "damped-oscillator": {
        "version": 1,
        "name": "damped-oscillator",
        # x'' + 0.1 x' + x = 0
        "equation": {"family": "standard", "a": "0", "b": "0.1", "c": "1.0*x"},
        "tasks": ["classify", "build", "verify", "integrate"],
        "integrate": {"x0": 1.0, "v0": 0.0, "t0": 0.0, "t1": 12.0,
                      "columns": ["t", "x", "v", "E", "p"]},
    },
    "accreting-mass": {
        "version": 1,
        "name": "accreting-mass",
        # kinetic factor m(t) = e^{0.3 t} grows while the spring stays fixed
        "equation": {"family": "standard", "a": "0", "b": "0.3", "c": "1.0*x"},
        "tasks": ["build", "verify", "integrate"],
        "integrate": {"x0": 1.0, "v0": 0.0, "t0": 0.0, "t1": 8.0,
                      "columns": ["t", "x", "v", "E", "p"]},
    },
    "lienard": {
        "version": 1,
        "name": "lienard",
        # b = k x with the force completed so the cubic-restoring constraint
        # holds; lam is the free completion constant
        "equation": {"family": "reciprocal-autonomous",
                     "a": "0", "b": "1.0*x", "lam": 0.9},
        "domain": {"x": [0.2, 1.2], "v": [0.2, 2.0], "t": [0.0, 1.5]},
        "tasks": ["build", "verify"],
    },
    "airy": {
        "version": 1,
        "name": "airy",
        # x'' = t x on t in [0.1, 2]; numeric auxiliary profile
        "equation": {"family": "reciprocal-linear",
                     "b": "0", "c": "-1.0*t", "t_span": [0.1, 2.0]},
        "domain": {"x": [0.5, 1.5], "v": [0.2, 2.0], "t": [0.1, 2.0],
                   "grid": [4, 4, 6], "n_random": 40, "seed": 23},
        "options": {"verify_tol": 1e-5},
        "tasks": ["build", "verify"],
    },
    "quadratic-drag": {
        "version": 1,
        "name": "quadratic-drag",
        # x'' + 0.4 x x'^2 + 0.3 x' = 0 with separated coefficients
        "equation": {"family": "reciprocal-nu2", "a": "0.4*x", "b": "0.3"},
        "tasks": ["build", "verify"],
    },
    "relativistic": {
        "version": 1,
        "name": "relativistic",
        # saturating kinetic response with limiting speed 3
        "equation": {"family": "generalized-kinetic",
                     "f": "-0.4",
                     "R": "(1 - v^2/9)^1.5",
                     "psi": "-9*(1 - v^2/9)^0.5"},
        "domain": {"x": [-1.0, 1.0], "v": [0.3, 2.2], "t": [0.0, 1.5]},
        "tasks": ["build", "verify", "integrate"],
        "integrate": {"x0": 0.0, "v0": 2.0, "t0": 0.0, "t1": 3.0,
                      "columns": ["t", "x", "v", "L", "E", "p"]},
    },
    "n-parameter": {
        "version": 1,
        "name": "n-parameter",
        # velocity-power member n = 3 for x'' + x'^2 = 0; the built value
        # is itself conserved along the motion
        "equation": {"family": "n-parameter", "n": 3.0, "k": 1.0},
        "tasks": ["build", "verify", "integrate"],
        "integrate": {"x0": 0.0, "v0": 1.0, "t0": 0.0, "t1": 5.0,
                      "columns": ["t", "x", "v", "L"]},
    },
    "multiL": {
        "version": 1,
        "name": "multiL",
        # six inequivalent-looking constructions for x'' + 0.5 x' = 0
        "equation": {"family": "multiL", "k": 0.5},
        "domain": {"x": [-1.0, 1.0], "v": [0.2, 2.0], "t": [0.0, 2.0]},
        "tasks": ["build", "compare"],
    },
    "log-velocity": {
        "version": 1,
        "name": "log-velocity",
        # boundary member v (1 - ln v) e^{k x} against the quadratic-kinetic
        # member v^2 e^{2 k x} for x'' + k x'^2 = 0
        "equation": {"family": "log-velocity", "k": 1.0},
        "domain": {"x": [-1.0, 1.0], "v": [0.2, 2.0], "t": [0.0, 1.5]},
        "tasks": ["build", "compare"],
    },
}


def preset_names() -> list:
    return sorted(PRESETS)
