"""Minimal f^q, entropy and variance martingale measures for exponential Levy models."""

import json

from . import _core
from ._core import Model, QmmmError, g_q, load_model, parse_model

__all__ = [
    "Model",
    "QmmmError",
    "check_divergence",
    "check_martingale",
    "g_q",
    "load_model",
    "oracle",
    "parse_model",
    "solve",
    "sweep",
    "validate",
    "vmmm_crosscheck",
]


def validate(model):
    return json.loads(_core.validate(model))


def solve(model, kind="qmmm", q=2.0):
    return json.loads(_core.solve(model, kind, q))


def vmmm_crosscheck(model):
    return json.loads(_core.vmmm_crosscheck(model))


def sweep(model, grid=None, probes=None):
    return json.loads(_core.sweep(model, grid, probes))


def oracle(model, q=2.0):
    return json.loads(_core.oracle(model, q))


def check_divergence(model, kind="qmmm", q=2.0, n_paths=100000, seed=1):
    return json.loads(_core.check_divergence(model, kind, q, n_paths, seed))


def check_martingale(model, kind="qmmm", q=2.0, n_paths=100000, seed=1, mode="direct"):
    return json.loads(_core.check_martingale(model, kind, q, n_paths, seed, mode))
