"""Exact verification suites on built-in tiny instances.

Each suite returns a list of oracle reports (one per instance).  Instances
can be narrowed with single ``p``, ``beta`` or ``L`` values.
"""

from __future__ import annotations

import itertools

import numpy as np

from . import oracle
from .dynamics import make_rng, run_coupled
from .gibbs import FLOOR, FLOOR_CEILING, FREE, ModelParams
from .lattice import HeightField

SUITES = ("peierls", "fkg", "sandwich", "detailed-balance", "coupling")

P_VALUES = (1.0, 1.5, 2.0, 3.0)

DEFAULT_INSTANCES = {
    "detailed-balance": {"L": [2], "n_plus": 2, "p": list(P_VALUES), "beta": [0.5, 2.0]},
    "fkg": {"L": [2], "n_plus": 2, "p": list(P_VALUES), "beta": [0.5, 2.0]},
    "sandwich": {"L": [2], "n_plus": 1, "p": list(P_VALUES), "beta": [0.5, 2.0]},
    "peierls": {"L": [3], "p": [1.0, 2.0, 3.0], "beta": [1.0, 2.0], "h": [1, 2], "max_perimeter": 8},
    "coupling": {"L": [8], "n_plus": 5, "p": list(P_VALUES), "beta": [1.0], "sweeps": 10_000},
}


def instances(suite: str, p=None, beta=None, L=None) -> dict:
    inst = {k: (list(v) if isinstance(v, list) else v) for k, v in DEFAULT_INSTANCES[suite].items()}
    if p is not None:
        inst["p"] = [float(p)]
    if beta is not None:
        inst["beta"] = [float(beta)]
    if L is not None:
        inst["L"] = [int(L)]
    return inst


def _grid(inst):
    return itertools.product(inst["L"], inst["p"], inst["beta"])


def detailed_balance_suite(inst: dict) -> list[dict]:
    out = []
    for L, p, beta in _grid(inst):
        m = oracle.enumerate_measure(ModelParams(p, beta, FLOOR_CEILING, inst["n_plus"]), L)
        res = oracle.detailed_balance_residual(m)
        out.append(oracle._report("detailed-balance", {"L": L, "p": p, "beta": beta, "n_plus": inst["n_plus"]},
                                  [{"max_residual": res, "tolerance": 1e-12, "pass": res <= 1e-12}]))
    return out


def fkg_events(measure) -> list:
    """Threshold events plus pairwise unions and intersections of thresholds at distinct sites."""
    base = oracle.threshold_events(measure)
    ev = list(base)
    for (n1, m1), (n2, m2) in itertools.combinations(base, 2):
        if n1.split(">=")[0] == n2.split(">=")[0]:
            continue
        ev.append((f"{n1}&{n2}", m1 & m2))
        ev.append((f"{n1}|{n2}", m1 | m2))
    return ev


def fkg_suite(inst: dict) -> list[dict]:
    out = []
    for L, p, beta in _grid(inst):
        m = oracle.enumerate_measure(ModelParams(p, beta, FLOOR_CEILING, inst["n_plus"]), L)
        out.append(oracle.verify_fkg(m, fkg_events(m)))
    return out


def sandwich_suite(inst: dict) -> list[dict]:
    out = []
    for L, p, beta in _grid(inst):
        ceil = oracle.enumerate_measure(ModelParams(p, beta, FLOOR_CEILING, inst["n_plus"]), L)
        floor = oracle.enumerate_measure(ModelParams(p, beta, FLOOR), L)
        out.append(oracle.verify_sandwich(floor, ceil))
    return out


def peierls_suite(inst: dict) -> list[dict]:
    out = []
    h = tuple(inst["h"])
    for L, p, beta in _grid(inst):
        tm = oracle.peierls_measure(ModelParams(p, beta, FREE), L, max(h))
        out.append(oracle.verify_peierls(tm, h, inst["max_perimeter"], nested=True))
    return out


def coupling_suite(inst: dict, seed: int = 0) -> list[dict]:
    out = []
    for L, p, beta in _grid(inst):
        n_plus = inst["n_plus"]
        params = ModelParams(p, beta, FLOOR_CEILING, n_plus)
        rng = make_rng(seed, 31, L, int(p * 1000), int(beta * 1000))
        mid = np.sort(rng.integers(0, n_plus + 1, size=(2, L, L)), axis=0)
        fields = [HeightField.constant(L, 0), HeightField.from_array(mid[0]), HeightField.from_array(mid[1]),
                  HeightField.constant(L, n_plus)]
        n_steps = inst["sweeps"] * L * L
        final, violations, first = run_coupled(fields, params, n_steps, rng, check=True)
        coalesced = bool(final[0] == final[-1])
        out.append(oracle._report(
            "coupling", {"L": L, "p": p, "beta": beta, "n_plus": n_plus, "replicas": len(fields),
                         "steps": n_steps, "seed": seed},
            [{"order_violations": violations, "first_violation_step": first, "coalesced": coalesced,
              "pass": violations == 0}]))
    return out


def run_suite(suite: str, inst: dict, seed: int = 0) -> list[dict]:
    if suite == "detailed-balance":
        return detailed_balance_suite(inst)
    if suite == "fkg":
        return fkg_suite(inst)
    if suite == "sandwich":
        return sandwich_suite(inst)
    if suite == "peierls":
        return peierls_suite(inst)
    if suite == "coupling":
        return coupling_suite(inst, seed)
    raise ValueError(f"unknown suite {suite!r}")
