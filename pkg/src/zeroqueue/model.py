"""Model files: a JSON document describing (pair, nu, lambda, mu, r).

Schema::

    {
      "factors": [{"kind": "free_monoid", "letters": ["a"]},
                  {"kind": "free_group", "letters": ["b"], "inverses": ["B"]},
                  {"kind": "finite_monoid", "elements": ["1", "c"],
                   "table": [["1", "c"], ["c", "c"]]}],
      -- or --
      "custom": {"sigma": ["a", "b"], "table": [["*", "1"], ["*", "*"]]},
      "nu": {"a": "1/4", ...},
      "lambda": 1, "mu": 1,
      "r_boundary": {...},              optional
      "solver": {...}, "simulation": {...}   optional option blocks
    }

Probabilities may be decimals or ``"p/q"`` strings.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .algebra import (FiniteMonoid, FreeGroup, FreeMonoid, PairSpec, build_custom_pair,
                      build_pair)
from .errors import ZeroQueueError
from .traffic import class_distribution


class ModelError(ZeroQueueError, ValueError):
    """Malformed model file."""


SOLVER_KEYS = {"tol": float, "max_iter": int, "theta": float}
SIMULATION_KEYS = {"events": int, "warmup": int, "seed": int, "reps": int, "max_tracked_len": int}


def parse_probability(value) -> float:
    if isinstance(value, bool):
        raise ModelError(f"not a probability: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"cannot parse probability {value!r}") from exc
    raise ModelError(f"not a probability: {value!r}")


def _rate(doc: dict, key: str) -> float:
    if key not in doc:
        raise ModelError(f"missing field {key!r}")
    v = parse_probability(doc[key])
    if not v > 0:
        raise ModelError(f"{key} must be positive")
    return v


def _labels(doc: dict, key: str) -> tuple[str, ...]:
    v = doc.get(key)
    if not isinstance(v, list) or not all(isinstance(x, str) for x in v):
        raise ModelError(f"{key!r} must be a list of strings")
    return tuple(v)


def _table(doc: dict) -> tuple[tuple[str, ...], ...]:
    t = doc.get("table")
    if not isinstance(t, list) or not all(isinstance(row, list) for row in t):
        raise ModelError("'table' must be a list of rows")
    return tuple(tuple(str(x) for x in row) for row in t)


def _factor(doc: dict) -> dict:
    if not isinstance(doc, dict):
        raise ModelError("each factor must be an object")
    kind = doc.get("kind")
    if kind == "free_monoid":
        return {"kind": kind, "letters": _labels(doc, "letters")}
    if kind == "free_group":
        out = {"kind": kind, "letters": _labels(doc, "letters")}
        if "inverses" in doc:
            out["inverses"] = _labels(doc, "inverses")
        return out
    if kind == "finite_monoid":
        return {"kind": kind, "elements": _labels(doc, "elements"), "table": _table(doc)}
    raise ModelError(f"unknown factor kind {kind!r}")


def _options(doc: dict, key: str, allowed: dict) -> dict:
    block = doc.get(key, {})
    if not isinstance(block, dict):
        raise ModelError(f"{key!r} must be an object")
    unknown = set(block) - set(allowed)
    if unknown:
        raise ModelError(f"unknown {key} options {sorted(unknown)}")
    try:
        return {k: allowed[k](v) for k, v in sorted(block.items())}
    except (TypeError, ValueError) as exc:
        raise ModelError(f"bad {key} option: {exc}") from exc


@dataclass(frozen=True)
class Model:
    factors: tuple[dict, ...] | None
    custom: dict | None
    nu: dict[str, float]
    lam: float
    mu: float
    r_boundary: dict[str, float] | None = None
    solver: dict[str, Any] = field(default_factory=dict)
    simulation: dict[str, Any] = field(default_factory=dict)

    def pair(self) -> PairSpec:
        if self.custom is not None:
            return build_custom_pair(self.custom["sigma"], [list(r) for r in self.custom["table"]])
        built = []
        for f in self.factors:
            if f["kind"] == "free_monoid":
                built.append(FreeMonoid(f["letters"]))
            elif f["kind"] == "free_group":
                built.append(FreeGroup(f["letters"], f.get("inverses")))
            else:
                built.append(FiniteMonoid(f["elements"], f["table"]))
        return build_pair(built)

    def nu_vector(self, pair: PairSpec) -> np.ndarray:
        return class_distribution(pair, self.nu)

    def r_vector(self, pair: PairSpec) -> np.ndarray | None:
        if self.r_boundary is None:
            return None
        unknown = set(self.r_boundary) - set(pair.labels)
        if unknown:
            raise ModelError(f"r_boundary mentions unknown generators {sorted(unknown)}")
        r = np.array([self.r_boundary.get(x, 0.0) for x in pair.labels])
        if (r < 0).any() or abs(r.sum() - 1) > 1e-9:
            raise ModelError("r_boundary must be a probability vector")
        return r / r.sum()

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        if self.custom is not None:
            out["custom"] = {"sigma": list(self.custom["sigma"]),
                             "table": [list(r) for r in self.custom["table"]]}
        else:
            out["factors"] = [{k: (list(v) if k != "table" else [list(r) for r in v])
                               if isinstance(v, tuple) else v for k, v in f.items()}
                              for f in self.factors]
        out["nu"] = dict(self.nu)
        out["lambda"] = self.lam
        out["mu"] = self.mu
        if self.r_boundary is not None:
            out["r_boundary"] = dict(self.r_boundary)
        if self.solver:
            out["solver"] = dict(self.solver)
        if self.simulation:
            out["simulation"] = dict(self.simulation)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def parse_model(doc: dict) -> Model:
    if not isinstance(doc, dict):
        raise ModelError("model must be a JSON object")
    has_f, has_c = "factors" in doc, "custom" in doc
    if has_f == has_c:
        raise ModelError("give exactly one of 'factors' or 'custom'")
    factors = custom = None
    if has_f:
        if not isinstance(doc["factors"], list) or not doc["factors"]:
            raise ModelError("'factors' must be a nonempty list")
        factors = tuple(_factor(f) for f in doc["factors"])
    else:
        c = doc["custom"]
        if not isinstance(c, dict):
            raise ModelError("'custom' must be an object")
        custom = {"sigma": _labels(c, "sigma"), "table": _table(c)}
    nu = doc.get("nu")
    if not isinstance(nu, dict):
        raise ModelError("'nu' must map generator labels to probabilities")
    r = doc.get("r_boundary")
    if r is not None and not isinstance(r, dict):
        raise ModelError("'r_boundary' must map generator labels to probabilities")
    return Model(
        factors=factors,
        custom=custom,
        nu={str(k): parse_probability(v) for k, v in nu.items()},
        lam=_rate(doc, "lambda"),
        mu=_rate(doc, "mu"),
        r_boundary=None if r is None else {str(k): parse_probability(v) for k, v in r.items()},
        solver=_options(doc, "solver", SOLVER_KEYS),
        simulation=_options(doc, "simulation", SIMULATION_KEYS),
    )


def loads(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc}") from exc
    return parse_model(doc)


def load(path) -> Model:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc}") from exc
    return loads(text)
