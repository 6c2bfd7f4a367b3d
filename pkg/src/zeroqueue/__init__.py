"""Queues whose buffer content is an element of a monoid in normal form.

Modules: ``algebra`` (pairs, normal forms, buffering rule), ``traffic``
(random-walk traffic equations and drift), ``twisted`` (load equations,
stability, stationary law), ``qbd`` (matrix-geometric counterpart),
``simulate`` (event-driven simulation), ``oracle`` (truncated-generator
ground truth) and ``cli``.
"""
from .algebra import (FiniteMonoid, FreeGroup, FreeMonoid, PairSpec, arrive, build_custom_pair,
                      build_pair, cyclic_group, idempotent_monoid, is_normal, serve)
from .errors import AlgebraError, RegimeError, SolverError, ZeroQueueError
from .traffic import solve_te, walk_drift
from .twisted import Stability, StationaryLaw, classify, solve_tte, stability

__all__ = [
    "FiniteMonoid", "FreeGroup", "FreeMonoid", "PairSpec", "arrive", "build_custom_pair",
    "build_pair", "cyclic_group", "idempotent_monoid", "is_normal", "serve",
    "AlgebraError", "RegimeError", "SolverError", "ZeroQueueError",
    "solve_te", "walk_drift", "Stability", "StationaryLaw", "classify", "solve_tte", "stability",
]
