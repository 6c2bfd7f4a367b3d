"""Ready-made pairs and class distributions used in docs, tests and the CLI."""
from __future__ import annotations

import numpy as np

from .algebra import (FreeGroup, FreeMonoid, PairSpec, build_custom_pair, build_pair,
                      cyclic_group, idempotent_monoid)


def mm1() -> tuple[PairSpec, np.ndarray]:
    """({a}*, {a}): the M/M/1 queue."""
    return build_pair([FreeMonoid(["a"])]), np.array([1.0])


def z3_star_z3(p: float = 0.25) -> tuple[PairSpec, np.ndarray]:
    """Z/3Z * Z/3Z with nu(a)=nu(b)=p, nu(a^2)=nu(b^2)=1/2-p."""
    pair = build_pair([cyclic_group(3, "a"), cyclic_group(3, "b")])
    q = 0.5 - p
    return pair, np.array([p, q, p, q])


def n_star_b(p: float) -> tuple[PairSpec, np.ndarray]:
    """{a}* * <b | b^2=b> with nu(a)=p."""
    return build_pair([FreeMonoid(["a"]), idempotent_monoid("b")]), np.array([p, 1.0 - p])


def n_star_z_star_b(p: float, q: float) -> tuple[PairSpec, np.ndarray]:
    """{a}* * F(b) * <c | c^2=c>, alphabet (a, b, b^-1, c)."""
    pair = build_pair([FreeMonoid(["a"]), FreeGroup(["b"]), idempotent_monoid("c")])
    return pair, np.array([p, q / 2, q / 2, 1.0 - p - q])


def z_pair(p: float) -> tuple[PairSpec, np.ndarray]:
    """F(a) with alphabet (a, a^-1) as a general 0-automatic pair; nu(a)=p."""
    pair = build_custom_pair(["a", "a^-1"], [["*", "1"], ["1", "*"]])
    return pair, np.array([p, 1.0 - p])


def z_star_c(p: float, c: float) -> tuple[PairSpec, np.ndarray]:
    """F(a) * {c}* with nu(a)=p(1-c), nu(a^-1)=(1-p)(1-c), nu(c)=c."""
    pair = build_pair([FreeGroup(["a"]), FreeMonoid(["c"])])
    return pair, np.array([p * (1 - c), (1 - p) * (1 - c), c])


def bicyclic(p: float) -> tuple[PairSpec, np.ndarray]:
    """<a, b | ab = 1> with nu(a)=p."""
    pair = build_custom_pair(["a", "b"], [["*", "1"], ["*", "*"]])
    return pair, np.array([p, 1.0 - p])


def bicyclic_star_c(p: float, q: float) -> tuple[PairSpec, np.ndarray]:
    """<a, b | ab = 1> * {c}* with nu = (p, q, 1-p-q)."""
    pair = build_custom_pair(["a", "b", "c"], [["*", "1", "*"], ["*", "*", "*"], ["*", "*", "*"]])
    return pair, np.array([p, q, 1.0 - p - q])
