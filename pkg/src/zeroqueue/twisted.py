"""Twisted Traffic Equations, stability and the product-form stationary law."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import PairSpec, Word, is_normal
from .errors import AlgebraError, RegimeError, SolverError
from .generator import predecessors, transitions
from .oracle import enumerate_words
from .traffic import (RESIDUAL_TOL, Structure, _dedup, multi_start, solve_te, walk_drift)

log = logging.getLogger(__name__)

STABILITY_EPS = 1e-9
ADMISSIBILITY_TOL = 1e-10


def _check_rates(lam: float, mu: float) -> None:
    if not (lam > 0 and mu > 0):
        raise ValueError(f"arrival and service rates must be positive (got lambda={lam}, mu={mu})")


def load_of(s: Structure, lam: float, mu: float, x: np.ndarray) -> float:
    """``lambda A(x) / (mu + lambda C(x))``."""
    A, _, C = s.functionals(x)
    return lam * A / (mu + lam * C)


def tte_defect(s: Structure, lam: float, mu: float, eta: float, x: np.ndarray) -> np.ndarray:
    """Left minus right-hand side of the Twisted Traffic Equations at ``(eta, x)``."""
    rhs = (eta ** 2 * mu * x + lam * s.nu * s.right_mass(x) + eta * lam * (s.merge @ x)
           + eta ** 2 * lam * x * s.cancel_ratio(x))
    return eta * (lam + mu) * x - rhs


def _psi(s: Structure, lam: float, mu: float, x: np.ndarray) -> np.ndarray:
    A, _, C = s.functionals(x)
    if A <= 0:
        return np.full_like(x, np.nan)
    eta = lam * A / (mu + lam * C)
    return (eta * (mu * x + lam * x * s.cancel_ratio(x)) + lam * (s.merge @ x)
            + lam * s.nu * s.right_mass(x) / eta) / (lam + mu)


def psi_map(pair: PairSpec, nu, lam: float, mu: float, x) -> np.ndarray:
    """The fixed-point map whose fixed points are the admissible TTE solutions."""
    _check_rates(lam, mu)
    s = Structure(pair, nu)
    x = np.asarray(x, dtype=float)
    A, _, _ = s.functionals(x)
    if A <= 0:
        raise SolverError("zero Right-set mass: the map is undefined at this point")
    return _psi(s, lam, mu, x)


@dataclass(frozen=True)
class TTESolution:
    rho: float
    r: np.ndarray
    q: np.ndarray
    residual: float
    support: frozenset
    iterations: int = 0

    def as_dict(self, pair: PairSpec) -> dict[str, float]:
        return dict(zip(pair.labels, self.r.tolist()))


def make_solution(pair: PairSpec, nu, lam: float, mu: float, rho: float, r,
                  iterations: int = 0) -> TTESolution:
    """Wrap a candidate ``(rho, r)``; the residual is evaluated, nothing is enforced."""
    s = Structure(pair, nu)
    r = np.asarray(r, dtype=float)
    rm = s.right_mass(r)
    q = np.divide(r, rm, out=np.zeros_like(r), where=(r > 0) & (rm > 0))
    res = float(np.max(np.abs(tte_defect(s, lam, mu, rho, r))))
    return TTESolution(float(rho), r, q, res, frozenset(np.flatnonzero(r > 0).tolist()), iterations)


def support_closed(pair: PairSpec, r: np.ndarray) -> bool:
    rm = pair.right_matrix @ r
    return bool(np.all((r <= 0) | (rm > 0)))


def solve_tte(pair: PairSpec, nu, lam: float, mu: float, tol: float = 1e-12,
              max_iter: int = 100_000, starts: Sequence[np.ndarray] | None = None,
              theta: float = 0.5, residual_tol: float = RESIDUAL_TOL) -> list[TTESolution]:
    """All admissible solutions of the Twisted Traffic Equations found by multi-start iteration.

    The load is always recomputed from ``r`` (never iterated). For plain
    triples in the stable regime exactly one solution must come out.
    """
    _check_rates(lam, mu)
    s = Structure(pair, nu)

    def residual(x):
        if s.functionals(x)[0] <= 0:
            return np.inf
        return float(np.max(np.abs(tte_defect(s, lam, mu, load_of(s, lam, mu, x), x))))

    found = multi_start(pair, lambda x: _psi(s, lam, mu, x), residual, tol, max_iter,
                        starts, theta, residual_tol)
    sols = []
    for x, _, its in found:
        if not support_closed(pair, x):
            continue
        if pair.is_plain and not (x > 0).all():
            continue
        sols.append(make_solution(pair, s.nu, lam, mu, load_of(s, lam, mu, x), x, its))

    if pair.is_plain:
        gamma = walk_drift(pair, s.nu)
        verdict = classify(lam, mu, gamma)
        if verdict is Stability.NULL_RECURRENT:
            r_hat = solve_te(pair, s.nu)[0].r_hat
            sols = _dedup(sols + [make_solution(pair, s.nu, lam, mu, 1.0, r_hat)], lambda t: t.r)
        if verdict is Stability.ERGODIC and len(sols) != 1:
            raise SolverError(f"plain stable triple produced {len(sols)} admissible TTE solutions")
    if not sols:
        raise SolverError("no admissible TTE solution found")
    return sorted(sols, key=lambda t: t.rho)


class Stability(enum.Enum):
    ERGODIC = "Ergodic"
    NULL_RECURRENT = "NullRecurrent"
    TRANSIENT = "Transient"


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: Stability
    margin: float


def classify(lam: float, mu: float, gamma_hat: float, eps: float = STABILITY_EPS) -> Stability:
    if gamma_hat < 0:
        raise ValueError("drift must be nonnegative")
    load = lam * gamma_hat
    if load < mu * (1 - eps):
        return Stability.ERGODIC
    if load > mu * (1 + eps):
        return Stability.TRANSIENT
    return Stability.NULL_RECURRENT


def stability(lam: float, mu: float, gamma_hat: float, eps: float = STABILITY_EPS) -> StabilityVerdict:
    return StabilityVerdict(classify(lam, mu, gamma_hat, eps), lam * gamma_hat - mu)


@dataclass(frozen=True)
class StationaryLaw:
    """Product-form stationary distribution attached to an admissible solution."""

    pair: PairSpec
    solution: TTESolution

    def __post_init__(self):
        if not self.solution.rho < 1:
            raise RegimeError(f"load {self.solution.rho} >= 1: no stationary distribution")

    @property
    def normalizer(self) -> float:
        return 1.0 - self.solution.rho

    def in_support(self, w: Word) -> bool:
        return all(a in self.solution.support for a in w)

    def probability(self, w: Word) -> float:
        return stationary_probability(self, w)


def stationary_probability(law: StationaryLaw, w: Word) -> float:
    """``(1-rho) rho^k q(s_1) ... q(s_{k-1}) r(s_k)`` with ``s_1`` the back-end letter.

    Words using letters outside the support of ``r`` get probability 0.
    """
    w = tuple(w)
    if not is_normal(law.pair, w):
        raise AlgebraError(f"{law.pair.format(w)} is not in normal form")
    sol = law.solution
    if not w:
        return law.normalizer
    if not law.in_support(w):
        return 0.0
    p = law.normalizer * sol.rho ** len(w) * sol.r[w[-1]]
    for a in w[:-1]:
        p *= sol.q[a]
    return float(p)


def level_mass(law: StationaryLaw, n: int) -> float:
    return law.normalizer * law.solution.rho ** n


def departure_rate(law: StationaryLaw, mu: float) -> float:
    return law.solution.rho * mu


def product_form_weight(sol, w: Word) -> float:
    """Unnormalized product-form weight ``rho^k q(s_1)...q(s_{k-1}) r(s_k)``."""
    if not w:
        return 1.0
    p = sol.rho ** len(w) * sol.r[w[-1]]
    for a in w[:-1]:
        p *= sol.q[a]
    return float(p)


def balance_residual(pair: PairSpec, nu, lam: float, mu: float, solution, N: int) -> float:
    """Largest global-balance defect of the product form over words of length <= N-1.

    Rows and columns come from the untruncated generator with boundary
    vector ``solution.r``; ``solution`` needs ``rho``, ``r`` and ``q``.
    """
    s = Structure(pair, nu)
    r = np.asarray(solution.r, dtype=float)
    scale = (1.0 - solution.rho) if solution.rho < 1 else 1.0
    weight = {}

    def p(w):
        if w not in weight:
            weight[w] = scale * product_form_weight(solution, w)
        return weight[w]

    worst = 0.0
    for u in enumerate_words(pair, N - 1, cap=max(N, 10)):
        out_flow = p(u) * sum(transitions(pair, s.nu, lam, mu, r, u).values())
        in_flow = sum(p(v) * transitions(pair, s.nu, lam, mu, r, v).get(u, 0.0)
                      for v in predecessors(pair, u))
        worst = max(worst, abs(out_flow - in_flow))
    return worst
