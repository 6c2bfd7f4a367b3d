"""Traffic Equations of the random walk: functionals, solutions, drift and
harmonic-measure marginals.

Vectors indexed by generators are numpy arrays in the alphabet order of
the :class:`~zeroqueue.algebra.PairSpec`.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .algebra import IDENTITY_CODE, IRREDUCIBLE_CODE, PairSpec, is_normal
from .errors import AlgebraError, SolverError

log = logging.getLogger(__name__)

DENOM_GUARD = 1e-300
DEDUP_RADIUS = 1e-8
RESIDUAL_TOL = 1e-9
SUPPORT_FLOOR = 1e-9
SUPPORT_MAX_ITER = 5000


class SupportWarning(UserWarning):
    pass


def class_distribution(pair: PairSpec, nu) -> np.ndarray:
    """Validate a class distribution (mapping label -> prob, or a sequence in
    alphabet order) and return it as an exactly normalized array."""
    if isinstance(nu, Mapping):
        unknown = set(nu) - set(pair.labels)
        if unknown:
            raise AlgebraError(f"nu mentions unknown generators {sorted(unknown)}")
        arr = np.array([float(nu.get(x, 0.0)) for x in pair.labels])
    else:
        arr = np.asarray(nu, dtype=float).copy()
        if arr.shape != (pair.size,):
            raise AlgebraError(f"nu has {arr.size} entries, expected {pair.size}")
    if (arr < 0).any() or not np.isfinite(arr).all():
        raise AlgebraError("nu must be nonnegative and finite")
    total = arr.sum()
    if abs(total - 1.0) > 1e-9:
        raise AlgebraError(f"nu sums to {total!r}, not 1")
    arr /= total
    if not support_generates(pair, np.flatnonzero(arr > 0)):
        warnings.warn("support of nu does not generate the monoid", SupportWarning, stacklevel=2)
    return arr


def support_generates(pair: PairSpec, support: Iterable[int]) -> bool:
    reached = set(int(a) for a in support)
    grew = True
    while grew:
        grew = False
        for a, b in itertools.product(list(reached), repeat=2):
            c = int(pair.table[a, b])
            if c >= 0 and c not in reached:
                reached.add(c)
                grew = True
    return len(reached) == pair.size


class Structure:
    """Arrays derived from (pair, nu) used by every equation in the package.

    ``right[a, b] = 1`` iff ``a*b`` is irreducible; ``merge[c, d]`` is the
    total class probability of the ``b`` with ``b*d = c``; ``cancel[d]``
    is the total class probability of the ``b`` with ``b*d = 1``.
    """

    def __init__(self, pair: PairSpec, nu):
        self.pair = pair
        self.nu = nu if isinstance(nu, np.ndarray) and nu.shape == (pair.size,) else class_distribution(pair, nu)
        n = pair.size
        t = pair.table
        self.right = (t == IRREDUCIBLE_CODE).astype(float)
        self.merge = np.zeros((n, n))
        self.cancel = np.zeros(n)
        for b, d in itertools.product(range(n), repeat=2):
            c = t[b, d]
            if c == IDENTITY_CODE:
                self.cancel[d] += self.nu[b]
            elif c >= 0:
                self.merge[c, d] += self.nu[b]

    def right_mass(self, x: np.ndarray) -> np.ndarray:
        """``x(Right(a))`` for every ``a``."""
        return self.right @ x

    def cancel_ratio(self, x: np.ndarray) -> np.ndarray:
        """``sum_{d in Left(a)} cancel(d) x(d) / x(Right(d))`` for every ``a``."""
        rm = self.right_mass(x)
        safe = rm >= DENOM_GUARD
        ratio = np.zeros_like(x)
        ratio[safe] = self.cancel[safe] * x[safe] / rm[safe]
        return self.right.T @ ratio

    def functionals(self, x: np.ndarray) -> tuple[float, float, float]:
        a = float(self.nu @ self.right_mass(x))
        b = float(self.merge.sum(axis=0) @ x)
        c = float(self.cancel @ x)
        return a, b, c

    def te_rhs(self, x: np.ndarray) -> np.ndarray:
        return self.nu * self.right_mass(x) + self.merge @ x + x * self.cancel_ratio(x)

    def te_residual(self, x: np.ndarray) -> float:
        return float(np.max(np.abs(x - self.te_rhs(x))))


@dataclass(frozen=True)
class Functionals:
    A: float
    B: float
    C: float


@dataclass(frozen=True)
class TESolution:
    r_hat: np.ndarray
    residual: float
    iterations: int = 0

    def as_dict(self, pair: PairSpec) -> dict[str, float]:
        return dict(zip(pair.labels, self.r_hat.tolist()))


def functionals(pair: PairSpec, nu, x) -> Functionals:
    s = Structure(pair, nu)
    return Functionals(*s.functionals(np.asarray(x, dtype=float)))


def iterate_fixed_point(f, x0: np.ndarray, support: np.ndarray | None = None, theta: float = 0.5,
                        tol: float = 1e-12, max_iter: int = 100_000,
                        floor: float = 0.0) -> tuple[np.ndarray, int, bool]:
    """Damped iteration ``x <- (1-theta) x + theta f(x)`` on the simplex.

    With ``support`` (boolean mask) the iterate is kept at zero off the
    support. A run is abandoned once a supported coordinate drops below
    ``floor``: its limit lies on a smaller support, solved separately.
    Returns ``(x, iterations, converged)``.
    """
    x = np.array(x0, dtype=float)
    if support is not None:
        x[~support] = 0.0
    x /= x.sum()
    for k in range(1, max_iter + 1):
        fx = f(x)
        if not np.isfinite(fx).all():
            return x, k, False
        nxt = (1.0 - theta) * x + theta * fx
        if support is not None:
            nxt[~support] = 0.0
        s = nxt.sum()
        if s <= 0:
            return x, k, False
        nxt /= s
        step = float(np.max(np.abs(nxt - x)))
        x = nxt
        if step < tol:
            return x, k, True
        if floor > 0 and (x[support] if support is not None else x).min() < floor:
            return x, k, False
    return x, max_iter, False


def closed_supports(pair: PairSpec, limit: int = 12) -> list[np.ndarray]:
    """Boolean masks of the nonempty supports S with ``a in S => Right(a) meets S``.

    Exhaustive when ``|Sigma| <= limit``, otherwise only the full alphabet.
    """
    n = pair.size
    if n > limit:
        return [np.ones(n, dtype=bool)]
    out = []
    for bits in range(1, 2 ** n):
        mask = np.array([(bits >> i) & 1 for i in range(n)], dtype=bool)
        members = np.flatnonzero(mask)
        if all(any(mask[b] for b in pair.right[a]) for a in members):
            out.append(mask)
    return out


def default_starts(n: int) -> list[np.ndarray]:
    starts = [np.full(n, 1.0 / n)]
    if n > 1:
        for k in range(n):
            x = np.full(n, 0.1 / (n - 1))
            x[k] = 0.9
            starts.append(x)
    return starts


def _dedup(points: list, key) -> list:
    kept = []
    for p in points:
        if all(np.max(np.abs(key(p) - key(q))) > DEDUP_RADIUS for q in kept):
            kept.append(p)
    return kept


def multi_start(pair: PairSpec, f, residual, tol: float, max_iter: int,
                starts: Sequence[np.ndarray] | None, theta: float,
                residual_tol: float) -> list[tuple[np.ndarray, float, int]]:
    """Run the damped iteration of ``f`` from every start (and, for general
    pairs, on every closed support); keep converged points whose
    ``residual`` is below ``residual_tol``, deduplicated."""
    n = pair.size
    runs = [(x0, None, max_iter) for x0 in (starts if starts is not None else default_starts(n))]
    floor = 0.0
    if not pair.is_plain and starts is None:
        runs += [(np.ones(n), mask, min(max_iter, SUPPORT_MAX_ITER)) for mask in closed_supports(pair)]
        floor = SUPPORT_FLOOR
    found = []
    any_converged = False
    for x0, mask, cap in runs:
        x, its, ok = iterate_fixed_point(f, x0, mask, theta, tol, cap, floor)
        any_converged |= ok
        if ok:
            res = residual(x)
            if res < residual_tol:
                found.append((x, res, its))
    if not any_converged:
        raise SolverError(f"fixed-point iteration did not converge within {max_iter} iterations from any start")
    return _dedup(found, lambda t: t[0])


def solve_te(pair: PairSpec, nu, tol: float = 1e-12, max_iter: int = 100_000,
             starts: Sequence[np.ndarray] | None = None, theta: float = 0.5,
             residual_tol: float = RESIDUAL_TOL) -> list[TESolution]:
    """All solutions of the Traffic Equations found from a multi-start set.

    Plain pairs have a unique admissible solution; finding several distinct
    ones raises :class:`SolverError`. General pairs are also solved on
    every closed support so boundary solutions are reported.
    """
    s = Structure(pair, nu)
    found = multi_start(pair, s.te_rhs, s.te_residual, tol, max_iter, starts, theta, residual_tol)
    sols = [TESolution(x, res, its) for x, res, its in found]
    if pair.is_plain:
        sols = [t for t in sols if (t.r_hat > 0).all()]
        if len(sols) != 1:
            raise SolverError(f"plain triple produced {len(sols)} admissible TE solutions; expected exactly one")
    return sols


def drift(pair: PairSpec, nu, te: TESolution, tol: float = RESIDUAL_TOL) -> float:
    """Drift of the random walk, computed term by term and cross-checked against A - C."""
    s = Structure(pair, nu)
    r = te.r_hat
    if te.residual >= tol:
        raise SolverError(f"TE residual {te.residual:.3g} too large for a drift evaluation")
    rm = s.right_mass(r)
    n = pair.size
    direct = 0.0
    for a in range(n):
        cancelled = sum(r[b] for b in range(n) if pair.table[a, b] == IDENTITY_CODE)
        direct += s.nu[a] * (rm[a] - cancelled)
    A, _, C = s.functionals(r)
    if abs(direct - (A - C)) > 1e-10:
        raise SolverError(f"drift formulas disagree: {direct!r} vs {A - C!r}")
    return direct


def walk_drift(pair: PairSpec, nu, solutions: Sequence[TESolution] | None = None) -> float:
    """Drift of the random walk.

    Plain triples have a single TE solution. General pairs may have
    several; the non-escaping ones give smaller (even negative) values of
    ``A - C``, so the largest value over all solutions is the drift.
    """
    sols = solve_te(pair, nu) if solutions is None else solutions
    return max(drift(pair, nu, t) for t in sols)


def harmonic_marginal(pair: PairSpec, te: TESolution, u: Sequence[int]) -> float:
    """Harmonic-measure mass of the cylinder of limit words starting with ``u`` (``u[0]`` sits at the root)."""
    if not pair.is_plain:
        raise AlgebraError("harmonic marginals are defined for plain triples only")
    u = tuple(u)
    if not u:
        return 1.0
    if not is_normal(pair, u):
        raise AlgebraError(f"prefix {pair.format(u)} is not in normal form")
    r = te.r_hat
    rm = pair.right_matrix @ r
    out = r[u[-1]]
    for a in u[:-1]:
        if rm[a] <= 0:
            raise SolverError(f"zero Next-mass for {pair.labels[a]}")
        out *= r[a] / rm[a]
    return float(out)
