"""Lumped quasi-birth-and-death view of the queue and its matrix-geometric solution.

The lumped state is ``0`` (empty buffer) or ``(n, a)``: ``n`` customers
with back-end class ``a``. When a back-end cancellation exposes a letter
that the lumped state forgot, it is resampled from its conditional law
under the candidate product form, ``r(b) / r(Right(a))`` for ``b`` in
Right(a). Blocks follow the usual ordering: ``A0`` up one level, ``A1``
within a level, ``A2`` down one level.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .algebra import PairSpec
from .errors import RegimeError, SolverError
from .traffic import Structure

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class QBDBlocks:
    a: float
    Avec: np.ndarray
    B: np.ndarray
    A0: np.ndarray
    A1: np.ndarray
    A2: np.ndarray

    def assemble(self, levels: int) -> np.ndarray:
        """Generator truncated to levels ``0..levels`` (the top level keeps its ``A0`` mass off-matrix)."""
        m = len(self.Avec)
        size = 1 + levels * m
        Q = np.zeros((size, size))
        Q[0, 0] = self.a
        Q[0, 1:1 + m] = self.Avec
        for n in range(1, levels + 1):
            lo = 1 + (n - 1) * m
            Q[lo:lo + m, lo:lo + m] = self.A1
            if n == 1:
                Q[lo:lo + m, 0] = self.B
            else:
                Q[lo:lo + m, lo - m:lo] = self.A2
            if n < levels:
                Q[lo:lo + m, lo + m:lo + 2 * m] = self.A0
        return Q


def build_blocks(pair: PairSpec, nu, lam: float, mu: float, r) -> QBDBlocks:
    r = np.asarray(r, dtype=float)
    if (r <= 0).any():
        raise SolverError("the lumping weights need a strictly positive boundary vector r")
    s = Structure(pair, nu)
    n = pair.size
    t = pair.table
    rm = s.right_mass(r)

    A0 = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if t[b, a] < -1:                  # b*a irreducible
                A0[a, b] = lam * s.nu[b]

    A1 = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            c = t[b, a]
            if c >= 0 and c != a:
                A1[a, c] += lam * s.nu[b]

    A2 = np.zeros((n, n))
    B = np.zeros(n)
    for a in range(n):
        cancel = lam * s.cancel[a]
        for d in pair.right[a]:
            A2[a, d] += cancel * r[d] / rm[a]
        A2[a, a] += mu
        B[a] = cancel + mu

    for a in range(n):
        A1[a, a] = -(A0[a].sum() + A1[a].sum() + A2[a].sum())
    Avec = lam * s.nu * rm
    return QBDBlocks(-float(Avec.sum()), Avec, B, A0, A1, A2)


@dataclass(frozen=True)
class RMatrix:
    R: np.ndarray
    iterations: int
    defect: float
    monotone: bool


def solve_R(blocks: QBDBlocks, tol: float = 1e-12, max_iter: int = 1_000_000) -> RMatrix:
    """Minimal nonnegative solution of ``A0 + R A1 + R^2 A2 = 0`` by iteration from ``R = 0``."""
    A0, A1, A2 = blocks.A0, blocks.A1, blocks.A2
    if (np.diag(A1) >= 0).any():
        raise SolverError("A1 must have a negative diagonal")
    try:
        A1_inv = np.linalg.inv(A1)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"A1 is singular: {exc}") from exc
    if np.linalg.cond(A1) > 1e12:
        warnings.warn("A1 is ill-conditioned", RuntimeWarning, stacklevel=2)
    R = np.zeros_like(A0)
    monotone = True
    for k in range(1, max_iter + 1):
        nxt = -(A0 + R @ R @ A2) @ A1_inv
        if (nxt < R - 1e-14).any():
            monotone = False
        if not np.isfinite(nxt).all() or np.abs(nxt).max() > 1e12:
            raise SolverError("R iteration diverged")
        step = float(np.max(np.abs(nxt - R)))
        R = nxt
        if step < tol:
            break
    else:
        raise SolverError(f"R iteration did not converge in {max_iter} steps")
    defect = float(np.max(np.abs(A0 + R @ A1 + R @ R @ A2)))
    return RMatrix(R, k, defect, monotone)


ERGODIC_MARGIN = 1e-9


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def boundary_solve(blocks: QBDBlocks, R: np.ndarray) -> tuple[float, np.ndarray]:
    """Solve ``a y + x B = 0``, ``y A + x (A1 + R A2) = 0`` with the normalization."""
    # the minimal R of a transient chain converges to radius 1 from below
    if spectral_radius(R) >= 1 - ERGODIC_MARGIN:
        raise RegimeError("spectral radius of R is >= 1: the QBD is not ergodic")
    m = len(blocks.Avec)
    # unknown vector z = (y, x); columns of M are the balance equations
    M = np.zeros((1 + m, 1 + m))
    M[0, 0] = blocks.a
    M[1:, 0] = blocks.B
    M[0, 1:] = blocks.Avec
    M[1:, 1:] = blocks.A1 + R @ blocks.A2
    ones = np.ones(m)
    norm = np.concatenate([[1.0], np.linalg.solve(np.eye(m) - R, ones)])
    system = M.T.copy()
    system[-1] = norm
    rhs = np.zeros(1 + m)
    rhs[-1] = 1.0
    try:
        z = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"boundary system is singular: {exc}") from exc
    if (z <= 0).any():
        raise SolverError(f"boundary solution is not positive: {z}")
    return float(z[0]), z[1:]


def qbd_stationary(y: float, x: np.ndarray, R: np.ndarray, n: int, a: int) -> float:
    if n == 0:
        return float(y)
    return float((x @ np.linalg.matrix_power(R, n - 1))[a])


@dataclass(frozen=True)
class ProductFormReport:
    eigen_defect: float
    boundary_defect: float
    empty_defect: float
    spectral_radius: float

    @property
    def ok(self) -> bool:
        return max(self.eigen_defect, self.boundary_defect, self.empty_defect) < 1e-8


def product_form_check(blocks: QBDBlocks, R: np.ndarray, y: float, x: np.ndarray,
                       solution) -> ProductFormReport:
    """Deviations of ``xR`` from ``rho x``, of ``x`` from ``rho(1-rho) r`` and of ``y`` from ``1-rho``."""
    rho = solution.rho
    r = np.asarray(solution.r, dtype=float)
    return ProductFormReport(
        float(np.max(np.abs(x @ R - rho * x))),
        float(np.max(np.abs(x - rho * (1 - rho) * r))),
        abs(y - (1 - rho)),
        spectral_radius(R),
    )
