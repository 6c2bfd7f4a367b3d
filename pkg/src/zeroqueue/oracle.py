"""Brute-force ground truth on a truncated state space.

Normal words up to a length cap are enumerated, the exact generator is
assembled between them (arrivals that would exceed the cap are dropped),
and the stationary vector is obtained from a dense linear solve.
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import PairSpec, Word
from .errors import AlgebraError, SolverError
from .generator import transitions

MAX_LEN_CAP = 10


def enumerate_words(pair: PairSpec, N: int, cap: int = MAX_LEN_CAP) -> list[Word]:
    """All normal words of length <= N, shortest first, then lexicographic by letter index."""
    if N > cap:
        raise AlgebraError(f"length cap {N} exceeds the configured maximum {cap}")
    words: list[Word] = [()]
    level: list[Word] = [(a,) for a in range(pair.size)]
    for _ in range(N):
        words.extend(level)
        # extend at the front-end with Right-successors of the last letter
        level = [w + (b,) for w in level for b in sorted(pair.right[w[-1]])]
    return words


@dataclass
class TruncatedChain:
    states: list[Word]
    generator: np.ndarray
    truncation: int
    index: dict[Word, int] = field(repr=False)


def truncated_generator(pair: PairSpec, nu, lam: float, mu: float, r, N: int,
                        cap: int = MAX_LEN_CAP) -> TruncatedChain:
    nu = np.asarray(nu, dtype=float)
    r = np.asarray(r, dtype=float)
    states = enumerate_words(pair, N, cap)
    index = {w: i for i, w in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    for i, w in enumerate(states):
        for v, rate in transitions(pair, nu, lam, mu, r, w).items():
            j = index.get(v)
            if j is not None:
                Q[i, j] += rate
        Q[i, i] = -Q[i].sum()
    return TruncatedChain(states, Q, N, index)


@dataclass
class OracleLaw:
    pi: dict[Word, float]
    residual: float
    reachable: int

    def probability(self, w: Word) -> float:
        return self.pi.get(tuple(w), 0.0)


def _reachable_from_empty(chain: TruncatedChain) -> list[int]:
    Q = chain.generator
    start = chain.index[()]
    seen = {start}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(Q[i] > 0):
            j = int(j)
            if j != i and j not in seen:
                seen.add(j)
                queue.append(j)
    return sorted(seen)


def solve_stationary(chain: TruncatedChain) -> OracleLaw:
    """Normalized left null vector of the generator on the class reachable from the empty buffer."""
    keep = _reachable_from_empty(chain)
    Q = chain.generator[np.ix_(keep, keep)]
    m = len(keep)
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"truncated generator is singular: {exc}") from exc
    residual = float(np.max(np.abs(pi @ Q))) if m else 0.0
    probs = {chain.states[i]: float(p) for i, p in zip(keep, pi)}
    return OracleLaw(probs, residual, m)


@dataclass(frozen=True)
class Comparison:
    tv: float
    tail_bound: float
    max_abs: float
    compared_len: int


def compare(oracle: OracleLaw, analytic: Callable[[Word], float] | object, N: int,
            rho: float | None = None) -> Comparison:
    """Total variation between oracle and analytic laws over words of length <= N-2."""
    prob = analytic.probability if hasattr(analytic, "probability") else analytic
    if rho is None:
        rho = getattr(getattr(analytic, "solution", None), "rho", None)
    L = N - 2
    words = [w for w in oracle.pi if len(w) <= L]
    pair_words = set(words)
    diffs = [abs(oracle.pi[w] - prob(w)) for w in words]
    tv = 0.5 * sum(diffs)
    tail = float(rho ** (N - 1)) if rho is not None else float("nan")
    return Comparison(tv, tail, max(diffs) if diffs else 0.0, L) if pair_words else Comparison(0.0, tail, 0.0, L)


def dump_csv(path, pair: PairSpec, oracle: OracleLaw, analytic, max_len: int | None = None) -> None:
    prob = analytic.probability if hasattr(analytic, "probability") else analytic
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["word", "oracle_pi", "analytic_pi", "abs_diff"])
        for w in sorted(oracle.pi, key=lambda w: (len(w), w)):
            if max_len is not None and len(w) > max_len:
                continue
            o, a = oracle.pi[w], prob(w)
            out.writerow([pair.format(w), f"{o:.17g}", f"{a:.17g}", f"{abs(o - a):.17g}"])
