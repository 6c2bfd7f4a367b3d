"""Exact rows and columns of the queue-content generator, built event by event."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .algebra import PairSpec, Word, arrive, is_normal


def transitions(pair: PairSpec, nu: np.ndarray, lam: float, mu: float, r: np.ndarray,
                w: Word) -> dict[Word, float]:
    """Off-diagonal generator row ``Q(w, .)`` of the queue with boundary vector ``r``.

    Every arrival class is pushed through the buffering rule and rates into
    the same target are summed, so ``a^n -> a^(n-1)`` collects both the
    service rate and the cancellation rate. Self-loops are dropped.
    """
    out: dict[Word, float] = defaultdict(float)
    if not w:
        right_mass = pair.right_matrix @ r
        for a in range(pair.size):
            rate = lam * nu[a] * right_mass[a]
            if rate > 0:
                out[(a,)] += rate
        return dict(out)
    for b in range(pair.size):
        if nu[b] == 0:
            continue
        v = arrive(pair, w, b)
        if v != w:
            out[v] += lam * nu[b]
    out[w[:-1]] += mu
    return dict(out)


def predecessors(pair: PairSpec, u: Word) -> set[Word]:
    """Every normal word that can jump to ``u`` in one event."""
    n = pair.size
    cands = {(d,) + u for d in range(n)} | {u + (b,) for b in range(n)}
    if u:
        cands.add(u[1:])
        cands |= {(d,) + u[1:] for d in range(n)}
    cands.discard(u)
    return {v for v in cands if is_normal(pair, v)}
