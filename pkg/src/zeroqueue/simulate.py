"""Event-driven simulation of the queue and of the underlying random walk.

Random numbers come from numpy's Philox counter-based generator seeded
through :class:`numpy.random.SeedSequence`; replications use spawned
child sequences. Draws are generated in chunks and consumed one triple
per event (exponential holding time, event/class uniform, admission
uniform), so the compiled engine and the pure-Python debug engine see
exactly the same stream and produce identical reports.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels as K
from .algebra import PairSpec, Word, arrive, is_normal, serve
from .errors import AlgebraError, RegimeError
from .traffic import class_distribution

log = logging.getLogger(__name__)

RNG_NAME = "numpy Philox4x64 seeded via SeedSequence"
CHUNK = 1 << 18
HIST_CELLS_CAP = 1 << 24
LEVEL_CELLS = 4096
THREADS_ENV = "ZEROQUEUE_THREADS"


@dataclass(frozen=True)
class SimConfig:
    lam: float
    mu: float
    r_boundary: np.ndarray | Mapping[str, float] | Sequence[float]
    horizon_events: int
    warmup_events: int | None = None
    seed: int = 0
    max_tracked_len: int = 6

    def __post_init__(self):
        if not (self.lam > 0 and self.mu > 0):
            raise ValueError("rates must be positive")
        if self.horizon_events <= 0:
            raise ValueError("horizon must be positive")
        if self.warmup_events is None:
            object.__setattr__(self, "warmup_events", self.horizon_events // 10)
        if not 0 <= self.warmup_events < self.horizon_events:
            raise ValueError("warmup must be smaller than the horizon")
        if self.max_tracked_len < 0:
            raise ValueError("max_tracked_len must be nonnegative")

    def boundary(self, pair: PairSpec) -> np.ndarray:
        r = self.r_boundary
        if isinstance(r, Mapping):
            r = [float(r.get(x, 0.0)) for x in pair.labels]
        r = np.asarray(r, dtype=float)
        if r.shape != (pair.size,) or (r < 0).any() or abs(r.sum() - 1.0) > 1e-9:
            raise ValueError("r_boundary must be a probability vector over the alphabet")
        return r


@dataclass
class SimReport:
    word_histogram: dict[Word, float]
    level_histogram: dict[int, float]
    departures: int
    departure_rate: float
    interdeparture_mean: float
    interdeparture_var: float
    interdeparture_cv: float
    empty_fraction: float
    returned_to_empty: int
    elapsed: float
    final_length: int
    max_tracked_len: int
    truncated: bool
    seed: int
    rng: str = RNG_NAME
    departure_times: np.ndarray = field(default=None, repr=False)
    departure_classes: np.ndarray = field(default=None, repr=False)
    start_time: float = 0.0

    def tracked_mass(self) -> float:
        return float(sum(self.word_histogram.values()))


def _stream(seed) -> np.random.Generator:
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def _draws(rng: np.random.Generator, n: int):
    return rng.standard_exponential(n), rng.random(n), rng.random(n)


def _tracked_len(pair: PairSpec, wanted: int) -> tuple[int, bool]:
    base = pair.size + 1
    cap = wanted
    while cap > 0 and base ** (cap + 1) > HIST_CELLS_CAP:
        cap -= 1
    return cap, cap < wanted


def _decode(code: int, base: int) -> Word:
    out = []
    while code:
        code, d = divmod(code, base)
        out.append(d - 1)
    return tuple(reversed(out))


def _grow(buf: np.ndarray, istate: np.ndarray) -> np.ndarray:
    old_mask = buf.shape[0] - 1
    new = np.empty(2 * buf.shape[0], dtype=buf.dtype)
    new_mask = new.shape[0] - 1
    for pos in range(istate[K.HEAD], istate[K.TAIL]):
        new[pos & new_mask] = buf[pos & old_mask]
    return new


def _finish(pair, cfg, seed, hist_codes, level_time, measured, clock, returns, final_len,
            cap, truncated, times, classes, start_time) -> SimReport:
    base = pair.size + 1
    hist = {_decode(int(c), base): float(t) / measured for c, t in hist_codes}
    levels = {int(n): float(t) / measured for n, t in enumerate(level_time) if t > 0}
    gaps = np.diff(times) if times.size > 1 else np.empty(0)
    mean = float(gaps.mean()) if gaps.size else math.nan
    var = float(gaps.var()) if gaps.size else math.nan
    return SimReport(
        word_histogram=hist,
        level_histogram=levels,
        departures=int(times.size),
        departure_rate=times.size / measured if measured > 0 else math.nan,
        interdeparture_mean=mean,
        interdeparture_var=var,
        interdeparture_cv=math.sqrt(var) / mean if gaps.size and mean > 0 else math.nan,
        empty_fraction=levels.get(0, 0.0),
        returned_to_empty=int(returns),
        elapsed=float(measured),
        final_length=int(final_len),
        max_tracked_len=cap,
        truncated=truncated,
        seed=int(seed) if not isinstance(seed, np.random.SeedSequence) else int(seed.entropy),
        departure_times=times,
        departure_classes=classes,
        start_time=float(start_time),
    )


def simulate_queue(pair: PairSpec, nu, cfg: SimConfig, engine: str = "numba",
                   seed=None) -> SimReport:
    """Simulate ``cfg.horizon_events`` events of the queue started empty.

    ``engine="python"`` runs a slow reference loop that uses the algebra
    module directly and asserts normal form after every event.
    """
    nu = class_distribution(pair, nu)
    r = cfg.boundary(pair)
    admit = pair.right_matrix @ r
    seed = cfg.seed if seed is None else seed
    cap, truncated = _tracked_len(pair, cfg.max_tracked_len)
    if truncated:
        log.warning("word histogram truncated to length %d", cap)
    if engine == "numba":
        return _run_compiled(pair, nu, admit, cfg, seed, cap, truncated)
    if engine == "python":
        return _run_reference(pair, nu, admit, cfg, seed, cap, truncated)
    raise ValueError(f"unknown engine {engine!r}")


def _run_compiled(pair, nu, admit, cfg, seed, cap, truncated) -> SimReport:
    rng = _stream(seed)
    table = np.ascontiguousarray(pair.table, dtype=np.int64)
    cum = np.cumsum(nu)
    base = pair.size + 1
    powers = np.array([base ** k for k in range(cap + 1)], dtype=np.int64)
    hist = np.zeros(base ** (cap + 1))
    level_time = np.zeros(LEVEL_CELLS)
    buf = np.empty(1024, dtype=np.int64)
    istate = np.zeros(4, dtype=np.int64)
    fstate = np.zeros(2)
    times, classes = [], []
    start_time = None
    done = 0
    while done < cfg.horizon_events:
        n = min(CHUNK, cfg.horizon_events - done)
        e, u, v = _draws(rng, n)
        dep_t = np.empty(n)
        dep_c = np.empty(n, dtype=np.int64)
        i = 0
        while i < n:
            if start_time is None and done + i >= cfg.warmup_events:
                start_time = fstate[K.CLOCK]
            stop = n if start_time is not None else min(n, cfg.warmup_events - done)
            j, nd = K.queue_chunk(table, cum, admit, cfg.lam, cfg.mu, e[:stop], u[:stop], v[:stop],
                                  i, done, cfg.warmup_events, cap, powers, buf, istate, fstate,
                                  hist, level_time, dep_t, dep_c)
            times.append(dep_t[:nd].copy())
            classes.append(dep_c[:nd].copy())
            if j < stop:
                buf = _grow(buf, istate)
            i = j
        done += n
    codes = np.flatnonzero(hist)
    return _finish(pair, cfg, seed, zip(codes, hist[codes]), level_time, fstate[K.MEASURED],
                   fstate[K.CLOCK], istate[K.RETURNS], istate[K.TAIL] - istate[K.HEAD],
                   cap, truncated, np.concatenate(times), np.concatenate(classes), start_time)


def _run_reference(pair, nu, admit, cfg, seed, cap, truncated) -> SimReport:
    rng = _stream(seed)
    base = pair.size + 1
    cum = np.cumsum(nu)
    hist: dict[int, float] = {}
    level_time = np.zeros(LEVEL_CELLS)
    w: Word = ()
    clock = measured = 0.0
    returns = 0
    times, classes = [], []
    start_time = None
    lam, mu = cfg.lam, cfg.mu
    done = 0
    while done < cfg.horizon_events:
        n = min(CHUNK, cfg.horizon_events - done)
        e, u, v = _draws(rng, n)
        for i in range(n):
            if start_time is None and done + i >= cfg.warmup_events:
                start_time = clock
            on = done + i >= cfg.warmup_events
            total = lam + mu if w else lam
            dt = e[i] / total
            clock += dt
            if on:
                measured += dt
                if len(w) <= cap:
                    code = 0
                    for a in w:
                        code = code * base + a + 1
                    hist[code] = hist.get(code, 0.0) + dt
                level_time[min(len(w), LEVEL_CELLS - 1)] += dt
            x = u[i] * total
            before = len(w)
            if x < lam:
                b = int(K._pick.py_func(cum, x / lam))
                if not w:
                    if v[i] < admit[b]:
                        w = (b,)
                else:
                    w = arrive(pair, w, b)
            else:
                if on:
                    times.append(clock)
                    classes.append(w[-1])
                w = serve(pair, w)
            if before == 1 and not w and on:
                returns += 1
            if not is_normal(pair, w):
                raise AlgebraError(f"simulated state {pair.format(w)} left normal form")
        done += n
    codes = sorted(hist)
    return _finish(pair, cfg, seed, ((c, hist[c]) for c in codes), level_time, measured, clock,
                   returns, len(w), cap, truncated, np.asarray(times, dtype=float),
                   np.asarray(classes, dtype=np.int64), start_time)


def default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def replicate(pair: PairSpec, nu, cfg: SimConfig, reps: int, threads: int | None = None,
              engine: str = "numba") -> list[SimReport]:
    """Independent replications on spawned child streams, returned in replication order."""
    if reps < 1:
        raise ValueError("need at least one replication")
    children = np.random.SeedSequence(cfg.seed).spawn(reps)
    workers = threads or default_threads()
    if workers == 1 or reps == 1:
        return [simulate_queue(pair, nu, cfg, engine, seed=c) for c in children]
    # warm the compiled kernel once before fanning out
    simulate_queue(pair, nu, SimConfig(cfg.lam, cfg.mu, cfg.r_boundary, 10, 0), engine)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda c: simulate_queue(pair, nu, cfg, engine, seed=c), children))


@dataclass(frozen=True)
class PooledStats:
    empty_fraction: float
    empty_fraction_se: float
    departure_rate: float
    departure_rate_se: float
    growth_rate: float
    growth_rate_se: float
    reps: int


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    a = np.asarray(xs, dtype=float)
    if a.size < 2:
        return float(a.mean()), math.nan
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


def pool(reports: Sequence[SimReport]) -> PooledStats:
    """Across-replication means and standard errors, reduced in replication order."""
    ef = _mean_se([r.empty_fraction for r in reports])
    dr = _mean_se([r.departure_rate for r in reports])
    gr = _mean_se([growth_rate(r) for r in reports])
    return PooledStats(*ef, *dr, *gr, len(reports))


def growth_rate(report: SimReport) -> float:
    """Buffer length at the horizon divided by total simulated time."""
    total = report.start_time + report.elapsed
    return report.final_length / total


@dataclass(frozen=True)
class DepartureStats:
    rate: float
    cv: float
    dispersion: float
    count: int


MIN_DEPARTURES = 1000


def departure_stats(report: SimReport, letter: int | None = None, windows: int = 100) -> DepartureStats:
    """Rate, inter-departure CV and index of dispersion of window counts.

    With ``letter`` only departures of that class are used.
    """
    t = report.departure_times
    if letter is not None:
        t = t[report.departure_classes == letter]
    if t.size < MIN_DEPARTURES:
        raise ValueError(f"only {t.size} departures; at least {MIN_DEPARTURES} are needed")
    t0 = report.start_time
    gaps = np.diff(t)
    cv = float(gaps.std() / gaps.mean())
    counts, _ = np.histogram(t, bins=windows, range=(t0, t0 + report.elapsed))
    dispersion = float(counts.var(ddof=1) / counts.mean())
    return DepartureStats(t.size / report.elapsed, cv, dispersion, int(t.size))


def empirical_vs_product_form(report: SimReport, law, max_len: int) -> float:
    """Total variation on words up to ``max_len`` plus half the tail-mass discrepancy."""
    if law is None or getattr(law, "solution", None) is None or not law.solution.rho < 1:
        raise RegimeError("no stationary law to compare with outside the ergodic regime")
    if max_len > report.max_tracked_len:
        raise ValueError(f"histogram only tracks words up to length {report.max_tracked_len}")
    from .oracle import enumerate_words

    words = enumerate_words(law.pair, max_len, cap=max(max_len, 10))
    tv = 0.0
    emp_mass = ana_mass = 0.0
    for w in words:
        e = report.word_histogram.get(w, 0.0)
        p = law.probability(w)
        tv += abs(e - p)
        emp_mass += e
        ana_mass += p
    return 0.5 * tv + 0.5 * abs((1 - emp_mass) - (1 - ana_mass))


@dataclass(frozen=True)
class WalkReport:
    gamma: float
    gamma_se: float
    steps: int
    prefix_marginals: dict[Word, float]
    prefix_se: dict[Word, float]
    prefix_walks: int


def simulate_walk(pair: PairSpec, nu, steps: int, seed: int = 0, batches: int = 50,
                  prefix_len: int = 3, prefix_walks: int = 20_000,
                  prefix_steps: int = 400) -> WalkReport:
    """Drift estimate from one long walk and root-letter frequencies from many short ones.

    The drift standard error uses batch means of the length increments.
    Prefix words are read from the root outwards: ``u[0]`` is the
    front-end letter of the buffer, the one that stabilizes first.
    """
    if steps < 10_000:
        raise ValueError("need at least 10^4 steps")
    nu = class_distribution(pair, nu)
    cum = np.cumsum(nu)
    table = np.ascontiguousarray(pair.table, dtype=np.int64)
    long_ss, short_ss = np.random.SeedSequence(seed).spawn(2)
    rng = _stream(long_ss)
    buf = np.empty(1024, dtype=np.int64)
    istate = np.zeros(4, dtype=np.int64)
    lengths = np.empty(steps, dtype=np.int64)
    done = 0
    while done < steps:
        n = min(CHUNK, steps - done)
        u = rng.random(n)
        i = 0
        while i < n:
            j = K.walk_lengths(table, cum, u[i:], buf, istate, lengths[done + i:done + n])
            i += j
            if i < n:
                buf = _grow(buf, istate)
        done += n
    gamma = lengths[-1] / steps
    size = steps // batches
    ends = lengths[size - 1::size][:batches]
    incr = np.diff(np.concatenate([[0], ends])) / size
    se = float(incr.std(ddof=1) / math.sqrt(batches))

    rng = _stream(short_ss)
    roots = np.empty((prefix_walks, prefix_len), dtype=np.int64)
    K.walk_roots(table, cum, rng.random((prefix_walks, prefix_steps)), prefix_len, roots)
    marg: dict[Word, float] = {}
    err: dict[Word, float] = {}
    for k in range(1, prefix_len + 1):
        tails = roots[:, prefix_len - k:]
        tails = tails[(tails >= 0).all(axis=1)]
        words, counts = np.unique(tails, axis=0, return_counts=True)
        for wd, c in zip(words, counts):
            p = c / prefix_walks
            key = tuple(int(a) for a in wd[::-1])
            marg[key] = float(p)
            err[key] = math.sqrt(p * (1 - p) / prefix_walks)
    return WalkReport(float(gamma), se, steps, marg, err, prefix_walks)
