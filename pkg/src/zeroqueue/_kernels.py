"""Compiled inner loops of the simulators.

The buffer lives in a circular array addressed by unbounded int64
positions ``head`` (back-end letter) and ``tail`` (one past the front-end
letter). Both ends only ever move towards lower positions: arrivals
prepend at ``head - 1`` and services pop at ``tail - 1``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# layout of the integer state vector
HEAD, TAIL, CODE, RETURNS = 0, 1, 2, 3
# layout of the float state vector
CLOCK, MEASURED = 0, 1


@njit(cache=True, nogil=True)
def _pick(cum: np.ndarray, v: float) -> int:
    k = 0
    last = cum.shape[0] - 1
    while k < last and v >= cum[k]:
        k += 1
    return k


@njit(cache=True, nogil=True)
def _recode(buf, head, tail, base):
    mask = buf.shape[0] - 1
    code = 0
    for pos in range(head, tail):
        code = code * base + buf[pos & mask] + 1
    return code


@njit(cache=True, nogil=True)
def queue_chunk(table, cum_nu, admit, lam, mu, exp_draws, unif_draws, adm_draws,
                start, first_event, measure_from, cap_len, powers,
                buf, istate, fstate, hist, level_time, dep_time, dep_class):
    """Advance the queue through ``exp_draws[start:]``.

    Stops early when the circular buffer is full so the caller can grow
    it. Returns ``(next_index, departures_written)``.
    """
    mask = buf.shape[0] - 1
    base = table.shape[0] + 1
    head = istate[HEAD]
    tail = istate[TAIL]
    code = istate[CODE]
    returns = istate[RETURNS]
    clock = fstate[CLOCK]
    measured = fstate[MEASURED]
    nlev = level_time.shape[0]
    ndep = 0
    i = start
    n = exp_draws.shape[0]
    while i < n:
        length = tail - head
        if length >= mask:
            break
        total = lam + mu if length > 0 else lam
        dt = exp_draws[i] / total
        clock += dt
        on = first_event + i >= measure_from
        if on:
            measured += dt
            if length <= cap_len:
                hist[code] += dt
            level_time[length if length < nlev - 1 else nlev - 1] += dt
        v = unif_draws[i] * total
        if v < lam:
            b = _pick(cum_nu, v / lam)
            if length == 0:
                if adm_draws[i] < admit[b]:
                    head -= 1
                    buf[head & mask] = b
                    code = b + 1
            else:
                s1 = buf[head & mask]
                c = table[b, s1]
                if c == -2:
                    head -= 1
                    buf[head & mask] = b
                    if length + 1 <= cap_len:
                        code += (b + 1) * powers[length]
                elif c == -1:
                    head += 1
                    if length <= cap_len:
                        code -= (s1 + 1) * powers[length - 1]
                    elif length - 1 == cap_len:
                        code = _recode(buf, head, tail, base)
                    if length == 1 and on:
                        returns += 1
                else:
                    buf[head & mask] = c
                    if length <= cap_len:
                        code += (c - s1) * powers[length - 1]
        else:
            tail -= 1
            if on:
                dep_time[ndep] = clock
                dep_class[ndep] = buf[tail & mask]
                ndep += 1
            if length <= cap_len:
                code //= base
            elif length - 1 == cap_len:
                code = _recode(buf, head, tail, base)
            if length == 1 and on:
                returns += 1
        i += 1
    istate[HEAD] = head
    istate[TAIL] = tail
    istate[CODE] = code
    istate[RETURNS] = returns
    fstate[CLOCK] = clock
    fstate[MEASURED] = measured
    return i, ndep


@njit(cache=True, nogil=True)
def walk_lengths(table, cum_nu, unif_draws, buf, istate, lengths):
    """Left-multiplication walk; ``lengths[i]`` is the word length after step ``i``."""
    mask = buf.shape[0] - 1
    head = istate[HEAD]
    tail = istate[TAIL]
    n = unif_draws.shape[0]
    i = 0
    while i < n:
        if tail - head >= mask:
            break
        b = _pick(cum_nu, unif_draws[i])
        if tail == head:
            head -= 1
            buf[head & mask] = b
        else:
            s1 = buf[head & mask]
            c = table[b, s1]
            if c == -2:
                head -= 1
                buf[head & mask] = b
            elif c == -1:
                head += 1
            else:
                buf[head & mask] = c
        lengths[i] = tail - head
        i += 1
    istate[HEAD] = head
    istate[TAIL] = tail
    return i


@njit(cache=True, nogil=True)
def walk_roots(table, cum_nu, unif_draws, k, out):
    """Run one short walk per row of ``unif_draws``; write its ``k`` letters nearest the root.

    Letters go to ``out[w, :]`` in word order (front-end last); rows whose
    final word is shorter than ``k`` are filled with -1.
    """
    walks, steps = unif_draws.shape
    word = np.empty(steps + 1, dtype=np.int64)
    for w in range(walks):
        # word[pos:steps+1] holds the buffer, back-end at word[pos]
        pos = steps + 1
        for i in range(steps):
            b = _pick(cum_nu, unif_draws[w, i])
            if pos == steps + 1:
                pos -= 1
                word[pos] = b
            else:
                c = table[b, word[pos]]
                if c == -2:
                    pos -= 1
                    word[pos] = b
                elif c == -1:
                    pos += 1
                else:
                    word[pos] = c
        length = steps + 1 - pos
        for j in range(k):
            out[w, j] = word[steps + 1 - k + j] if length >= k else -1
