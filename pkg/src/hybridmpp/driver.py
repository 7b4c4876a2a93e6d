"""Seeded candidate stream realizing the driving Poisson measure lazily.

The driving measure ``M`` on ``(0, inf) x E x (0, inf)`` is never
materialized.  Inside the strips ``{(t, e, z): z < B(e)}`` its atoms are a
homogeneous Poisson process of rate ``B_total = sum_e w(e) B(e)`` in time,
with the type chosen proportionally to ``w(e) B(e)`` and the height uniform on
``[0, B(e))``.  Each candidate also carries one uniform ``state_u`` that the
consumer spends on the post-event state draw, so coupled consumers share it.

Randomness comes from numpy's Philox4x64-10 counter-based generator, drawn in
fixed blocks of four parallel streams; the block layout is part of the
algorithm identifier so traces replay bit-for-bit.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import ZeroMajorant

RNG_ID = "philox4x64-10/blocked-4x4096/v1"
BLOCK = 4096


class Candidate(NamedTuple):
    time: float
    event: int
    height: float
    state_u: float


class Driver:
    """Single-consumer candidate source; identical seeds replay identically."""

    rng_id = RNG_ID

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))
        self.cursor = 0.0
        self.drawn = 0
        self._pos = BLOCK
        self._blocks = 0

    def _refill(self):
        g = self._gen
        self._exp_a = g.standard_exponential(BLOCK)
        self._type_a = g.random(BLOCK)
        self._height_a = g.random(BLOCK)
        self._state_a = g.random(BLOCK)
        self._exp = self._exp_a.tolist()
        self._type = self._type_a.tolist()
        self._height = self._height_a.tolist()
        self._state = self._state_a.tolist()
        self._pos = 0
        self._blocks += 1

    def raw(self):
        """Next ``(exp1, type_u, height_u, state_u)`` tuple of base draws."""
        if self._pos == BLOCK:
            self._refill()
        i = self._pos
        self._pos = i + 1
        self.drawn += 1
        return self._exp[i], self._type[i], self._height[i], self._state[i]

    def raw_block(self, k):
        """Next ``k`` base draws as four arrays; same order as ``k`` calls to :meth:`raw`."""
        parts = [[], [], [], []]
        while k > 0:
            if self._pos == BLOCK:
                self._refill()
            take = min(k, BLOCK - self._pos)
            sl = slice(self._pos, self._pos + take)
            for p, a in zip(parts, (self._exp_a, self._type_a, self._height_a, self._state_a)):
                p.append(a[sl])
            self._pos += take
            self.drawn += take
            k -= take
        return tuple(np.concatenate(p) for p in parts)

    def next_candidate(self, bounds, weights) -> Candidate:
        """Next atom of the driving measure under the per-type strips ``bounds``."""
        strips = [w * b for w, b in zip(weights, bounds)]
        total = sum(strips)
        if not total > 0:
            raise ZeroMajorant("total majorant is zero")
        g, ut, uh, us = self.raw()
        t = self.cursor + g / total
        self.cursor = t
        e = pick(strips, ut * total)
        return Candidate(t, e, uh * bounds[e], us)


def pick(strips, target):
    """Index of the strip containing ``target`` in the stacked ``strips``."""
    acc = 0.0
    last = 0
    for e, s in enumerate(strips):
        if s > 0:
            acc += s
            last = e
            if target < acc:
                return e
    return last


class CoupledSource:
    """One candidate stream shared by several consumers in lockstep.

    Candidates are drawn under the elementwise maximum of the consumers'
    bounds, so each consumer thins the same atoms of the driving measure.
    With a single consumer this is exactly the unforked driver.
    """

    def __init__(self, driver: Driver):
        self.driver = driver

    @property
    def cursor(self):
        return self.driver.cursor

    def next_candidate(self, bounds_list, weights) -> Candidate:
        merged = [max(bs) for bs in zip(*bounds_list)]
        return self.driver.next_candidate(merged, weights)


def fork_for_coupling(drv: Driver) -> CoupledSource:
    if drv.drawn or drv.cursor != 0.0:
        raise ValueError("only a fresh driver can be forked for coupling")
    return CoupledSource(drv)
