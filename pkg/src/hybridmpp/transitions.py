"""Transition functions ``phi(x' | e, x)``: the law of the post-event state."""

from __future__ import annotations

import bisect
import math
from statistics import NormalDist

import numpy as np

from .errors import InvalidModel, OutOfSupport

ROW_TOLERANCE = 1e-12
DENSITY_TOLERANCE = 1e-6


class DiscreteTable:
    """Row-stochastic tensor ``probs[x][e][x']``.

    Rows are checked to sum to one within 1e-12 and then renormalized so the
    inverse-CDF sampler never drifts.
    """

    discrete = True

    def __init__(self, probs):
        p = np.array(probs, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != p.shape[2]:
            raise InvalidModel(f"transition table must have shape (nx, d, nx), got {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidModel("transition probabilities must be finite and non-negative")
        sums = p.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > ROW_TOLERANCE)
        if len(bad):
            x, e = bad[0]
            raise InvalidModel(f"transition row (x={x}, e={e}) sums to {sums[x, e]!r}, not 1")
        p = p / sums[:, :, None]
        p.setflags(write=False)
        self.probs = p
        cum = np.cumsum(p, axis=2)
        cum[:, :, -1] = 1.0
        self._cum = cum.tolist()

    @property
    def n_states(self):
        return self.probs.shape[0]

    @property
    def n_events(self):
        return self.probs.shape[1]

    @property
    def sup_norm(self):
        return float(self.probs.max())

    @classmethod
    def identity(cls, n_states, n_events=1):
        eye = np.eye(n_states)
        return cls(np.repeat(eye[:, None, :], n_events, axis=1))

    @classmethod
    def from_rows(cls, rows, n_states):
        """Same row for every current state: ``rows[e][x']``."""
        rows = np.asarray(rows, dtype=np.float64)
        return cls(np.broadcast_to(rows, (n_states,) + rows.shape))

    def state_independent(self):
        return bool(np.all(self.probs == self.probs[:1]))

    def sample(self, e, x, u):
        """Inverse-CDF draw from row ``(x, e)`` using uniform ``u`` in [0, 1)."""
        return bisect.bisect_right(self._cum[x][e], u)

    def density(self, x_next, e, x):
        n = self.n_states
        for name, v in (("x_next", x_next), ("x", x)):
            if int(v) != v or not 0 <= v < n:
                raise OutOfSupport(f"{name}={v!r} outside discrete state space of size {n}")
        if not 0 <= e < self.n_events:
            raise OutOfSupport(f"event {e} outside [0, {self.n_events})")
        return float(self.probs[int(x), e, int(x_next)])


class ContinuousFamily:
    """Density/sampler pair on the real line.

    ``density(x_next, e, x)`` and ``sampler(e, x, u)`` where ``u`` is a
    uniform in [0, 1).  ``support(e, x)`` gives the integration range used by
    the load-time normalization check at each ``check_points`` pair.
    """

    discrete = False

    def __init__(self, density, sampler, sup_norm, support=None, check_points=((0, 0.0),)):
        self._density = density
        self.sampler = sampler
        self.sup_norm = float(sup_norm)
        self.support = support or (lambda e, x: (-math.inf, math.inf))
        self._check(check_points)

    def _check(self, points):
        from scipy import integrate

        for e, x in points:
            lo, hi = self.support(e, x)
            mass = integrate.quad(lambda y: self._density(y, e, x), lo, hi,
                                  epsabs=1e-10, epsrel=1e-10, limit=200)[0]
            if abs(mass - 1.0) > DENSITY_TOLERANCE:
                raise InvalidModel(f"density at (e={e}, x={x}) integrates to {mass}, not 1")

    def sample(self, e, x, u):
        return float(self.sampler(e, x, u))

    def density(self, x_next, e, x):
        return float(self._density(x_next, e, x))


def gaussian_increments(mean=0.0, sigma=1.0):
    """Compound-Poisson jumps: ``x' = x + J`` with ``J ~ N(mean, sigma^2)``."""
    if not sigma > 0:
        raise InvalidModel("sigma must be positive")
    dist = NormalDist(mean, sigma)
    norm = 1.0 / (sigma * math.sqrt(2 * math.pi))

    def density(x_next, e, x):
        z = (x_next - x - mean) / sigma
        return norm * math.exp(-0.5 * z * z)

    def sampler(e, x, u):
        return x + dist.inv_cdf(u if u > 0.0 else 2.0 ** -60)

    fam = ContinuousFamily(density, sampler, sup_norm=norm)
    fam.params = {"kind": "gaussian_increment", "mean": mean, "sigma": sigma}
    return fam


def constant_increments(jump=1.0):
    """Degenerate jumps ``x' = x + jump``; has no density, only a sampler."""
    fam = ContinuousFamily.__new__(ContinuousFamily)
    fam._density = None
    fam.sampler = lambda e, x, u: x + jump
    fam.sup_norm = math.inf
    fam.support = lambda e, x: (x + jump, x + jump)
    fam.params = {"kind": "constant_increment", "jump": jump}
    return fam
