"""Event functionals, their incremental trackers, and the model bundle.

The intensity of a hybrid marked point process factorizes as

    psi((e, x) | history) = phi(x | e, F(history)) * lambda_bar(e | history)

Each event functional offers two independent evaluation routes:

* ``intensity(e, h)`` sums directly over a :class:`HistoryView`;
* ``tracker(initial)`` returns an incremental object used by the event loop,
  updated in O(1) per accepted event for exponential kernels.

Tests cross-check one route against the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (ContinuousStates, DiscreteStates, HistoryView, Trajectory,
                   state_functional)
from .errors import InvalidModel, NonFiniteIntensity, NoValidBound
from .kernels import CustomKernel, ExponentialKernel, _TensorKernel
from .transitions import ContinuousFamily, DiscreteTable


def _nonneg_vector(values, name):
    v = np.atleast_1d(np.array(values, dtype=np.float64))
    if v.ndim != 1 or not np.all(np.isfinite(v)) or np.any(v < 0):
        raise InvalidModel(f"{name} must be a vector of finite non-negative reals, got {values!r}")
    v.setflags(write=False)
    return v


def _check_finite(value):
    if not math.isfinite(value):
        raise NonFiniteIntensity(f"intensity evaluated to {value}")
    return value


# --------------------------------------------------------------------------
# event functionals


class ConstantRate:
    monotone = True

    def __init__(self, nu):
        self.nu = _nonneg_vector(nu, "nu")

    @property
    def n_events(self):
        return len(self.nu)

    def intensity(self, e, h):
        return float(self.nu[e])

    def upper_bound(self, h, from_time):
        return self.nu.tolist()

    def tracker(self, initial):
        return _ConstantTracker(self.nu.tolist())

    def __repr__(self):
        return f"ConstantRate(nu={self.nu.tolist()})"


class MarkovRate:
    """``lambda_bar(e) = c(current state) * relative[e]``.

    ``rates`` is either a per-state sequence (discrete states) or a callable.
    """

    monotone = False

    def __init__(self, rates, relative=(1.0,)):
        if callable(rates):
            self._c = rates
            self.rate_table = None
        else:
            table = _nonneg_vector(rates, "rates")
            if np.any(table <= 0):
                raise InvalidModel("Markov rates must be strictly positive")
            self.rate_table = table
            lst = table.tolist()
            self._c = lst.__getitem__
        self.relative = _nonneg_vector(relative, "relative")

    @property
    def n_events(self):
        return len(self.relative)

    def rate(self, x):
        c = float(self._c(x))
        if not c > 0:
            raise InvalidModel(f"Markov rate at state {x!r} must be positive, got {c}")
        return c

    def intensity(self, e, h):
        return _check_finite(self.rate(state_functional(h)) * float(self.relative[e]))

    def upper_bound(self, h, from_time):
        c = self.rate(state_functional(h))
        return [c * r for r in self.relative.tolist()]

    def tracker(self, initial):
        x = initial.states[-1].item() if len(initial) else initial.origin_state
        return _MarkovTracker(self, x)

    def __repr__(self):
        rates = self.rate_table.tolist() if self.rate_table is not None else self._c
        return f"MarkovRate(rates={rates}, relative={self.relative.tolist()})"


class StateDependentHawkes:
    """``lambda_bar(e) = nu[e] + sum_i k(t - t_i, (e_i, x_i), e)``."""

    monotone = True

    def __init__(self, nu, kernel):
        self.nu = _nonneg_vector(nu, "nu")
        if kernel.n_events != len(self.nu):
            raise InvalidModel(f"kernel has {kernel.n_events} event types, nu has {len(self.nu)}")
        self.kernel = kernel

    @property
    def n_events(self):
        return len(self.nu)

    def _lags(self, h, at):
        return at - h.times

    def intensity(self, e, h):
        lam = float(self.nu[e])
        if h.size:
            lam += float(self.kernel.values(self._lags(h, h.cut), h.events, h.states)[:, e].sum())
        return _check_finite(lam)

    def upper_bound(self, h, from_time):
        if from_time < h.cut:
            raise ValueError("from_time must not precede the history cut")
        out = self.nu.tolist()
        if h.size:
            env = self.kernel.envelope(self._lags(h, from_time), h.events, h.states)
            # same summation order as intensity(), so the bound also holds after rounding
            out = [v + float(env[:, e].sum()) for e, v in enumerate(out)]
        if not all(math.isfinite(v) for v in out):
            raise NoValidBound("kernel envelope is unbounded at the current history")
        return out

    def tracker(self, initial):
        if isinstance(self.kernel, ExponentialKernel):
            return _ExpHawkesTracker(self, initial)
        if isinstance(self.kernel, CustomKernel) and not self.kernel.monotone \
                and self.kernel._envelope is None:
            raise NoValidBound("non-monotone custom kernel declares no envelope")
        return _HistoryHawkesTracker(self, initial)

    def with_nu(self, nu):
        return StateDependentHawkes(nu, self.kernel)

    def __repr__(self):
        return f"StateDependentHawkes(nu={self.nu.tolist()}, kernel={self.kernel!r})"


class CountDominated:
    """``lambda_bar(e) = a(number of past records)`` for a non-decreasing ``a``.

    ``declared_divergent`` records the user's claim about ``sum 1/a(n)``;
    it cannot be decided numerically.
    """

    monotone = True
    GRID = 1000

    def __init__(self, a: Callable[[int], float], n_events=1, declared_divergent=None):
        self.a = a
        self._d = int(n_events)
        self.declared_divergent = declared_divergent
        vals = [float(a(n)) for n in range(self.GRID + 1)]
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise InvalidModel("a(n) must be positive and finite")
        drops = [n for n in range(1, len(vals)) if vals[n] < vals[n - 1]]
        if drops:
            raise InvalidModel(f"a(n) must be non-decreasing; a({drops[0]}) < a({drops[0] - 1})")

    @property
    def n_events(self):
        return self._d

    def intensity(self, e, h):
        return _check_finite(float(self.a(h.size)))

    def upper_bound(self, h, from_time):
        return [float(self.a(h.size))] * self._d

    def tracker(self, initial):
        return _CountTracker(self, len(initial))

    def __repr__(self):
        return f"CountDominated(a={self.a!r}, n_events={self._d})"


# --------------------------------------------------------------------------
# trackers: the incremental route used by the simulator
#
#   rate(e, t)        lambda_bar(e | records strictly before t)
#   bounds(t0)        per-type majorant valid from t0 until the next push
#   push(t, e, x)     append a record
#   integral(e, a, b) int_a^b lambda_bar(e) ds, no records inside (a, b)


class _ConstantTracker:
    def __init__(self, nu):
        self.nu = nu

    def rate(self, e, t):
        return self.nu[e]

    def rates(self, t):
        return list(self.nu)

    def bounds(self, t0):
        return list(self.nu)

    def push(self, t, e, x):
        pass

    def integral(self, e, a, b):
        return self.nu[e] * (b - a)


class _MarkovTracker:
    def __init__(self, f, x):
        self.f = f
        self.rel = f.relative.tolist()
        self._set(x)

    def _set(self, x):
        c = self.f.rate(x)
        self.current = [c * r for r in self.rel]

    def rate(self, e, t):
        return self.current[e]

    def rates(self, t):
        return list(self.current)

    def bounds(self, t0):
        return list(self.current)

    def push(self, t, e, x):
        self._set(x)

    def integral(self, e, a, b):
        return self.current[e] * (b - a)


class _CountTracker:
    def __init__(self, f, n):
        self.a = f.a
        self.d = f.n_events
        self.n = n
        self.value = float(self.a(n))

    def rate(self, e, t):
        return self.value

    def rates(self, t):
        return [self.value] * self.d

    def bounds(self, t0):
        return [self.value] * self.d

    def push(self, t, e, x):
        self.n += 1
        self.value = _check_finite(float(self.a(self.n)))

    def integral(self, e, a, b):
        return self.value * (b - a)


class _ExpHawkesTracker:
    """Keeps ``S[e] = sum_i alpha * beta * exp(-beta (t_ref - t_i))``."""

    def __init__(self, f, initial):
        k = f.kernel
        self.nu = f.nu.tolist()
        self.d = len(self.nu)
        self.beta = k.beta
        self.jump = (k.alpha * k.beta).tolist()
        self.sx = k.source_index
        self.state_free = k.n_states == 1
        self.S = [0.0] * self.d
        self.t_ref = -math.inf
        for t, e, x in zip(initial.times.tolist(), initial.events.tolist(),
                           initial.states.tolist()):
            self.push(t, e, x)

    def rate(self, e, t):
        s = self.S[e]
        if s == 0.0:
            return self.nu[e]
        return self.nu[e] + s * math.exp(-self.beta * (t - self.t_ref))

    def rates(self, t):
        decay = math.exp(-self.beta * (t - self.t_ref))
        return [n + s * decay for n, s in zip(self.nu, self.S)]

    bounds = rates

    def push(self, t, e, x):
        decay = math.exp(-self.beta * (t - self.t_ref))
        row = self.jump[e][0 if self.state_free else int(x)]
        self.S = [s * decay + j for s, j in zip(self.S, row)]
        self.t_ref = t

    def integral(self, e, a, b):
        s = self.S[e]
        out = self.nu[e] * (b - a)
        if s:
            out += s / self.beta * (math.exp(-self.beta * (a - self.t_ref))
                                    - math.exp(-self.beta * (b - self.t_ref)))
        return out


class _HistoryHawkesTracker:
    """Direct summation over the stored history (power-law and custom kernels)."""

    def __init__(self, f, initial):
        self.f = f
        self.kernel = f.kernel
        self.nu = f.nu
        self.times = list(initial.times.tolist())
        self.events = list(initial.events.tolist())
        self.states = list(initial.states.tolist())
        self._arrays()

    def _arrays(self):
        self._t = np.array(self.times, dtype=np.float64)
        self._e = np.array(self.events, dtype=np.int64)
        self._x = np.array(self.states)

    def rates(self, t):
        if not self.times:
            return self.nu.tolist()
        v = self.kernel.values(t - self._t, self._e, self._x).sum(axis=0)
        return (self.nu + v).tolist()

    def rate(self, e, t):
        return self.rates(t)[e]

    def bounds(self, t0):
        out = self.nu.copy()
        if self.times:
            out = out + self.kernel.envelope(t0 - self._t, self._e, self._x).sum(axis=0)
        if not np.all(np.isfinite(out)):
            raise NoValidBound("kernel envelope is unbounded at the current history")
        return out.tolist()

    def push(self, t, e, x):
        self.times.append(t)
        self.events.append(e)
        self.states.append(x)
        self._arrays()

    def integral(self, e, a, b):
        out = float(self.nu[e]) * (b - a)
        if self.times:
            c = self.kernel.cumulative(a - self._t, b - self._t, self._e, self._x)
            out += float(c[:, e].sum())
        return out


# --------------------------------------------------------------------------
# model bundle


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Event weights, state space, transition function, event functional, initial condition."""

    weights: Sequence[float]
    states: DiscreteStates | ContinuousStates
    transition: DiscreteTable | ContinuousFamily
    functional: object
    initial: Trajectory | None = None
    x0: float | int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if len(w) < 1 or not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidModel("event weights must be positive and finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        d = len(w)
        if self.functional.n_events != d:
            raise InvalidModel(f"functional has {self.functional.n_events} event types, "
                               f"weights declare {d}")
        if self.states.discrete != self.transition.discrete:
            raise InvalidModel("transition function kind does not match the state space")
        if self.states.discrete:
            if self.transition.n_states != self.states.size:
                raise InvalidModel("transition table size does not match the state space")
            if self.transition.n_events != d:
                raise InvalidModel("transition table event dimension does not match weights")
        kernel = getattr(self.functional, "kernel", None)
        if kernel is not None and kernel.n_states != 1:
            if not self.states.discrete or kernel.n_states != self.states.size:
                raise InvalidModel("kernel source-state dimension does not match the state space")
        x0 = self.states.validate(self.x0)
        object.__setattr__(self, "x0", x0)
        init = self.initial
        if init is None:
            init = Trajectory.empty(x0, dtype=self.states.dtype)
        else:
            if init.n_new:
                raise InvalidModel("initial condition must only contain records at times <= 0")
            if init.origin_state != x0:
                init = Trajectory(init.times, init.events, init.states, x0)
            if len(init) and init.events.max() >= d:
                raise InvalidModel("initial condition references an unknown event type")
            for x in np.unique(init.states):
                self.states.validate(x)
        object.__setattr__(self, "initial", init)

    @property
    def n_events(self):
        return len(self.weights)

    def replace(self, **changes):
        kw = dict(weights=self.weights, states=self.states, transition=self.transition,
                  functional=self.functional, initial=self.initial, x0=self.x0, name=self.name)
        kw.update(changes)
        return ModelSpec(**kw)


# --------------------------------------------------------------------------
# operations


def event_intensity(f, e, h: HistoryView) -> float:
    """``lambda_bar(e | h)`` by direct evaluation over the history."""
    return f.intensity(e, h)


def total_event_rate(f, h: HistoryView, weights) -> float:
    return float(sum(w * f.intensity(e, h) for e, w in enumerate(np.asarray(weights).tolist())))


def transition_sample(phi, e, x, rng):
    """Draw ``x' ~ phi(. | e, x)``; ``rng`` is a numpy Generator."""
    return phi.sample(e, x, float(rng.random()))


def transition_density(phi, x_next, e, x) -> float:
    return phi.density(x_next, e, x)


def intensity_upper_bound(f, h: HistoryView, from_time: float) -> list[float]:
    """Per-type bound on ``lambda_bar`` from ``from_time`` until the next record."""
    return f.upper_bound(h, from_time)


def psi(model: ModelSpec, mark, h: HistoryView) -> float:
    """Full intensity ``phi(x | e, F(h)) * lambda_bar(e | h)`` at ``mark = (e, x)``."""
    e, x = mark
    return (model.transition.density(x, e, state_functional(h))
            * model.functional.intensity(e, h))
