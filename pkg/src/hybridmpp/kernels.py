"""Excitation kernels ``k(lag, (e', x'), e)`` for state-dependent Hawkes functionals.

Every kernel exposes the same small surface:

``values(lags, src_events, src_states)``
    array ``(n, d)``: kernel value of each past record on every target type.
``cumulative(s0, s1, src_events, src_states)``
    array ``(n, d)``: time integral of the kernel between lags ``s0`` and ``s1``.
``integrals()``
    array ``(d, nx, d)`` of total time integrals ``int_0^inf k``.
``envelope(lags, ...)``
    ``sup_{u >= lag} k(u)``; equals ``values`` for monotone kernels.

``nx == 1`` means the kernel ignores the source state.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidModel, NoValidBound


def _alpha_tensor(alpha):
    a = np.array(alpha, dtype=np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1, 1)
    elif a.ndim == 2:
        a = a[:, None, :]
    if a.ndim != 3 or a.shape[0] != a.shape[2]:
        raise InvalidModel(f"alpha must have shape (d, nx, d) or (d, d), got {np.shape(alpha)}")
    if not np.all(np.isfinite(a)) or np.any(a < 0):
        raise InvalidModel("alpha entries must be finite and non-negative")
    a.setflags(write=False)
    return a


class _TensorKernel:
    """Kernels of the form ``alpha[e', x', e] * g(lag)`` with a shared time shape."""

    monotone = True

    def __init__(self, alpha):
        self.alpha = _alpha_tensor(alpha)

    @property
    def n_events(self):
        return self.alpha.shape[0]

    @property
    def n_states(self):
        return self.alpha.shape[1]

    def source_index(self, x):
        return 0 if self.n_states == 1 else int(x)

    def _rows(self, src_events, src_states):
        src_events = np.asarray(src_events, dtype=np.int64)
        if self.n_states == 1:
            return self.alpha[src_events, 0, :]
        return self.alpha[src_events, np.asarray(src_states, dtype=np.int64), :]

    def values(self, lags, src_events, src_states):
        lags = np.asarray(lags, dtype=np.float64)
        return self._rows(src_events, src_states) * self.shape(lags)[:, None]

    def envelope(self, lags, src_events, src_states):
        return self.values(lags, src_events, src_states)

    def cumulative(self, s0, s1, src_events, src_states):
        s0 = np.asarray(s0, dtype=np.float64)
        s1 = np.asarray(s1, dtype=np.float64)
        return self._rows(src_events, src_states) * self.shape_integral(s0, s1)[:, None]

    def integrals(self):
        return self.alpha * self.shape_integral(np.zeros(1), np.full(1, np.inf))[0]

    def with_alpha(self, alpha):
        raise NotImplementedError


class ExponentialKernel(_TensorKernel):
    """``k(s) = alpha * beta * exp(-beta * s)``, so ``int_0^inf k = alpha``."""

    def __init__(self, alpha, beta):
        super().__init__(alpha)
        if not (beta > 0 and math.isfinite(beta)):
            raise InvalidModel(f"beta must be positive, got {beta}")
        self.beta = float(beta)

    def shape(self, lags):
        return self.beta * np.exp(-self.beta * lags)

    def shape_integral(self, s0, s1):
        return np.exp(-self.beta * s0) - np.exp(-self.beta * s1)

    def with_alpha(self, alpha):
        return ExponentialKernel(alpha, self.beta)

    def __repr__(self):
        return f"ExponentialKernel(alpha={self.alpha.tolist()}, beta={self.beta})"


class PowerLawKernel(_TensorKernel):
    """``k(s) = alpha * (s + cutoff) ** -exponent`` with ``exponent > 1``."""

    def __init__(self, alpha, exponent, cutoff):
        super().__init__(alpha)
        if not exponent > 1:
            raise InvalidModel(f"power-law exponent must exceed 1, got {exponent}")
        if not cutoff > 0:
            raise InvalidModel(f"power-law cutoff must be positive, got {cutoff}")
        self.exponent = float(exponent)
        self.cutoff = float(cutoff)

    def shape(self, lags):
        return (lags + self.cutoff) ** -self.exponent

    def shape_integral(self, s0, s1):
        q = 1.0 - self.exponent
        return ((s0 + self.cutoff) ** q - (s1 + self.cutoff) ** q) / (self.exponent - 1.0)

    def with_alpha(self, alpha):
        return PowerLawKernel(alpha, self.exponent, self.cutoff)

    def __repr__(self):
        return (f"PowerLawKernel(alpha={self.alpha.tolist()}, exponent={self.exponent}, "
                f"cutoff={self.cutoff})")


class CustomKernel:
    """User kernel ``func(lag, src_event, src_state, target_event) -> float >= 0``.

    ``integrals`` declares the total time integral per ``(e', x', e)``.
    Non-monotone kernels must supply ``envelope(lag, e', x', e)`` returning
    ``sup_{u >= lag} k(u, ...)``, otherwise thinning has no majorant.
    ``singular_lags`` lists lags at which the kernel is unbounded.
    """

    def __init__(self, func, n_events, n_states=1, integrals=None, monotone=False,
                 envelope=None, singular_lags=()):
        self.func = func
        self._d = int(n_events)
        self._nx = int(n_states)
        self.monotone = bool(monotone)
        self._envelope = envelope
        self.singular_lags = tuple(float(s) for s in singular_lags)
        if integrals is not None:
            integrals = np.array(integrals, dtype=np.float64).reshape(self._d, self._nx, self._d)
            if np.any(integrals < 0):
                raise InvalidModel("declared kernel integrals must be non-negative")
        self.declared_integrals = integrals

    @property
    def n_events(self):
        return self._d

    @property
    def n_states(self):
        return self._nx

    def source_index(self, x):
        return 0 if self._nx == 1 else int(x)

    def _eval(self, fn, lags, src_events, src_states):
        out = np.empty((len(lags), self._d))
        for i, (s, e1, x1) in enumerate(zip(lags, src_events, src_states)):
            xi = self.source_index(x1)
            for e in range(self._d):
                out[i, e] = fn(float(s), int(e1), xi, e)
        return out

    def values(self, lags, src_events, src_states):
        return self._eval(self.func, np.asarray(lags, dtype=np.float64), src_events, src_states)

    def envelope(self, lags, src_events, src_states):
        if self.monotone:
            return self.values(lags, src_events, src_states)
        if self._envelope is None:
            raise NoValidBound("non-monotone custom kernel declares no envelope")
        return self._eval(self._envelope, np.asarray(lags, dtype=np.float64), src_events,
                          src_states)

    def cumulative(self, s0, s1, src_events, src_states):
        from scipy import integrate

        out = np.empty((len(src_events), self._d))
        for i, (a, b, e1, x1) in enumerate(zip(np.broadcast_to(s0, len(src_events)),
                                               np.broadcast_to(s1, len(src_events)),
                                               src_events, src_states)):
            xi = self.source_index(x1)
            for e in range(self._d):
                out[i, e] = integrate.quad(self.func, float(a), float(b), args=(int(e1), xi, e),
                                           epsabs=1e-10, epsrel=1e-10, limit=200)[0]
        return out

    def integrals(self):
        if self.declared_integrals is None:
            raise NoValidBound("custom kernel declares no time integrals")
        return self.declared_integrals

    def __repr__(self):
        return f"CustomKernel(func={self.func!r}, n_events={self._d}, n_states={self._nx})"


def state_maximized(kernel):
    """Hawkes dominator ``kbar(s, e', e) = max_x' k(s, (e', x'), e)``.

    Only tensor kernels have a closed form; the result ignores the source state.
    """
    if not isinstance(kernel, _TensorKernel):
        raise NoValidBound("state maximization requires an exponential or power-law kernel")
    return kernel.with_alpha(kernel.alpha.max(axis=1, keepdims=True))
