"""Marks, trajectories, history views and the state functional.

A trajectory is a finite, ground-simple realization of a marked point process
on ``E x X``: strictly increasing event times, each carrying an event type
``e`` and the post-event state ``x``.  Records at times ``<= 0`` form the
initial condition; records at ``> 0`` are the simulated part.

Records are stored column-wise in read-only numpy arrays so long runs stay
cheap; ``EventRecord`` objects are produced on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence, Union

import numpy as np

from .errors import InvalidModel, NonIncreasingTimes, OutOfSupport

StateValue = Union[int, float]


@dataclass(frozen=True)
class EventType:
    index: int
    weight: float = 1.0

    def __post_init__(self):
        if self.index < 0:
            raise InvalidModel(f"event index must be >= 0, got {self.index}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise InvalidModel(f"event weight must be positive and finite, got {self.weight}")


@dataclass(frozen=True)
class DiscreteStates:
    """Finite state space ``{0, ..., size-1}`` with counting reference measure."""

    size: int

    discrete = True

    def __post_init__(self):
        if self.size < 1:
            raise InvalidModel("a discrete state space needs at least one state")

    def validate(self, x) -> int:
        if isinstance(x, (bool, np.bool_)) or int(x) != x:
            raise OutOfSupport(f"discrete state must be an integer, got {x!r}")
        x = int(x)
        if not 0 <= x < self.size:
            raise OutOfSupport(f"state {x} outside [0, {self.size})")
        return x

    @property
    def dtype(self):
        return np.int64


@dataclass(frozen=True)
class ContinuousStates:
    """The real line with Lebesgue reference measure."""

    discrete = False

    def validate(self, x) -> float:
        x = float(x)
        if not math.isfinite(x):
            raise OutOfSupport(f"continuous state must be finite, got {x!r}")
        return x

    @property
    def dtype(self):
        return np.float64


class Mark(NamedTuple):
    event: int
    state: StateValue


class EventRecord(NamedTuple):
    time: float
    mark: Mark


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Immutable realization; use :meth:`from_arrays` or :func:`from_enumeration`.

    ``times``, ``events`` and ``states`` hold every record (initial condition
    first); ``n_initial`` records have time ``<= 0``.
    """

    times: np.ndarray
    events: np.ndarray
    states: np.ndarray
    origin_state: StateValue
    n_initial: int = field(init=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or len(self.events) != len(times) or len(self.states) != len(times):
            raise InvalidModel("times, events and states must be 1-d and of equal length")
        if not np.all(np.isfinite(times)):
            raise NonIncreasingTimes("event times must be finite")
        if len(times) > 1 and not np.all(np.diff(times) > 0):
            bad = int(np.argmin(np.diff(times) > 0))
            raise NonIncreasingTimes(
                f"times not strictly increasing at index {bad + 1}: "
                f"{times[bad]!r} -> {times[bad + 1]!r}")
        events = np.asarray(self.events, dtype=np.int64)
        if len(events) and events.min() < 0:
            raise InvalidModel("event indices must be non-negative")
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "events", _frozen(events))
        object.__setattr__(self, "states", _frozen(np.asarray(self.states)))
        object.__setattr__(self, "n_initial", int(np.searchsorted(times, 0.0, side="right")))

    @classmethod
    def from_arrays(cls, times, events, states, origin_state, state_space=None):
        if state_space is not None:
            origin_state = state_space.validate(origin_state)
            states = np.asarray(states, dtype=state_space.dtype)
            for x in np.unique(states):
                state_space.validate(x)
        return cls(np.asarray(times, dtype=np.float64), np.asarray(events), np.asarray(states),
                   origin_state)

    @classmethod
    def empty(cls, origin_state=0, dtype=None):
        if dtype is None:
            dtype = np.float64 if isinstance(origin_state, float) else np.int64
        return cls(np.empty(0), np.empty(0, dtype=np.int64), np.empty(0, dtype=dtype), origin_state)

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.events, other.events)
                and np.array_equal(self.states, other.states)
                and self.origin_state == other.origin_state)

    def _records(self, sl):
        return [EventRecord(float(t), Mark(int(e), x.item()))
                for t, e, x in zip(self.times[sl], self.events[sl], self.states[sl])]

    @property
    def initial(self) -> list[EventRecord]:
        return self._records(slice(0, self.n_initial))

    @property
    def new_events(self) -> list[EventRecord]:
        """Records with time > 0 (the simulated segment)."""
        return self._records(slice(self.n_initial, None))

    @property
    def n_new(self) -> int:
        return len(self.times) - self.n_initial

    def initial_condition(self) -> "Trajectory":
        """This trajectory restricted to times <= 0."""
        k = self.n_initial
        return Trajectory(self.times[:k], self.events[:k], self.states[:k], self.origin_state)

    def history(self, cut=math.inf) -> "HistoryView":
        return HistoryView(self, cut)


@dataclass(frozen=True)
class HistoryView:
    """Records of ``trajectory`` with time strictly less than ``cut``."""

    trajectory: Trajectory
    cut: float = math.inf

    def __post_init__(self):
        if math.isnan(self.cut) or self.cut == -math.inf:
            raise ValueError("cut time must lie in (-inf, inf]")

    @property
    def size(self) -> int:
        return int(np.searchsorted(self.trajectory.times, self.cut, side="left"))

    @property
    def times(self):
        return self.trajectory.times[:self.size]

    @property
    def events(self):
        return self.trajectory.events[:self.size]

    @property
    def states(self):
        return self.trajectory.states[:self.size]

    @property
    def origin_state(self):
        return self.trajectory.origin_state


def state_functional(h: HistoryView) -> StateValue:
    """State coordinate of the latest record strictly before the cut."""
    n = h.size
    if n == 0:
        return h.trajectory.origin_state
    return h.trajectory.states[n - 1].item()


def count_events(h: HistoryView, window=(-math.inf, math.inf), event_filter=None) -> int:
    """Number of records in ``(lo, hi]`` before the cut, optionally filtered by type."""
    lo, hi = window
    if lo > hi:
        raise ValueError(f"window bounds out of order: {window}")
    times = h.times
    i = np.searchsorted(times, lo, side="right")
    j = np.searchsorted(times, hi, side="right")
    if event_filter is None:
        return int(j - i)
    return int(np.isin(h.events[i:j], list(event_filter)).sum())


def to_enumeration(traj: Trajectory) -> list[tuple[float, Mark]]:
    return [(r.time, r.mark) for r in traj._records(slice(None))]


def from_enumeration(pairs: Iterable[tuple[float, Sequence]], x0: StateValue,
                     state_space=None) -> Trajectory:
    """Build a trajectory from ``(time, (event, state))`` pairs.

    Raises NonIncreasingTimes when times are not strictly increasing.
    """
    pairs = list(pairs)
    times = np.array([float(t) for t, _ in pairs], dtype=np.float64)
    events = np.array([int(m[0]) for _, m in pairs], dtype=np.int64)
    if state_space is not None:
        dtype = state_space.dtype
    elif any(isinstance(m[1], (float, np.floating)) for _, m in pairs) or isinstance(x0, float):
        dtype = np.float64
    else:
        dtype = np.int64
    states = np.array([m[1] for _, m in pairs], dtype=dtype)
    return Trajectory.from_arrays(times, events, states, x0, state_space)
