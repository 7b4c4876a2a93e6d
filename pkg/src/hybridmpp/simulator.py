"""Pathwise construction of hybrid marked point processes by thinning.

Starting from the initial condition, the loop repeatedly

1. takes per-type bounds ``B(e)`` from the functional at the current history,
2. draws the next candidate ``(t, e, u, state_u)`` of the driving measure,
3. accepts it iff ``u < lambda_bar(e | records before t)``,
4. on acceptance draws ``x' ~ phi(. | e, X_t)``, appends ``(t, e, x')`` and
   refreshes the bounds,

until the horizon (inclusive) or a cap.  The post-event state is not part of
the driving measure: conditional on an accepted type, ``phi`` integrates to
one in ``x``, so drawing ``x'`` afterwards gives intensity ``phi * lambda_bar``.
"""

from __future__ import annotations

import enum
import math
import os
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import HistoryView, Trajectory
from .driver import BLOCK, Driver, fork_for_coupling
from .errors import DominationBreach, InvalidModel, MajorantViolation, ZeroMajorant
from .functionals import CountDominated, ModelSpec

# relative slack before an intensity above its bound counts as a violation
BOUND_SLACK = 1e-12


class Status(str, enum.Enum):
    COMPLETED = "Completed"
    EXPLOSION_SUSPECTED = "ExplosionSuspected"
    CANDIDATE_BUDGET_EXHAUSTED = "CandidateBudgetExhausted"


@dataclass(frozen=True)
class SimConfig:
    horizon: float
    seed: int = 0
    max_events: int = 10_000_000
    max_candidates: int = 100_000_000
    record_diagnostics: bool = False

    def __post_init__(self):
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise InvalidModel(f"horizon must be positive and finite, got {self.horizon}")
        if self.max_events < 1 or self.max_candidates < 1:
            raise InvalidModel("caps must be positive")


@dataclass
class SimResult:
    trajectory: Trajectory
    status: Status
    diagnostics: dict = field(default_factory=dict)
    horizon: float = math.nan
    seed: int | None = None


def _current_state(traj: Trajectory):
    return traj.states[-1].item() if len(traj) else traj.origin_state


def _assemble(model, times, events, states):
    init = model.initial
    return Trajectory(
        np.concatenate([init.times, np.asarray(times, dtype=np.float64)]),
        np.concatenate([init.events, np.asarray(events, dtype=np.int64)]),
        np.concatenate([init.states, np.asarray(states, dtype=model.states.dtype)]),
        model.x0)


def _violation(lam, bound, t, e):
    return MajorantViolation(f"intensity {lam!r} exceeds bound {bound!r} for event {e} at t={t!r}")


def simulate(model: ModelSpec, cfg: SimConfig) -> SimResult:
    """One realization on ``(0, horizon]`` driven by ``Driver(cfg.seed)``."""
    start = _time.perf_counter()
    if _count_fast_path_ok(model, cfg):
        out = _simulate_count(model, cfg, Driver(cfg.seed))
        if out is not None:
            out.diagnostics["wall_time"] = _time.perf_counter() - start
            return out
    out = _simulate_generic(model, cfg, Driver(cfg.seed))
    out.diagnostics["wall_time"] = _time.perf_counter() - start
    return out


def _simulate_generic(model, cfg, drv):
    f = model.functional
    phi = model.transition
    tracker = f.tracker(model.initial)
    weights = model.weights.tolist()
    horizon = cfg.horizon
    max_events = cfg.max_events
    max_candidates = cfg.max_candidates
    log = [] if cfg.record_diagnostics else None

    x = _current_state(model.initial)
    times, events, states = [], [], []
    bounds = tracker.bounds(0.0)
    status = Status.COMPLETED
    n_cand = 0
    last_t = -math.inf
    resolution_hit = False
    next_candidate = drv.next_candidate
    rate = tracker.rate
    while True:
        if n_cand >= max_candidates:
            status = Status.CANDIDATE_BUDGET_EXHAUSTED
            break
        try:
            t, e, u, us = next_candidate(bounds, weights)
        except ZeroMajorant:
            break
        n_cand += 1
        if t > horizon:
            break
        lam = rate(e, t)
        b = bounds[e]
        if lam > b and lam > b * (1.0 + BOUND_SLACK):
            raise _violation(lam, b, t, e)
        accepted = u < lam
        if log is not None:
            log.append((t, e, u, lam, accepted))
        if accepted:
            if t <= last_t:
                # gaps have fallen below double resolution around t
                status = Status.EXPLOSION_SUSPECTED
                resolution_hit = True
                break
            last_t = t
            x = phi.sample(e, x, us)
            tracker.push(t, e, x)
            times.append(t)
            events.append(e)
            states.append(x)
            if len(times) >= max_events:
                status = Status.EXPLOSION_SUSPECTED
                break
            bounds = tracker.bounds(t)

    traj = _assemble(model, times, events, states)
    diag = _diagnostics(model, tracker, n_cand, events, min(drv.cursor, horizon))
    diag["time_resolution_exhausted"] = resolution_hit
    if log is not None:
        diag["candidate_log"] = log
    return SimResult(traj, status, diag, horizon, cfg.seed)


def _diagnostics(model, tracker, n_cand, events, t_end):
    counts = np.bincount(np.asarray(events, dtype=np.int64), minlength=model.n_events)
    return {
        "candidates": n_cand,
        "accepted": int(len(events)),
        "acceptance_rate": len(events) / n_cand if n_cand else 0.0,
        "per_type_counts": counts.tolist(),
        "final_intensity": tracker.rates(t_end),
    }


# --------------------------------------------------------------------------
# count-only functionals: every candidate is accepted, so the loop reduces to
# cumulative sums over blocks of base draws.  Bit-identical to the generic loop.


def _count_fast_path_ok(model, cfg):
    if cfg.record_diagnostics or not isinstance(model.functional, CountDominated):
        return False
    phi = model.transition
    return phi.discrete and (phi.n_states == 1 or phi.state_independent())


def _a_values(f, upto):
    cache = f.__dict__.setdefault("_a_cache", [])
    a = f.a
    if len(cache) < upto:
        cache.extend(float(a(n)) for n in range(len(cache), upto))
    return cache


def _simulate_count(model, cfg, drv):
    f = model.functional
    phi = model.transition
    w = model.weights.tolist()
    d = len(w)
    n0 = len(model.initial)
    cum_rows = np.asarray(phi._cum)[0]  # [e][x'], same for every current state
    horizon = cfg.horizon
    max_events = cfg.max_events
    max_candidates = cfg.max_candidates

    t_parts, e_parts, x_parts = [], [], []
    resolution_hit = False
    n_new = 0
    n_cand = 0
    status = Status.COMPLETED
    cursor = 0.0
    while True:
        k = min(BLOCK, max_events - n_new, max_candidates - n_cand)
        if k <= 0:
            status = (Status.EXPLOSION_SUSPECTED if n_new >= max_events
                      else Status.CANDIDATE_BUDGET_EXHAUSTED)
            break
        vals = _a_values(f, n0 + n_new + k)
        a_blk = np.array(vals[n0 + n_new:n0 + n_new + k])
        if not np.all(np.isfinite(a_blk)):
            return None
        strips = [w[e] * a_blk for e in range(d)]
        total = np.zeros(k)
        for s in strips:
            total = total + s
        g, ut, uh, us = drv.raw_block(k)
        steps = np.cumsum(np.concatenate(([cursor], g / total)))[1:]
        prev = np.concatenate(([cursor if n_new else -math.inf], steps[:-1]))
        over = np.flatnonzero((steps > horizon) | (steps <= prev))
        stop = int(over[0]) if len(over) else k
        n_cand += stop + (1 if len(over) else 0)
        if len(over) and steps[stop] <= horizon:
            resolution_hit = True
        target = ut[:stop] * total[:stop]
        etype = np.zeros(stop, dtype=np.int64)
        acc = np.zeros(stop)
        for e in range(d - 1):
            acc = acc + strips[e][:stop]
            etype += target >= acc
        heights = uh[:stop] * a_blk[:stop]
        if not np.all(heights < a_blk[:stop]):
            return None
        xs = np.empty(stop, dtype=np.int64)
        for e in range(d):
            sel = etype == e
            xs[sel] = np.searchsorted(cum_rows[e], us[:stop][sel], side="right")
        t_parts.append(steps[:stop])
        e_parts.append(etype)
        x_parts.append(xs)
        n_new += stop
        if resolution_hit:
            status = Status.EXPLOSION_SUSPECTED
            break
        if len(over):
            cursor = float(steps[stop])
            break
        cursor = float(steps[-1])

    times = np.concatenate(t_parts) if t_parts else np.empty(0)
    events = np.concatenate(e_parts) if e_parts else np.empty(0, dtype=np.int64)
    states = np.concatenate(x_parts) if x_parts else np.empty(0, dtype=np.int64)
    traj = _assemble(model, times, events, states)
    final = _a_values(f, n0 + n_new + 1)[n0 + n_new]
    counts = np.bincount(events, minlength=d)
    diag = {
        "candidates": n_cand,
        "accepted": int(n_new),
        "acceptance_rate": n_new / n_cand if n_cand else 0.0,
        "per_type_counts": counts.tolist(),
        "final_intensity": [final] * d,
        "time_resolution_exhausted": resolution_hit,
        "fast_path": True,
    }
    return SimResult(traj, status, diag, horizon, cfg.seed)


# --------------------------------------------------------------------------
# coupling


def simulate_coupled(model: ModelSpec, dominating: ModelSpec, cfg: SimConfig,
                     spot_checks: int = 20):
    """Simulate ``model`` and ``dominating`` from one shared candidate stream.

    Raises DominationBreach at the first event of ``model`` that the
    dominating process does not also accept.
    """
    if model.n_events != dominating.n_events or model.states != dominating.states:
        raise InvalidModel("coupled models must share event and state spaces")
    if not (model.functional.monotone and dominating.functional.monotone):
        raise InvalidModel("domination coupling needs functionals monotone in the history")
    if spot_checks:
        spot_check_domination(model, dominating, cfg.seed, spot_checks)

    start = _time.perf_counter()
    source = fork_for_coupling(Driver(cfg.seed))
    weights = model.weights.tolist()
    sides = [_Side(model), _Side(dominating)]
    horizon = cfg.horizon
    n_cand = 0
    status = Status.COMPLETED
    while True:
        if n_cand >= cfg.max_candidates:
            status = Status.CANDIDATE_BUDGET_EXHAUSTED
            break
        try:
            t, e, u, us = source.next_candidate([s.bounds for s in sides], weights)
        except ZeroMajorant:
            break
        n_cand += 1
        if t > horizon:
            break
        acc = [s.offer(t, e, u, us) for s in sides]
        if sides[0].stalled or sides[1].stalled:
            status = Status.EXPLOSION_SUSPECTED
            break
        if acc[0] and not acc[1]:
            raise DominationBreach(
                f"dominated process accepted event {e} at t={t!r} rejected by its dominator",
                time=t, event=e)
        if max(len(s.times) for s in sides) >= cfg.max_events:
            status = Status.EXPLOSION_SUSPECTED
            break

    wall = _time.perf_counter() - start
    results = []
    for s in sides:
        traj = _assemble(s.model, s.times, s.events, s.states)
        diag = _diagnostics(s.model, s.tracker, n_cand, s.events, min(source.cursor, horizon))
        diag["wall_time"] = wall
        results.append(SimResult(traj, status, diag, horizon, cfg.seed))
    return results[0], results[1]


class _Side:
    def __init__(self, model):
        self.model = model
        self.tracker = model.functional.tracker(model.initial)
        self.phi = model.transition
        self.x = _current_state(model.initial)
        self.times, self.events, self.states = [], [], []
        self.bounds = self.tracker.bounds(0.0)
        self.stalled = False

    def offer(self, t, e, u, us):
        lam = self.tracker.rate(e, t)
        b = self.bounds[e]
        if lam > b and lam > b * (1.0 + BOUND_SLACK):
            raise _violation(lam, b, t, e)
        if u >= lam:
            return False
        if self.times and t <= self.times[-1]:
            self.stalled = True
            return False
        self.x = self.phi.sample(e, self.x, us)
        self.tracker.push(t, e, self.x)
        self.times.append(t)
        self.events.append(e)
        self.states.append(self.x)
        self.bounds = self.tracker.bounds(t)
        return True


def spot_check_domination(model, dominating, seed=0, n=20, length=30):
    """Compare both functionals on random histories; raise DominationBreach if reversed."""
    rng = np.random.default_rng([int(seed), 0xD0D0])
    d = model.n_events
    for _ in range(n):
        m = int(rng.integers(0, length + 1))
        times = np.unique(-rng.exponential(2.0, size=m))
        events = rng.integers(0, d, size=len(times))
        if model.states.discrete:
            states = rng.integers(0, model.states.size, size=len(times))
        else:
            states = rng.normal(size=len(times))
        traj = Trajectory(times, events, states, model.x0)
        h = HistoryView(traj, 0.0)
        for e in range(d):
            lo = model.functional.intensity(e, h)
            hi = dominating.functional.intensity(e, h)
            if lo > hi * (1.0 + 1e-12):
                raise DominationBreach(
                    f"spot check: lambda_bar({e}) = {lo} exceeds dominator {hi}", event=e)


# --------------------------------------------------------------------------
# analysis helpers


def intensity_path(model: ModelSpec, traj: Trajectory, grid) -> np.ndarray:
    """``lambda_bar(e | records before t)`` for each grid time; shape ``(len(grid), d)``."""
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) > 1 and np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted")
    tracker = model.functional.tracker(Trajectory.empty(traj.origin_state,
                                                        dtype=traj.states.dtype))
    times = traj.times.tolist()
    events = traj.events.tolist()
    states = traj.states.tolist()
    out = np.empty((len(grid), model.n_events))
    j = 0
    for i, t in enumerate(grid.tolist()):
        while j < len(times) and times[j] < t:
            tracker.push(times[j], events[j], states[j])
            j += 1
        out[i] = tracker.rates(t)
    return out


@dataclass(frozen=True)
class ExplosionVerdict:
    explosive: bool
    t_inf: float | None = None

    @property
    def kind(self):
        return "SuspectedExplosive" if self.explosive else "NonExplosive"


def detect_explosion(result: SimResult, tail_fraction=0.1, threshold=1e-6) -> ExplosionVerdict:
    """Flag runs that hit ``max_events`` with vanishing inter-event gaps.

    Suspected when the last 10% of gaps sum to less than ``1e-6 * horizon``;
    the explosion time is then estimated by the last event time.
    """
    if result.status is not Status.EXPLOSION_SUSPECTED:
        return ExplosionVerdict(False)
    traj = result.trajectory
    new = traj.times[traj.n_initial:]
    if len(new) < 2:
        return ExplosionVerdict(False)
    gaps = np.diff(np.concatenate(([0.0], new)))
    m = max(1, int(len(gaps) * tail_fraction))
    if gaps[-m:].sum() < threshold * result.horizon:
        return ExplosionVerdict(True, float(new[-1]))
    return ExplosionVerdict(False)


def _run_one(args):
    model, cfg = args
    return simulate(model, cfg)


def default_workers():
    return max(1, int(os.environ.get("HYBRIDMPP_WORKERS", "1")))


def simulate_batch(model: ModelSpec, cfg: SimConfig, seeds, workers=None):
    """Independent runs, one per seed, optionally spread over processes."""
    from dataclasses import replace

    jobs = [(model, replace(cfg, seed=int(s))) for s in seeds]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]
