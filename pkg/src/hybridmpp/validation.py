"""Statistical checks of simulated trajectories and closed-form oracles.

Two consequences of the product-form intensity are tested:

* per event type, the compensator ``int lambda_bar(e | history) ds`` between
  consecutive type-``e`` events is Exp(1) (time rescaling, KS test);
* given the event type and the pre-event state, the post-event state follows
  the corresponding row of ``phi`` (chi-square test).

The chi-square test conditions on ``(state before, event type)`` only, so it
cannot detect a next-state law that depends on deeper history.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .assumptions import branching_ratio
from .core import Trajectory
from .errors import InsufficientEvents, SingularSystem, UnstableModel
from .functionals import ModelSpec

KS_CONSTANTS = {0.01: 1.63, 0.05: 1.36}
MIN_EVENTS = 50


@dataclass
class KSResult:
    statistic: float
    n: int
    critical: float
    passed: bool
    reliable: bool


def ks_exp1(values, alpha=0.01) -> KSResult:
    """One-sample KS against ``1 - exp(-x)``; asymptotic critical value ``c(alpha)/sqrt(n)``."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    n = len(x)
    if n < 1:
        raise InsufficientEvents("KS test needs at least one value")
    if np.any(x < 0):
        raise ValueError("rescaled residuals must be non-negative")
    cdf = -np.expm1(-x)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - cdf)), float(np.max(cdf - (i - 1) / n)))
    c = KS_CONSTANTS.get(alpha)
    if c is None:
        c = float(stats.kstwobign.isf(alpha))
    crit = c / math.sqrt(n)
    return KSResult(d, n, crit, d < crit, n >= MIN_EVENTS)


# --------------------------------------------------------------------------
# time rescaling


def _walk(traj: Trajectory, model: ModelSpec):
    """Yield ``(segment_start, segment_end, tracker, record_index)`` over ``(0, last]``."""
    tracker = model.functional.tracker(traj.initial_condition())
    times = traj.times.tolist()
    events = traj.events.tolist()
    states = traj.states.tolist()
    prev = 0.0
    for k in range(traj.n_initial, len(times)):
        yield prev, times[k], tracker, k
        tracker.push(times[k], events[k], states[k])
        prev = times[k]


def compensator(traj: Trajectory, model: ModelSpec, t0=0.0, t1=None) -> np.ndarray:
    """Per-type ``int_{t0}^{t1} lambda_bar(e | history) ds`` along ``traj`` (``t0 >= 0``).

    ``t1`` defaults to the last event time.
    """
    if t0 < 0:
        raise ValueError("compensator is defined on the simulated segment t >= 0")
    d = model.n_events
    tracker = model.functional.tracker(traj.initial_condition())
    times = traj.times.tolist()
    events = traj.events.tolist()
    states = traj.states.tolist()
    if t1 is None:
        t1 = times[-1] if len(times) > traj.n_initial else t0
    out = np.zeros(d)
    prev = 0.0
    for k in range(traj.n_initial, len(times) + 1):
        b = times[k] if k < len(times) else math.inf
        lo, hi = max(prev, t0), min(b, t1)
        if hi > lo:
            for e in range(d):
                out[e] += tracker.integral(e, lo, hi)
        if b >= t1:
            break
        tracker.push(b, events[k], states[k])
        prev = b
    return out


@dataclass
class ResidualSet:
    residuals: list
    ks: list
    alpha: float

    @property
    def reliable(self):
        return all(k is not None and k.reliable for k in self.ks)

    @property
    def passed(self):
        return all(k is not None and k.passed for k in self.ks)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "reliable": self.reliable,
            "passed": self.passed,
            "per_type": [
                None if k is None else
                {"n": k.n, "statistic": k.statistic, "critical": k.critical,
                 "passed": k.passed, "reliable": k.reliable}
                for k in self.ks],
        }


def rescaled_residuals(traj: Trajectory, model: ModelSpec, alpha=0.01) -> ResidualSet:
    """Compensator increments between consecutive same-type events, KS-tested per type.

    Types with fewer than 50 residuals are flagged unreliable rather than raised.
    """
    d = model.n_events
    acc = [0.0] * d
    seen = [False] * d
    res = [[] for _ in range(d)]
    events = traj.events.tolist()
    for a, b, tracker, k in _walk(traj, model):
        for e in range(d):
            acc[e] += tracker.integral(e, a, b)
        e = events[k]
        if seen[e]:
            res[e].append(acc[e])
        seen[e] = True
        acc[e] = 0.0
    arrays = [np.array(r) for r in res]
    ks = [ks_exp1(r, alpha) if len(r) else None for r in arrays]
    return ResidualSet(arrays, ks, alpha)


# --------------------------------------------------------------------------
# next-state law


@dataclass
class CellGroup:
    observed: np.ndarray
    expected: np.ndarray
    statistic: float
    df: int


@dataclass
class TransitionTestReport:
    groups: dict
    statistic: float
    df: int
    p_value: float
    alpha: float
    skipped: list = field(default_factory=list)

    @property
    def passed(self):
        return self.p_value >= self.alpha

    def to_dict(self):
        return {
            "statistic": self.statistic, "df": self.df, "p_value": self.p_value,
            "alpha": self.alpha, "passed": self.passed,
            "groups": {f"x={x},e={e}": {"observed": g.observed.tolist(),
                                        "expected": g.expected.tolist(),
                                        "statistic": g.statistic, "df": g.df}
                       for (x, e), g in self.groups.items()},
            "skipped": [list(s) for s in self.skipped],
        }


def _pool(observed, expected, min_expected=5.0):
    """Merge cells with expected count below ``min_expected``."""
    keep = expected > 0
    if np.any(observed[~keep] > 0):
        return None
    o, ex = observed[keep], expected[keep]
    small = ex < min_expected
    if not small.any():
        return o, ex
    o2, e2 = list(o[~small]), list(ex[~small])
    po, pe = o[small].sum(), ex[small].sum()
    if pe < min_expected and e2:
        j = int(np.argmin(e2))
        po += o2.pop(j)
        pe += e2.pop(j)
    o2.append(po)
    e2.append(pe)
    return np.array(o2), np.array(e2)


def transition_frequency_test(traj: Trajectory, phi, alpha=0.01) -> TransitionTestReport:
    """Chi-square test of post-event states against ``phi`` rows, summed over groups."""
    nx, d = phi.n_states, phi.n_events
    counts = np.zeros((nx, d, nx), dtype=np.int64)
    k0 = traj.n_initial
    start = traj.states[k0 - 1] if k0 else traj.origin_state
    before = np.concatenate(([start], traj.states[k0:]))[:-1].astype(np.int64)
    np.add.at(counts, (before, traj.events[k0:], traj.states[k0:].astype(np.int64)), 1)
    groups, skipped = {}, []
    total, df = 0.0, 0
    for x in range(nx):
        for e in range(d):
            n = counts[x, e].sum()
            if n == 0:
                skipped.append((x, e))
                continue
            obs = counts[x, e].astype(np.float64)
            exp = n * phi.probs[x, e]
            pooled = _pool(obs, exp)
            if pooled is None:
                groups[(x, e)] = CellGroup(obs, exp, math.inf, nx - 1)
                total = math.inf
                continue
            o, ex = pooled
            stat = float(((o - ex) ** 2 / ex).sum())
            groups[(x, e)] = CellGroup(obs, exp, stat, len(o) - 1)
            total += stat
            df += len(o) - 1
    if math.isinf(total):
        p = 0.0
    elif df == 0:
        p = 1.0
    else:
        p = float(stats.chi2.sf(total, df))
    return TransitionTestReport(groups, total, df, p, alpha, skipped)


# --------------------------------------------------------------------------
# oracles


def state_occupancy(traj: Trajectory, horizon: float, n_states: int) -> np.ndarray:
    """Fraction of ``(0, horizon]`` spent in each discrete state."""
    k0 = traj.n_initial
    t = np.concatenate(([0.0], traj.times[k0:], [horizon]))
    x = np.concatenate(([traj.states[k0 - 1] if k0 else traj.origin_state],
                        traj.states[k0:])).astype(np.int64)
    occ = np.bincount(x, weights=np.diff(t), minlength=n_states)
    return occ / horizon


def ctmc_stationary_oracle(rates, phi, relative=None, weights=None) -> np.ndarray:
    """Stationary law of the chain with ``Q(x, x') = sum_e w_e r_e c(x) phi(x'|e, x)``."""
    from scipy.sparse.csgraph import connected_components

    c = np.asarray(rates, dtype=np.float64)
    nx, d = phi.n_states, phi.n_events
    rel = np.ones(d) if relative is None else np.asarray(relative, dtype=np.float64)
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=np.float64)
    Q = np.einsum("e,x,xey->xy", w * rel, c, phi.probs)
    np.fill_diagonal(Q, 0.0)
    n_comp, _ = connected_components(Q > 0, directed=True, connection="strong")
    if n_comp != 1:
        raise SingularSystem(f"chain is reducible ({n_comp} communicating classes)")
    Q -= np.diag(Q.sum(axis=1))
    A = Q.T.copy()
    A[-1] = 1.0
    b = np.zeros(nx)
    b[-1] = 1.0
    return np.linalg.solve(A, b)


def hawkes_mean_rate_oracle(nu, kernel, weights) -> np.ndarray:
    """Stationary mean of ``lambda_bar`` per type: solves ``m = nu + K^T m``.

    ``K[e', e] = w(e') int kbar(t, e', e) dt`` with the state-maximized kernel,
    so for state-dependent kernels this is an upper bound.  The mean count
    rate of type ``e`` events is ``w(e) * m[e]``.
    """
    w = np.asarray(weights, dtype=np.float64)
    br = branching_ratio(kernel, w)
    if br.rho >= 1:
        raise UnstableModel(f"branching ratio {br.rho} >= 1")
    K = w[:, None] * kernel.integrals().max(axis=1)
    return np.linalg.solve(np.eye(len(w)) - K.T, np.asarray(nu, dtype=np.float64))


@dataclass
class CompoundPoissonReport:
    runs: int
    mean: float
    variance: float
    expected_mean: float
    expected_variance: float
    z_mean: float
    z_variance: float

    @property
    def passed(self):
        return abs(self.z_mean) < 3 and abs(self.z_variance) < 3


def compound_poisson_check(trajs, nu, jump_mean, jump_var, horizon,
                           jump_fourth_moment=None) -> CompoundPoissonReport:
    """Compare ``X_T - X_0`` across runs with ``E = nu T mu``, ``Var = nu T E[J^2]``.

    Bands are three standard errors; the variance's standard error uses the
    compound-Poisson fourth cumulant ``nu T E[J^4]`` (Gaussian jumps by default).
    """
    inc = []
    for tr in trajs:
        k0 = tr.n_initial
        start = tr.states[k0 - 1].item() if k0 else tr.origin_state
        end = tr.states[-1].item() if len(tr) > k0 else start
        inc.append(end - start)
    inc = np.asarray(inc, dtype=np.float64)
    n = len(inc)
    if n < 2:
        raise InsufficientEvents("need at least two runs")
    m2 = jump_var + jump_mean ** 2
    if jump_fourth_moment is None:
        jump_fourth_moment = jump_mean ** 4 + 6 * jump_mean ** 2 * jump_var + 3 * jump_var ** 2
    lam_t = nu * horizon
    exp_mean, exp_var = lam_t * jump_mean, lam_t * m2
    mean, var = float(inc.mean()), float(inc.var(ddof=1))
    se_mean = math.sqrt(exp_var / n) if exp_var > 0 else 0.0
    var_of_var = (lam_t * jump_fourth_moment + 2 * exp_var ** 2) / n
    se_var = math.sqrt(var_of_var) if var_of_var > 0 else 0.0
    z_mean = (mean - exp_mean) / se_mean if se_mean else (0.0 if mean == exp_mean else math.inf)
    z_var = (var - exp_var) / se_var if se_var else (0.0 if var == exp_var else math.inf)
    return CompoundPoissonReport(n, mean, var, exp_mean, exp_var, z_mean, z_var)
