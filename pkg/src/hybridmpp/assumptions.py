"""Checks of the existence hypotheses for a model.

Two scenarios guarantee a non-explosive solution:

* count domination: ``lambda_bar <= a(#past events)`` with ``a`` non-decreasing
  and ``sum 1/a(n) = inf``, plus a finite initial condition;
* Hawkes domination: ``lambda_bar <= lambda0 + sum kbar(...)`` with branching
  ratio ``rho < 1``, a pointwise-finite kernel and a finite initial
  excitation.

For hybrid models the transition function enters through ``rho * ||phi||_inf < 1``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .core import Trajectory
from .errors import DivergentIntegral
from .functionals import ConstantRate, CountDominated, MarkovRate, ModelSpec, StateDependentHawkes
from .kernels import CustomKernel, _TensorKernel

QUAD_TOL = 1e-8


class Verdict(str, enum.Enum):
    VERIFIED = "Verified"
    VERIFIED_NUMERICALLY = "VerifiedNumerically"
    DECLARED_BY_USER = "DeclaredByUser"
    VIOLATED = "Violated"
    NOT_APPLICABLE = "NotApplicable"


@dataclass
class Status:
    verdict: Verdict
    detail: str = ""
    witness: object = None
    tolerance: float | None = None

    @property
    def violated(self):
        return self.verdict is Verdict.VIOLATED

    def to_dict(self):
        out = {"status": self.verdict.value, "detail": self.detail}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.tolerance is not None:
            out["tolerance"] = self.tolerance
        return out


@dataclass
class AssumptionReport:
    entries: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def violated(self):
        return [k for k, s in self.entries.items() if s.violated]

    @property
    def ok(self):
        return not self.violated

    def to_dict(self):
        return {"entries": {k: s.to_dict() for k, s in self.entries.items()},
                "scalars": self.scalars, "notes": self.notes, "ok": self.ok}

    def render(self):
        lines = []
        for k, s in self.entries.items():
            extra = f" (witness: {s.witness})" if s.witness is not None else ""
            lines.append(f"{k:<26} {s.verdict.value:<20} {s.detail}{extra}")
        for k, v in self.scalars.items():
            lines.append(f"{k:<26} {v}")
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines)


class BranchingRatio(NamedTuple):
    rho: float
    target: int
    per_target: list


def _kbar_integrals_quad(kernel):
    """``int_0^inf max_x' k(t, (e', x'), e) dt`` for each ``(e', e)`` by quadrature."""
    from scipy import integrate

    d, nx = kernel.n_events, kernel.n_states
    out = np.zeros((d, d))
    for e1 in range(d):
        for e in range(d):
            if isinstance(kernel, CustomKernel):
                def kbar(t):
                    return max(kernel.func(t, e1, x1, e) for x1 in range(nx))
            else:
                def kbar(t):
                    return float(kernel.values(np.array([t]), np.full(nx, e1),
                                               np.arange(nx))[:, e].max())
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    val, err = integrate.quad(kbar, 0.0, np.inf, epsabs=QUAD_TOL * 1e-2,
                                              epsrel=QUAD_TOL * 1e-2, limit=500)
                except integrate.IntegrationWarning as exc:
                    raise DivergentIntegral(
                        f"kernel integral for ({e1} -> {e}) did not converge: {exc}") from None
            if not math.isfinite(val) or err > QUAD_TOL * max(1.0, abs(val)):
                raise DivergentIntegral(f"kernel integral for ({e1} -> {e}) did not converge")
            out[e1, e] = val
    return out


def branching_ratio(kernel, weights, method=None) -> BranchingRatio:
    """``rho = max_e sum_e' w(e') int_0^inf kbar(t, e', e) dt`` with ``kbar`` state-maximized.

    Exponential and power-law kernels use closed forms; custom kernels (or
    ``method="quad"``) use adaptive quadrature at tolerance 1e-8.
    """
    w = np.asarray(weights, dtype=np.float64)
    if method is None:
        method = "closed" if isinstance(kernel, _TensorKernel) else "quad"
    if method == "closed":
        K = kernel.integrals().max(axis=1)
    else:
        K = _kbar_integrals_quad(kernel)
    per_target = (w[:, None] * K).sum(axis=0)
    e = int(np.argmax(per_target))
    return BranchingRatio(float(per_target[e]), e, per_target.tolist())


def check_corollary_constraint(phi, kernel, weights=None) -> Status:
    """``rho * ||phi||_inf < 1`` (an identity table reduces this to ``rho < 1``)."""
    if weights is None:
        weights = np.ones(kernel.n_events)
    br = branching_ratio(kernel, weights)
    sup = phi.sup_norm
    prod = br.rho * sup if br.rho > 0 else 0.0
    detail = f"rho={br.rho:.6g}, ||phi||_inf={sup:.6g}, product={prod:.6g}"
    if math.isfinite(sup) and prod < 1.0:
        return Status(Verdict.VERIFIED, detail)
    return Status(Verdict.VIOLATED, detail, witness={"target_event": br.target, "product": prod})


@dataclass
class SummabilityReport:
    n_max: int
    partial_sum: float
    monotone: Status
    divergence: Status
    explosion_warning: bool

    def to_dict(self):
        d = asdict(self)
        d["monotone"] = self.monotone.to_dict()
        d["divergence"] = self.divergence.to_dict()
        return d


def _a_grid(a, n_max):
    n = np.arange(n_max + 1)
    try:
        vals = np.asarray(a(n), dtype=np.float64)
        if vals.shape == n.shape:
            return vals
    except Exception:
        pass
    return np.array([float(a(int(k))) for k in n])


def summability_report(a, n_max: int, declared_divergent=None) -> SummabilityReport:
    """Partial sum of ``1/a(n)`` for ``n = 0..n_max`` with a monotonicity scan.

    Divergence is never decided numerically; the user's declaration is echoed.
    """
    vals = _a_grid(a, n_max)
    drops = np.flatnonzero(vals[1:] < vals[:-1])
    if len(drops):
        n = int(drops[0] + 1)
        monotone = Status(Verdict.VIOLATED, f"a({n}) < a({n - 1})", witness=n)
    else:
        monotone = Status(Verdict.VERIFIED_NUMERICALLY, f"non-decreasing on 0..{n_max}")
    partial = math.fsum((1.0 / vals).tolist())
    if declared_divergent is None:
        divergence = Status(Verdict.DECLARED_BY_USER, "no declaration; divergence undecidable")
    elif declared_divergent:
        divergence = Status(Verdict.DECLARED_BY_USER, "declared divergent")
    else:
        divergence = Status(Verdict.VIOLATED, "declared convergent: explosion expected",
                            witness={"partial_sum": partial})
    return SummabilityReport(n_max, partial, monotone, divergence,
                             explosion_warning=declared_divergent is False)


def initial_condition_check(init: Trajectory, kernel, horizon=1.0, n_grid=200):
    """Finiteness of the initial condition and of its excitation on ``(0, horizon]``.

    Returns ``(status_C, status_E_ii, grid, values)`` where ``values`` is
    ``max_e sum_i k(t - t_i, m_i, e)`` on a log-spaced grid.
    """
    c = Status(Verdict.VERIFIED, f"{len(init)} stored records")
    grid = np.geomspace(horizon * 1e-9, horizon, n_grid)
    if len(init) == 0 or kernel is None:
        return c, Status(Verdict.VERIFIED, "no initial excitation"), grid, np.zeros(n_grid)
    for s in getattr(kernel, "singular_lags", ()):
        hits = init.times + s
        inside = hits[(hits >= 0) & (hits <= horizon)]
        if len(inside):
            t = float(inside[0])
            witness = "t->0+" if t == 0 else f"t={t!r}"
            return (c, Status(Verdict.VIOLATED, "kernel unbounded inside the horizon",
                              witness=witness), grid, None)
    vals = np.empty(n_grid)
    for i, t in enumerate(grid):
        vals[i] = kernel.values(t - init.times, init.events, init.states).sum(axis=0).max()
    bad = np.flatnonzero(~np.isfinite(vals))
    if len(bad):
        return c, Status(Verdict.VIOLATED, "non-finite initial excitation",
                         witness=f"t={grid[bad[0]]!r}"), grid, vals
    return c, Status(Verdict.VERIFIED_NUMERICALLY, f"finite on {n_grid}-point log grid",
                     tolerance=None), grid, vals


def check_model(model: ModelSpec, horizon=1.0, n_max=10_000) -> AssumptionReport:
    """Full report over the count and Hawkes domination scenarios."""
    rep = AssumptionReport()
    f = model.functional
    w = model.weights
    rep.entries["A:finite_mark_mass"] = Status(Verdict.VERIFIED, f"total weight {w.sum():.6g}")
    rep.scalars["phi_sup_norm"] = model.transition.sup_norm
    kernel = getattr(f, "kernel", None)

    if isinstance(f, CountDominated):
        s = summability_report(f.a, n_max, f.declared_divergent)
        rep.entries["B:monotone"] = s.monotone
        rep.entries["B:divergent_series"] = s.divergence
        rep.scalars["partial_sum_inv_a"] = s.partial_sum
        rep.scalars["partial_sum_n_max"] = n_max
        if s.explosion_warning:
            rep.notes.append("sum 1/a(n) declared convergent: runs are expected to explode")
    elif isinstance(f, ConstantRate) or (isinstance(f, MarkovRate) and f.rate_table is not None):
        rep.entries["B:monotone"] = Status(Verdict.VERIFIED, "dominated by a constant")
        rep.entries["B:divergent_series"] = Status(Verdict.VERIFIED, "constant a(n)")
    elif isinstance(f, MarkovRate):
        rep.entries["B:monotone"] = Status(Verdict.DECLARED_BY_USER,
                                           "rate function assumed bounded")
    if not isinstance(f, StateDependentHawkes):
        rep.entries["C:finite_initial"] = Status(Verdict.VERIFIED,
                                                 f"{len(model.initial)} stored records")

    if isinstance(f, StateDependentHawkes):
        br = branching_ratio(kernel, w)
        rep.scalars["rho"] = br.rho
        rep.entries["D(i):hawkes_domination"] = Status(
            Verdict.VERIFIED, "dominated by the state-maximized kernel")
        if br.rho < 1:
            rep.entries["D(ii):branching_ratio"] = Status(Verdict.VERIFIED, f"rho={br.rho:.6g}")
        else:
            rep.entries["D(ii):branching_ratio"] = Status(
                Verdict.VIOLATED, f"rho={br.rho:.6g} >= 1",
                witness={"target_event": br.target, "rho": br.rho})
        singular = getattr(kernel, "singular_lags", ())
        if any(s > 0 for s in singular):
            rep.entries["D(iii):pointwise_finite"] = Status(
                Verdict.VIOLATED, "kernel unbounded at a positive lag",
                witness=min(s for s in singular if s > 0))
        else:
            rep.entries["D(iii):pointwise_finite"] = Status(Verdict.VERIFIED, "finite kernel")
        c, e2, _, vals = initial_condition_check(model.initial, kernel, horizon)
        rep.entries["C:finite_initial"] = c
        rep.entries["E(i):expected_excitation"] = Status(
            Verdict.NOT_APPLICABLE, "expectation over the initial law is out of scope")
        rep.entries["E(ii):initial_excitation"] = e2
        if vals is not None and len(vals):
            rep.scalars["max_initial_excitation"] = float(np.max(vals))
        rep.entries["corollary:rho_phi"] = check_corollary_constraint(
            model.transition, kernel, w)
        rep.notes.append("E(i) needs the law of the initial condition; only the stored "
                         "realization is checked (E(ii))")
    return rep
