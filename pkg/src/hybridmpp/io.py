"""Model configuration documents and trace files.

A configuration is a JSON document with three sections::

    {
      "model": {
        "event_weights": [1.0, 1.0],
        "states": {"kind": "discrete", "size": 2},
        "x0": 0,
        "functional": {"kind": "hawkes", "nu": [0.5, 0.5],
                       "kernel": {"kind": "exponential", "alpha": [...], "beta": 1.0}},
        "transition": {"kind": "table", "probs": [...]},
        "initial": [{"time": -1.0, "event": 0, "state": 1}]
      },
      "run": {"horizon": 100.0, "seed": 42},
      "validate": {"tests": ["residuals", "transitions"], "alpha": 0.01}
    }

Unknown keys are rejected.  The model hash is the SHA-256 of the canonical
(sorted-key, float-normalized) model section, so key order does not matter.

Trace files are CSV with ``#``-prefixed header lines.  Times are written with
``repr``, the shortest decimal that parses back to the same double.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .core import ContinuousStates, DiscreteStates, Trajectory
from .driver import RNG_ID
from .errors import ConfigError, HybridMPPError
from .functionals import ConstantRate, CountDominated, MarkovRate, ModelSpec, StateDependentHawkes
from .kernels import ExponentialKernel, PowerLawKernel
from .transitions import DiscreteTable, constant_increments, gaussian_increments

TRACE_FORMAT = "hybridmpp-trace 1"

_FUNCTIONAL_KEYS = {
    "constant": {"kind", "nu"},
    "markov": {"kind", "rates", "relative"},
    "hawkes": {"kind", "nu", "kernel"},
    "count": {"kind", "a", "n_events", "declared_divergent"},
}
_KERNEL_KEYS = {
    "exponential": {"kind", "alpha", "beta"},
    "power_law": {"kind", "alpha", "exponent", "cutoff"},
}
_A_KEYS = {
    "power": {"kind", "scale", "offset", "exponent"},
    "affine": {"kind", "intercept", "slope"},
}
_TRANSITION_KEYS = {
    "table": {"kind", "probs"},
    "identity": {"kind"},
    "gaussian_increment": {"kind", "mean", "sigma"},
    "constant_increment": {"kind", "jump"},
}
_SECTION_KEYS = {
    "": {"model", "run", "validate"},
    "model": {"event_weights", "states", "x0", "functional", "transition", "initial", "name"},
    "run": {"horizon", "seed", "seeds", "max_events", "max_candidates"},
    "validate": {"tests", "alpha"},
}


# --------------------------------------------------------------------------
# validation helpers


def _keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(path or "<root>", "expected an object")
    for k in obj:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}" if path else k, "unknown key")


def _get(obj, key, path, required=True, default=None):
    if key not in obj:
        if required:
            raise ConfigError(f"{path}.{key}", "missing required key")
        return default
    return obj[key]


def _number(v, path, positive=False, nonneg=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be non-negative, got {v!r}")
    return float(v)


def _vector(v, path, nonneg=True, positive=False):
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a non-empty list of numbers")
    return [_number(x, f"{path}[{i}]", positive=positive, nonneg=nonneg) for i, x in enumerate(v)]


def _tensor(v, path):
    def walk(x, p):
        if isinstance(x, list):
            for i, y in enumerate(x):
                walk(y, f"{p}[{i}]")
        else:
            _number(x, p, nonneg=True)
    walk(v, path)
    try:
        return np.array(v, dtype=np.float64)
    except ValueError:
        raise ConfigError(path, "ragged nested list") from None


def _int(v, path, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}, got {v}")
    return v


# --------------------------------------------------------------------------
# model construction


def _count_function(spec, path):
    _keys(spec, {"kind"} | set().union(*_A_KEYS.values()), path)
    kind = _get(spec, "kind", path)
    if kind not in _A_KEYS:
        raise ConfigError(f"{path}.kind", f"unknown count bound {kind!r}")
    _keys(spec, _A_KEYS[kind], path)
    if kind == "power":
        scale = _number(spec.get("scale", 1.0), f"{path}.scale", positive=True)
        offset = _number(spec.get("offset", 1.0), f"{path}.offset", positive=True)
        expo = _number(spec.get("exponent", 1.0), f"{path}.exponent", nonneg=True)
        return _PowerBound(scale, offset, expo)
    intercept = _number(_get(spec, "intercept", path), f"{path}.intercept", positive=True)
    slope = _number(spec.get("slope", 0.0), f"{path}.slope", nonneg=True)
    return _AffineBound(intercept, slope)


class _PowerBound:
    def __init__(self, scale, offset, exponent):
        self.scale, self.offset, self.exponent = scale, offset, exponent

    def __call__(self, n):
        return self.scale * (self.offset + n) ** self.exponent

    def __repr__(self):
        return f"{self.scale}*({self.offset}+n)**{self.exponent}"


class _AffineBound:
    def __init__(self, intercept, slope):
        self.intercept, self.slope = intercept, slope

    def __call__(self, n):
        return self.intercept + self.slope * n

    def __repr__(self):
        return f"{self.intercept}+{self.slope}*n"


def _kernel(spec, path):
    kind = _get(spec, "kind", path) if isinstance(spec, dict) else None
    if kind not in _KERNEL_KEYS:
        raise ConfigError(f"{path}.kind", f"unknown kernel kind {kind!r}")
    _keys(spec, _KERNEL_KEYS[kind], path)
    alpha = _tensor(_get(spec, "alpha", path), f"{path}.alpha")
    try:
        if kind == "exponential":
            return ExponentialKernel(alpha, _number(_get(spec, "beta", path), f"{path}.beta",
                                                    positive=True))
        return PowerLawKernel(alpha,
                              _number(_get(spec, "exponent", path), f"{path}.exponent"),
                              _number(_get(spec, "cutoff", path), f"{path}.cutoff"))
    except HybridMPPError as exc:
        raise ConfigError(path, str(exc)) from None


def _functional(spec, path, d):
    kind = _get(spec, "kind", path) if isinstance(spec, dict) else None
    if kind not in _FUNCTIONAL_KEYS:
        raise ConfigError(f"{path}.kind", f"unknown functional kind {kind!r}")
    _keys(spec, _FUNCTIONAL_KEYS[kind], path)
    if kind == "constant":
        return ConstantRate(_vector(_get(spec, "nu", path), f"{path}.nu"))
    if kind == "markov":
        rates = _vector(_get(spec, "rates", path), f"{path}.rates", positive=True)
        rel = _vector(spec.get("relative", [1.0] * d), f"{path}.relative")
        return MarkovRate(rates, rel)
    if kind == "hawkes":
        nu = _vector(_get(spec, "nu", path), f"{path}.nu")
        return StateDependentHawkes(nu, _kernel(_get(spec, "kernel", path), f"{path}.kernel"))
    a = _count_function(_get(spec, "a", path), f"{path}.a")
    div = spec.get("declared_divergent")
    if div is not None and not isinstance(div, bool):
        raise ConfigError(f"{path}.declared_divergent", "expected true/false")
    n = _int(spec.get("n_events", d), f"{path}.n_events", lo=1)
    return CountDominated(a, n, declared_divergent=div)


def _transition(spec, path, states, d):
    kind = _get(spec, "kind", path) if isinstance(spec, dict) else None
    if kind not in _TRANSITION_KEYS:
        raise ConfigError(f"{path}.kind", f"unknown transition kind {kind!r}")
    _keys(spec, _TRANSITION_KEYS[kind], path)
    if kind == "identity":
        if not states.discrete:
            raise ConfigError(f"{path}.kind", "identity transitions need discrete states")
        return DiscreteTable.identity(states.size, d)
    if kind == "table":
        probs = _tensor(_get(spec, "probs", path), f"{path}.probs")
        return DiscreteTable(probs)
    if states.discrete:
        raise ConfigError(f"{path}.kind", f"{kind} needs a continuous state space")
    if kind == "gaussian_increment":
        return gaussian_increments(_number(spec.get("mean", 0.0), f"{path}.mean"),
                                   _number(spec.get("sigma", 1.0), f"{path}.sigma", positive=True))
    return constant_increments(_number(spec.get("jump", 1.0), f"{path}.jump"))


def _states(spec, path):
    _keys(spec, {"kind", "size"}, path)
    kind = _get(spec, "kind", path)
    if kind == "discrete":
        return DiscreteStates(_int(_get(spec, "size", path), f"{path}.size", lo=1))
    if kind == "continuous":
        if "size" in spec:
            raise ConfigError(f"{path}.size", "continuous state spaces have no size")
        return ContinuousStates()
    raise ConfigError(f"{path}.kind", f"unknown state space kind {kind!r}")


def _guard(build, spec, path, *args):
    try:
        return build(spec, path, *args)
    except ConfigError:
        raise
    except HybridMPPError as exc:
        raise ConfigError(path, str(exc)) from None


def build_model(doc) -> ModelSpec:
    """ModelSpec from a parsed configuration document (whole document or model section)."""
    m = doc["model"] if "model" in doc else doc
    p = "model"
    _keys(m, _SECTION_KEYS["model"], p)
    weights = _vector(_get(m, "event_weights", p), f"{p}.event_weights", positive=True)
    d = len(weights)
    states = _states(_get(m, "states", p), f"{p}.states")
    x0 = m.get("x0", 0 if states.discrete else 0.0)
    if states.discrete:
        x0 = _int(x0, f"{p}.x0", lo=0)
    else:
        x0 = _number(x0, f"{p}.x0")
    functional = _guard(_functional, _get(m, "functional", p), f"{p}.functional", d)
    transition = _guard(_transition, _get(m, "transition", p), f"{p}.transition", states, d)
    init = m.get("initial", [])
    if not isinstance(init, list):
        raise ConfigError(f"{p}.initial", "expected a list of records")
    times, events, xs = [], [], []
    for i, rec in enumerate(init):
        rp = f"{p}.initial[{i}]"
        _keys(rec, {"time", "event", "state"}, rp)
        t = _number(_get(rec, "time", rp), f"{rp}.time")
        if t > 0:
            raise ConfigError(f"{rp}.time", "initial records must have time <= 0")
        times.append(t)
        events.append(_int(_get(rec, "event", rp), f"{rp}.event", lo=0))
        xs.append(_get(rec, "state", rp))
    try:
        initial = Trajectory.from_arrays(times, events, xs, x0, states) if init else None
        return ModelSpec(weights, states, transition, functional, initial, x0,
                         name=str(m.get("name", "")))
    except ConfigError:
        raise
    except HybridMPPError as exc:
        raise ConfigError(p, str(exc)) from None


def run_settings(doc):
    r = doc.get("run", {})
    _keys(r, _SECTION_KEYS["run"], "run")
    out = {}
    if "horizon" in r:
        out["horizon"] = _number(r["horizon"], "run.horizon", positive=True)
    if "seeds" in r:
        if not isinstance(r["seeds"], list):
            raise ConfigError("run.seeds", "expected a list of integers")
        out["seeds"] = [_int(s, f"run.seeds[{i}]", lo=0) for i, s in enumerate(r["seeds"])]
    if "seed" in r:
        out["seed"] = _int(r["seed"], "run.seed", lo=0)
    for k in ("max_events", "max_candidates"):
        if k in r:
            out[k] = _int(r[k], f"run.{k}", lo=1)
    return out


def validate_settings(doc):
    v = doc.get("validate", {})
    _keys(v, _SECTION_KEYS["validate"], "validate")
    tests = v.get("tests", ["residuals", "transitions"])
    for i, t in enumerate(tests):
        if t not in ("residuals", "transitions"):
            raise ConfigError(f"validate.tests[{i}]", f"unknown test {t!r}")
    alpha = _number(v.get("alpha", 0.01), "validate.alpha", positive=True)
    return {"tests": tests, "alpha": alpha}


def load_config(path):
    """Parse and structurally validate a configuration file; returns the document."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from None
    return check_document(doc)


def check_document(doc):
    """Validate every section of an in-memory document; returns it unchanged."""
    _keys(doc, _SECTION_KEYS[""], "")
    if "model" not in doc:
        raise ConfigError("model", "missing required section")
    build_model(doc)
    run_settings(doc)
    validate_settings(doc)
    return doc


def _canonical(obj):
    if isinstance(obj, dict):
        return {k: _canonical(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_canonical(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    return float(obj)


def model_hash(doc) -> str:
    m = doc["model"] if "model" in doc else doc
    text = json.dumps(_canonical(m), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------------------------
# traces


def _fmt_state(x):
    return repr(float(x)) if isinstance(x, float) else str(int(x))


def format_trace(traj: Trajectory, header: dict) -> str:
    lines = [f"# {TRACE_FORMAT}"]
    for k, v in header.items():
        lines.append(f"# {k}: {v}")
    lines.append(f"# origin_state: {_fmt_state(traj.origin_state)}")
    lines.append("time,event,state,segment")
    k0 = traj.n_initial
    for i, (t, e, x) in enumerate(zip(traj.times.tolist(), traj.events.tolist(),
                                      traj.states.tolist())):
        lines.append(f"{t!r},{e},{_fmt_state(x)},{'initial' if i < k0 else 'event'}")
    return "\n".join(lines) + "\n"


def trace_header(model_doc_hash, seed, horizon, status, state_kind):
    return {"model_hash": model_doc_hash, "seed": seed, "rng": RNG_ID,
            "horizon": repr(float(horizon)), "status": status, "state_kind": state_kind}


def write_trace(path, traj: Trajectory, header: dict):
    Path(path).write_text(format_trace(traj, header))


def parse_trace(text: str):
    """Return ``(header, trajectory)`` from trace text."""
    header = {}
    rows = []
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {TRACE_FORMAT}":
        raise ValueError("not a hybridmpp trace (missing format line)")
    for line in lines[1:]:
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition(":")
            header[k.strip()] = v.strip()
        elif line.startswith("time,"):
            continue
        elif line.strip():
            rows.append(line.split(","))
    continuous = header.get("state_kind") == "continuous"
    conv = float if continuous else int
    x0 = conv(header.pop("origin_state", "0"))
    for r in rows:
        if len(r) != 4 or r[3] not in ("initial", "event"):
            raise ValueError(f"malformed trace record: {','.join(r)}")
        if (r[3] == "initial") != (float(r[0]) <= 0):
            raise ValueError(f"segment label disagrees with time: {','.join(r)}")
    times = np.array([float(r[0]) for r in rows], dtype=np.float64)
    events = np.array([int(r[1]) for r in rows], dtype=np.int64)
    states = np.array([conv(r[2]) for r in rows], dtype=np.float64 if continuous else np.int64)
    return header, Trajectory(times, events, states, x0)


def read_trace(path):
    return parse_trace(Path(path).read_text())
