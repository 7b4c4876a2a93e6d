"""Command-line entry point: ``hybridmpp {simulate,check,validate,couple,intensity-path}``."""

from __future__ import annotations

import argparse
import enum
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import assumptions, io, simulator, validation
from .errors import (ConfigError, DominationBreach, HashMismatch, HybridMPPError,
                     NonIncreasingTimes)
from .functionals import StateDependentHawkes
from .kernels import state_maximized


class Exit(enum.IntEnum):
    OK = 0
    USAGE = 2
    CONFIG = 3
    EXPLOSION = 4
    BUDGET = 5
    SIMULATION = 6
    VALIDATION_FAILED = 7
    INCONCLUSIVE = 8
    HASH_MISMATCH = 9
    DOMINATION_BREACH = 10
    ASSUMPTION_VIOLATED = 11


_STATUS_EXIT = {
    simulator.Status.COMPLETED: Exit.OK,
    simulator.Status.EXPLOSION_SUSPECTED: Exit.EXPLOSION,
    simulator.Status.CANDIDATE_BUDGET_EXHAUSTED: Exit.BUDGET,
}


def parse_seeds(text):
    """``"7"``, ``"1,5,9"`` or ``"1..100"`` (inclusive range)."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds or min(seeds) < 0:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}")
    return seeds


def _sim_config(doc, args, seed):
    run = io.run_settings(doc)
    horizon = args.horizon if getattr(args, "horizon", None) else run.get("horizon")
    if horizon is None:
        raise ConfigError("run.horizon", "missing (or pass --horizon)")
    kw = {k: run[k] for k in ("max_events", "max_candidates") if k in run}
    return simulator.SimConfig(horizon=horizon, seed=seed, **kw)


def _seeds(doc, args):
    if getattr(args, "seeds", None):
        return args.seeds
    if getattr(args, "seed", None) is not None:
        return [args.seed]
    run = io.run_settings(doc)
    return run.get("seeds") or [run.get("seed", 0)]


def _simulate_job(job):
    doc, cfg, out_dir = job
    model = io.build_model(doc)
    res = simulator.simulate(model, cfg)
    header = io.trace_header(io.model_hash(doc), cfg.seed, cfg.horizon, res.status.value,
                             "discrete" if model.states.discrete else "continuous")
    path = Path(out_dir) / f"trace_seed{cfg.seed}.csv"
    io.write_trace(path, res.trajectory, header)
    return {"seed": cfg.seed, "status": res.status.value, "events": res.trajectory.n_new,
            "candidates": res.diagnostics["candidates"], "path": str(path)}


def cmd_simulate(args):
    doc = io.load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(doc, _sim_config(doc, args, s), str(out)) for s in _seeds(doc, args)]
    workers = args.workers or simulator.default_workers()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            summaries = list(pool.map(_simulate_job, jobs))
    else:
        summaries = [_simulate_job(j) for j in jobs]
    code = Exit.OK
    for s in summaries:
        print(f"seed={s['seed']} status={s['status']} events={s['events']} "
              f"candidates={s['candidates']} trace={s['path']}")
        c = _STATUS_EXIT[simulator.Status(s["status"])]
        code = max(code, c)
    return code


def cmd_check(args):
    doc = io.load_config(args.config)
    model = io.build_model(doc)
    horizon = io.run_settings(doc).get("horizon", 1.0)
    rep = assumptions.check_model(model, horizon=horizon, n_max=args.n_max)
    print(json.dumps(rep.to_dict(), indent=2, default=str) if args.json else rep.render())
    return Exit.OK if rep.ok else Exit.ASSUMPTION_VIOLATED


def cmd_validate(args):
    doc = io.load_config(args.config)
    model = io.build_model(doc)
    settings = io.validate_settings(doc)
    expected = io.model_hash(doc)
    reports, code = [], Exit.OK
    for path in args.traces:
        header, traj = io.read_trace(path)
        if header.get("model_hash") != expected:
            raise HashMismatch(f"{path}: trace model hash {header.get('model_hash')} "
                               f"does not match config hash {expected}")
        rep = {"trace": str(path)}
        passed, reliable = True, True
        if "residuals" in settings["tests"]:
            rs = validation.rescaled_residuals(traj, model, settings["alpha"])
            rep["residuals"] = rs.to_dict()
            passed &= rs.passed
            reliable &= rs.reliable
        if "transitions" in settings["tests"] and model.states.discrete:
            tt = validation.transition_frequency_test(traj, model.transition, settings["alpha"])
            rep["transitions"] = tt.to_dict()
            passed &= tt.passed
        rep["passed"], rep["reliable"] = bool(passed), bool(reliable)
        reports.append(rep)
        if not reliable:
            code = max(code, Exit.INCONCLUSIVE)
        elif not passed:
            code = max(code, Exit.VALIDATION_FAILED)
    if args.json:
        print(json.dumps(reports, indent=2, default=float))
    else:
        for r in reports:
            verdict = "unreliable" if not r["reliable"] else ("pass" if r["passed"] else "FAIL")
            print(f"{r['trace']}: {verdict}")
            if "residuals" in r:
                for e, k in enumerate(r["residuals"]["per_type"]):
                    if k is None:
                        print(f"  residuals e={e}: no residuals")
                    else:
                        print(f"  residuals e={e}: n={k['n']} KS={k['statistic']:.4f} "
                              f"crit={k['critical']:.4f} {'pass' if k['passed'] else 'FAIL'}")
            if "transitions" in r:
                t = r["transitions"]
                print(f"  transitions: chi2={t['statistic']:.3f} df={t['df']} "
                      f"p={t['p_value']:.4f} {'pass' if t['passed'] else 'FAIL'}")
    return code


def cmd_couple(args):
    doc = io.load_config(args.config)
    model = io.build_model(doc)
    if args.dominating:
        dom = io.build_model(io.load_config(args.dominating))
    elif isinstance(model.functional, StateDependentHawkes):
        dom = model.replace(functional=type(model.functional)(
            model.functional.nu, state_maximized(model.functional.kernel)))
    else:
        raise ConfigError("dominating", "required unless the model is a Hawkes functional")
    code = Exit.OK
    for seed in _seeds(doc, args):
        cfg = _sim_config(doc, args, seed)
        try:
            a, b = simulator.simulate_coupled(model, dom, cfg, spot_checks=args.spot_checks)
        except DominationBreach as exc:
            where = "" if exc.time is None else f" first offending event t={exc.time!r} e={exc.event}"
            print(f"seed={seed} BREACH{where}: {exc}")
            code = Exit.DOMINATION_BREACH
            continue
        print(f"seed={seed} contained dominated_events={a.trajectory.n_new} "
              f"dominating_events={b.trajectory.n_new}")
    return code


def _grid(text):
    lo, hi, n = text.split(":")
    return np.linspace(float(lo), float(hi), int(n))


def cmd_intensity_path(args):
    doc = io.load_config(args.config)
    model = io.build_model(doc)
    _, traj = io.read_trace(args.trace)
    if args.grid:
        grid = _grid(args.grid)
    else:
        horizon = io.run_settings(doc).get("horizon", float(traj.times[-1]) if len(traj) else 1.0)
        grid = np.linspace(0.0, horizon, 201)
    vals = simulator.intensity_path(model, traj, grid)
    print("time," + ",".join(f"lambda_{e}" for e in range(model.n_events)))
    for t, row in zip(grid.tolist(), vals.tolist()):
        print(f"{t!r}," + ",".join(repr(v) for v in row))
    return Exit.OK


def build_parser():
    p = argparse.ArgumentParser(prog="hybridmpp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate one trace per seed")
    s.add_argument("config")
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", type=parse_seeds, help="e.g. 1..100 or 3,5,8")
    s.add_argument("--horizon", type=float)
    s.add_argument("--out", default=".")
    s.add_argument("--workers", type=int, help="default: $HYBRIDMPP_WORKERS or 1")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="check existence assumptions")
    c.add_argument("config")
    c.add_argument("--json", action="store_true")
    c.add_argument("--n-max", type=int, default=10_000)
    c.set_defaults(func=cmd_check)

    v = sub.add_parser("validate", help="time-rescaling and transition tests on traces")
    v.add_argument("config")
    v.add_argument("traces", nargs="+")
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_validate)

    k = sub.add_parser("couple", help="domination coupling containment check")
    k.add_argument("config")
    k.add_argument("dominating", nargs="?",
                   help="dominating config (default: state-maximized kernel)")
    k.add_argument("--seed", type=int)
    k.add_argument("--seeds", type=parse_seeds)
    k.add_argument("--horizon", type=float)
    k.add_argument("--spot-checks", type=int, default=0,
                   help="random-history intensity comparisons before each run")
    k.set_defaults(func=cmd_couple)

    ip = sub.add_parser("intensity-path", help="evaluate lambda_bar along a trace")
    ip.add_argument("config")
    ip.add_argument("trace")
    ip.add_argument("--grid", help="start:stop:num")
    ip.set_defaults(func=cmd_intensity_path)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return int(Exit.CONFIG)
    except HashMismatch as exc:
        print(f"hash mismatch: {exc}", file=sys.stderr)
        return int(Exit.HASH_MISMATCH)
    except (NonIncreasingTimes, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return int(Exit.CONFIG)
    except HybridMPPError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return int(Exit.SIMULATION)


if __name__ == "__main__":
    sys.exit(main())
