"""
Coupling a process under its dominator
======================================

When one intensity functional is pointwise below another, both processes can
be driven by the same candidate stream so that every event of the smaller one
is also an event of the larger one.  Swapping the roles breaks the ordering,
and the coupled run reports the first event where it fails.
"""

from pathlib import Path

from hybridmpp import SimConfig, StateDependentHawkes, io, simulate_coupled, state_maximized
from hybridmpp.errors import DominationBreach

configs = Path(__file__).parent / "configs"
weak = io.build_model(io.load_config(configs / "hawkes_weak.json"))
strong = io.build_model(io.load_config(configs / "hawkes.json"))

a, b = simulate_coupled(weak, strong, SimConfig(100.0, seed=0))
inside = set(a.trajectory.times.tolist()) <= set(b.trajectory.times.tolist())
print(f"weak run {a.trajectory.n_new} events, strong run {b.trajectory.n_new}, contained: {inside}")

# a state-dependent kernel is dominated by its maximum over source states
sd = io.build_model(io.load_config(configs / "state_hawkes.json"))
dom = sd.replace(functional=StateDependentHawkes(sd.functional.nu,
                                                 state_maximized(sd.functional.kernel)))
a, b = simulate_coupled(sd, dom, SimConfig(100.0, seed=0))
print(f"state-dependent {a.trajectory.n_new} events inside {b.trajectory.n_new}")

try:
    simulate_coupled(strong, weak, SimConfig(100.0, seed=0), spot_checks=0)
except DominationBreach as exc:
    print("inverted pair:", exc)
