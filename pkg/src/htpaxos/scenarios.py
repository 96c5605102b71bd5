"""Scenario generators behind the test suites and the bundled suite files."""

from __future__ import annotations

import random

from .config import Config, Fault, LanModel, NetConfig, Scenario, Workload


def reference() -> Scenario:
    """One client, one request, no faults, unit delay: the best-case run."""
    return Scenario(Config(D=3, S=3), NetConfig.uniform(), Workload(1, 1), name="reference")


def _net(rng: random.Random, max_loss=0.2, max_dup=0.1, gst=None):
    lans = []
    for _ in range(2):
        hi = rng.randint(1, 4)
        lans.append(LanModel(round(rng.uniform(0, max_loss), 3), round(rng.uniform(0, max_dup), 3), 1, hi))
    return NetConfig(tuple(lans), gst)


def safety_fuzz(seed: int) -> Scenario:
    """Lossy, duplicating, reordering network with disseminator and leader crashes."""
    rng = random.Random(f"safety/{seed}")
    faults = []
    for d in rng.sample(range(5), rng.randint(0, 2)):
        crash = rng.randint(5, 150)
        restart = crash + rng.randint(10, 200) if rng.random() < 0.5 else None
        faults.append(Fault(f"d{d}", crash, restart))
    if rng.random() < 0.8:
        crash = rng.randint(5, 150)
        faults.append(Fault("s0", crash, crash + rng.randint(10, 200)))
    cfg = Config(D=5, S=3, alpha=rng.choice((1, 4, 8)), batch_size=rng.choice((1, 2, 3)))
    return Scenario(cfg, _net(rng, gst=rng.randint(50, 400)), Workload(3, 20),
                    tuple(faults), horizon=4000, seed=seed, name=f"safety-{seed}")


def liveness(seed: int) -> Scenario:
    """Finite GST and at most a minority of each role ever faulty."""
    rng = random.Random(f"liveness/{seed}")
    faults = []
    for d in rng.sample(range(5), rng.randint(0, 2)):
        crash = rng.randint(5, 200)
        restart = crash + rng.randint(10, 300) if rng.random() < 0.5 else None
        faults.append(Fault(f"d{d}", crash, restart))
    if rng.random() < 0.7:
        s = rng.randrange(3)
        crash = rng.randint(5, 200)
        restart = crash + rng.randint(10, 300) if rng.random() < 0.5 else None
        faults.append(Fault(f"s{s}", crash, restart))
    cfg = Config(D=5, S=3, batch_size=rng.choice((1, 2)))
    return Scenario(cfg, _net(rng, gst=rng.randint(50, 300)), Workload(3, 10),
                    tuple(faults), horizon=5000, seed=seed, name=f"liveness-{seed}")


def violating(seed: int) -> Scenario:
    """Breaks a progress assumption: a majority of one role lost, or no GST."""
    rng = random.Random(f"violating/{seed}")
    kind = seed % 3
    faults, gst = [], rng.randint(50, 300)
    if kind == 0:
        for d in rng.sample(range(5), 3):
            faults.append(Fault(f"d{d}", rng.randint(5, 60)))
    elif kind == 1:
        for s in rng.sample(range(3), 2):
            faults.append(Fault(f"s{s}", rng.randint(5, 60)))
    else:
        gst = None
    cfg = Config(D=5, S=3)
    return Scenario(cfg, _net(rng, gst=gst), Workload(3, 5), tuple(faults),
                    horizon=800, seed=seed, name=f"violating-{seed}")


def steady_state(cycles: int = 40) -> Scenario:
    """Failure-free, loss-free load with batches of n/m = 2 requests.

    Two pinned clients per disseminator keep every disseminator producing one
    batch per round, so the leader orders m = D batch ids per round.
    """
    cfg = Config(D=10, S=3, L=1, batch_size=2, batch_timeout=1000, vote_delay=1,
                 alpha=16, heartbeat=5)
    return Scenario(cfg, NetConfig.uniform(), Workload(20, cycles, target="pinned"),
                    horizon=10_000, name="steady-state")


def failover() -> Scenario:
    """Kill the leader with four instances undecided.

    Client i submits at time i, so instance j gets its Phase2a at time 3 + j.
    The Phase2a messages for instances 1 and 2 are dropped, so only the old
    leader ever accepted them; instances 3 and 4 reach both acceptors but the
    leader dies before their Phase2b replies arrive.
    """
    cfg = Config(D=5, S=3, alpha=8)
    net = NetConfig(gst=0, drops=(("Phase2a", "s0", 4, 6),))
    return Scenario(cfg, net, Workload(5, 1, target="pinned", start_spread=1),
                    (Fault("s0", 8, 80),), horizon=2000, name="failover")
