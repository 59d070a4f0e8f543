"""Ready-made scenarios, the default evaluation profile, and config files.

A scenario bundles everything one run needs: topology, service classes,
prices, per-level round-trip times, protocol timing, the link model, and a
user trace.  Besides the built-in fixtures (two small walkthroughs that the
replay command checks against golden logs, plus synthetic families), any
scenario can be described as a JSON file; see :func:`load_config`.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

from .model import CostModel, ServiceClass, Topology, build_tree
from .protocol import ProtocolTiming
from .simnet import LinkModel, TraceEvent, load_trace

__all__ = [
    "Scenario",
    "default_profile",
    "fig_flat_scenario",
    "fig_two_tier_scenario",
    "empty_scenario",
    "rand_scenario",
    "jittered_scenario",
    "synth_scenario",
    "builtin_scenario",
    "BUILTIN_SCENARIOS",
    "load_config",
    "synthesize_trace",
]


@dataclass(frozen=True)
class Scenario:
    """Everything a single run needs, ready to hand to the simulator."""

    name: str
    topology: Topology
    classes: dict[int, ServiceClass]
    costs: CostModel
    rtt_by_level: dict[int, float]
    trace: tuple[TraceEvent, ...]
    timing: ProtocolTiming = ProtocolTiming()
    link: LinkModel = LinkModel()


# ---------------------------------------------------------------------------
# default evaluation profile

#: Round-trip time to a datacenter at each tree level (seconds).
PROFILE_RTT: dict[int, float] = {
    0: 0.001,
    1: 0.004,
    2: 0.008,
    3: 0.020,
    4: 0.040,
    5: 0.080,
}

#: Delay-bound classes: tight interactive traffic reaches levels 0-2 of the
#: reference tree, relaxed traffic reaches every level.
RT_CLASS = ServiceClass(
    class_id=0,
    name="rt",
    max_delay=0.010,
    cpu_demand={0: 170, 1: 170, 2: 190},
)
NONRT_CLASS = ServiceClass(
    class_id=1,
    name="nonrt",
    max_delay=0.100,
    cpu_demand={0: 170, 1: 170, 2: 170, 3: 170, 4: 170, 5: 170},
)

#: Hosting price per interval by class and level, and the flat relocation
#: charge; control traffic is priced per bit and reported separately.
PROFILE_COSTS = CostModel(
    migration_cost={0: 600.0, 1: 600.0},
    placement_cost={
        0: {0: 544.0, 1: 278.0, 2: 164.0},
        1: {0: 544.0, 1: 278.0, 2: 148.0, 3: 86.0, 4: 58.0, 5: 47.0},
    },
    per_bit_cost=3.0,
)


def default_profile(
    leaf_capacity: int,
    levels: int = 6,
    arity: int = 2,
) -> tuple[Topology, dict[int, ServiceClass], CostModel, dict[int, float]]:
    """The reference world: a binary fat tree with the standard two classes."""
    topology = build_tree(levels=levels, arity=arity, leaf_capacity=leaf_capacity)
    classes = {RT_CLASS.class_id: RT_CLASS, NONRT_CLASS.class_id: NONRT_CLASS}
    return topology, classes, PROFILE_COSTS, dict(PROFILE_RTT)


# ---------------------------------------------------------------------------
# walkthrough fixtures


def fig_flat_scenario() -> Scenario:
    """Root over four leaves; two late requests force one push-down.

    The first waves fill the root through push-ups and park one service at
    each of two leaves; the final pair of arrivals then cannot fit anywhere
    on their path and the root must push two of its tenants back down.
    """
    topology = build_tree(
        levels=2, arity=4, leaf_capacity=3, capacity_overrides={0: 5}
    )
    wide = ServiceClass(
        class_id=0, name="wide", max_delay=1.0, cpu_demand={0: 3, 1: 2}
    )
    slim = ServiceClass(
        class_id=1, name="slim", max_delay=1.0, cpu_demand={0: 2, 1: 2}
    )
    costs = CostModel(
        migration_cost={0: 10.0, 1: 10.0},
        placement_cost={0: {0: 3.0, 1: 2.0}, 1: {0: 3.0, 1: 2.0}},
        per_bit_cost=3.0,
    )
    trace = (
        TraceEvent(0.00, 2, "arrive", 2, slim.class_id),
        TraceEvent(0.00, 3, "arrive", 3, slim.class_id),
        TraceEvent(0.01, 1, "arrive", 1, wide.class_id),
        TraceEvent(0.01, 4, "arrive", 4, slim.class_id),
        TraceEvent(0.02, 5, "arrive", 4, slim.class_id),
        TraceEvent(0.02, 6, "arrive", 4, slim.class_id),
    )
    return Scenario(
        name="fig3",
        topology=topology,
        classes={0: wide, 1: slim},
        costs=costs,
        rtt_by_level={0: 0.001, 1: 0.002},
        trace=trace,
    )


def fig_two_tier_scenario() -> Scenario:
    """Three-level binary tree, capacity one everywhere; a push-down must
    relay through a middle node and relocate an earlier placement."""
    topology = build_tree(
        levels=3, arity=2, leaf_capacity=1,
        capacity_overrides={0: 1, 1: 1, 2: 1},
    )
    svc = ServiceClass(
        class_id=0, name="unit", max_delay=1.0, cpu_demand={0: 1, 1: 1, 2: 1}
    )
    costs = CostModel(
        migration_cost={0: 10.0},
        placement_cost={0: {0: 3.0, 1: 2.0, 2: 1.0}},
        per_bit_cost=3.0,
    )
    trace = (
        TraceEvent(0.00, 0, "arrive", 5, 0),
        TraceEvent(0.01, 1, "arrive", 3, 0),
        TraceEvent(0.02, 2, "arrive", 4, 0),
        TraceEvent(0.03, 3, "arrive", 4, 0),
        TraceEvent(0.04, 3, "depart"),
        TraceEvent(0.05, 4, "arrive", 4, 0),
    )
    return Scenario(
        name="fig2",
        topology=topology,
        classes={0: svc},
        costs=costs,
        rtt_by_level={0: 0.001, 1: 0.002, 2: 0.003},
        trace=trace,
    )


def empty_scenario() -> Scenario:
    """No users at all: the run must end immediately with empty reports."""
    topology, classes, costs, rtt = default_profile(leaf_capacity=340, levels=3)
    return Scenario(
        name="empty",
        topology=topology,
        classes=classes,
        costs=costs,
        rtt_by_level=rtt,
        trace=(),
    )


# ---------------------------------------------------------------------------
# synthetic traces


def _rt_draw(seed: int, user: int) -> float:
    """Per-user class draw, independent of everything else in the trace.

    Raising the interactive-traffic share can only flip users *into* the
    tight class, never shuffle the rest of the trace, so capacity needs are
    monotone in the share parameter."""
    return random.Random((seed << 20) ^ (user * 2_654_435_761 % (1 << 31))).random()


def synthesize_trace(
    topology: Topology,
    seed: int,
    users: int,
    p_rt: float,
    burst: bool = True,
    arrival_rate: float = 50.0,
    hold_mean: float | None = None,
    move_period: float | None = None,
    horizon: float = 4.0,
) -> tuple[TraceEvent, ...]:
    """Generate a user trace over the topology's leaves.

    ``burst`` drops every arrival at t=0 (single decision period);
    otherwise arrivals are Poisson at ``arrival_rate`` per second.  Users
    optionally depart after an exponential hold and hop to a fresh uniform
    leaf every ``move_period`` seconds (first hop no earlier than 50 ms
    after arrival, so placement has settled).
    """
    rng = random.Random(seed)
    leaves = list(topology.leaves)
    events: list[TraceEvent] = []
    clock = 0.0
    for user in range(users):
        if burst:
            t_arrive = 0.0
        else:
            clock += rng.expovariate(arrival_rate)
            t_arrive = clock
        poa = rng.choice(leaves)
        class_id = (
            RT_CLASS.class_id
            if _rt_draw(seed, user) < p_rt
            else NONRT_CLASS.class_id
        )
        events.append(TraceEvent(t_arrive, user, "arrive", poa, class_id))
        t_depart = (
            t_arrive + rng.expovariate(1.0 / hold_mean)
            if hold_mean is not None
            else None
        )
        if move_period is not None:
            mover = random.Random((seed << 8) ^ (user + 1))
            t = max(t_arrive + 0.05, t_arrive + mover.expovariate(1.0 / move_period))
            while t < horizon and (t_depart is None or t < t_depart):
                poa = mover.choice(leaves)
                events.append(TraceEvent(t, user, "move", poa))
                t += 0.05 + mover.expovariate(1.0 / move_period)
        if t_depart is not None and t_depart < horizon:
            events.append(TraceEvent(t_depart, user, "depart"))
    events.sort(key=lambda ev: (ev.time, ev.user, ev.kind != "arrive"))
    return tuple(events)


def rand_scenario(
    seed: int,
    users: int = 24,
    p_rt: float = 0.5,
    leaf_capacity: int = 600,
    levels: int = 4,
    arity: int = 2,
) -> Scenario:
    """Uniform single-burst scenario: all arrivals in one decision period,
    no mobility — the family used for cost comparisons across algorithms."""
    topology, classes, costs, rtt = default_profile(
        leaf_capacity=leaf_capacity, levels=levels, arity=arity
    )
    trace = synthesize_trace(topology, seed=seed, users=users, p_rt=p_rt, burst=True)
    return Scenario(
        name=f"rand-{seed}",
        topology=topology,
        classes=classes,
        costs=costs,
        rtt_by_level=rtt,
        trace=trace,
    )


def jittered_scenario(
    seed: int,
    users: int = 24,
    p_rt: float = 0.5,
    leaf_capacity: int = 600,
    levels: int = 6,
    arity: int = 2,
    timing: ProtocolTiming = ProtocolTiming(),
) -> Scenario:
    """Arrivals packed a few hundred microseconds apart, no churn.

    This is the family for signaling sweeps: gaps are of the same order as
    the accumulation windows, so widening a window genuinely merges more
    requests per run."""
    topology, classes, costs, rtt = default_profile(
        leaf_capacity=leaf_capacity, levels=levels, arity=arity
    )
    trace = synthesize_trace(
        topology,
        seed=seed,
        users=users,
        p_rt=p_rt,
        burst=False,
        arrival_rate=8000.0,
    )
    return Scenario(
        name=f"jitter-{seed}",
        topology=topology,
        classes=classes,
        costs=costs,
        rtt_by_level=rtt,
        trace=trace,
        timing=timing,
    )


def synth_scenario(
    seed: int,
    users: int = 30,
    p_rt: float = 0.4,
    leaf_capacity: int = 600,
    levels: int = 4,
    arity: int = 2,
    churn: bool = True,
) -> Scenario:
    """Streaming scenario with Poisson arrivals and optional churn."""
    topology, classes, costs, rtt = default_profile(
        leaf_capacity=leaf_capacity, levels=levels, arity=arity
    )
    trace = synthesize_trace(
        topology,
        seed=seed,
        users=users,
        p_rt=p_rt,
        burst=False,
        arrival_rate=40.0,
        hold_mean=2.0 if churn else None,
        move_period=0.8 if churn else None,
        horizon=3.0,
    )
    return Scenario(
        name=f"synth-{seed}",
        topology=topology,
        classes=classes,
        costs=costs,
        rtt_by_level=rtt,
        trace=trace,
    )


BUILTIN_SCENARIOS = ("fig2", "fig3", "empty", "rand", "synth", "jitter")


def builtin_scenario(name: str, seed: int = 1, **overrides: Any) -> Scenario:
    """Construct a named built-in scenario (see :data:`BUILTIN_SCENARIOS`)."""
    if name == "fig2":
        return fig_two_tier_scenario()
    if name == "fig3":
        return fig_flat_scenario()
    if name == "empty":
        return empty_scenario()
    if name == "rand":
        return rand_scenario(seed=seed, **overrides)
    if name == "synth":
        return synth_scenario(seed=seed, **overrides)
    if name == "jitter":
        return jittered_scenario(seed=seed, **overrides)
    raise ValueError(f"unknown scenario {name!r}; pick one of {BUILTIN_SCENARIOS}")


# ---------------------------------------------------------------------------
# config files


def _class_from_config(entry: Mapping[str, Any]) -> ServiceClass:
    return ServiceClass(
        class_id=int(entry["class_id"]),
        name=str(entry.get("name", f"class{entry['class_id']}")),
        max_delay=float(entry["max_delay"]),
        cpu_demand={int(k): int(v) for k, v in entry["cpu_demand"].items()},
    )


def load_config(path: str | Path, seed: int = 1) -> Scenario:
    """Build a scenario from a JSON config file.

    The file describes the tree (levels, arity, leaf capacity, optional
    per-node capacity overrides and pruned subtrees), the service classes
    with their prices, per-level round-trip times, optional timing and link
    overrides, and either a trace CSV path or a synthetic-trace block.
    """
    path = Path(path)
    with open(path) as fh:
        cfg = json.load(fh)
    try:
        tree = cfg["tree"]
        topology = build_tree(
            levels=int(tree["levels"]),
            arity=int(tree["arity"]),
            leaf_capacity=int(tree["leaf_capacity"]),
            capacity_overrides={
                int(k): int(v)
                for k, v in tree.get("capacity_overrides", {}).items()
            },
            prune=tuple(int(n) for n in tree.get("prune", ())),
        )
        classes = {
            int(entry["class_id"]): _class_from_config(entry)
            for entry in cfg["classes"]
        }
        costs = CostModel(
            migration_cost={
                int(entry["class_id"]): float(entry["migration_cost"])
                for entry in cfg["classes"]
            },
            placement_cost={
                int(entry["class_id"]): {
                    int(k): float(v) for k, v in entry["placement_cost"].items()
                }
                for entry in cfg["classes"]
            },
            per_bit_cost=float(cfg.get("per_bit_cost", 0.0)),
        )
        rtt = {int(k): float(v) for k, v in cfg["rtt_by_level"].items()}
    except KeyError as missing:
        raise ValueError(f"config {path} lacks required key {missing}") from None
    timing = ProtocolTiming(
        scan_window=float(cfg.get("timing", {}).get("scan_window", 0.0001)),
        push_down_window=float(
            cfg.get("timing", {}).get("push_down_window", 0.0004)
        ),
        fallback_period=float(cfg.get("timing", {}).get("fallback_period", 10.0)),
    )
    link = LinkModel(
        propagation=float(cfg.get("link", {}).get("propagation", 22e-6)),
        capacity_bps=float(cfg.get("link", {}).get("capacity_bps", 10e6)),
    )
    if "trace" in cfg:
        trace = tuple(load_trace(path.parent / cfg["trace"]))
    elif "synth" in cfg:
        synth = dict(cfg["synth"])
        trace = synthesize_trace(
            topology,
            seed=int(synth.pop("seed", seed)),
            users=int(synth.pop("users", 20)),
            p_rt=float(synth.pop("p_rt", 0.5)),
            **synth,
        )
    else:
        trace = ()
    for event in trace:
        if event.kind == "arrive" and event.class_id not in classes:
            raise ValueError(
                f"config {path}: trace uses class {event.class_id}, which the "
                f"config does not define (classes: {sorted(classes)})"
            )
    return Scenario(
        name=str(cfg.get("name", path.stem)),
        topology=topology,
        classes=classes,
        costs=costs,
        rtt_by_level=rtt,
        trace=trace,
        timing=timing,
        link=link,
    )


def with_leaf_capacity(scenario: Scenario, leaf_capacity: int) -> Scenario:
    """The same scenario on a tree rescaled to a new leaf capacity.

    Every node gets ``(level + 1) * leaf_capacity``; explicit overrides from
    the original tree are intentionally not preserved, since capacity
    searches sweep regular trees."""
    topo = scenario.topology
    rebuilt = Topology(
        parents={n: topo.parent(n) for n in topo.nodes},
        levels={n: topo.level(n) for n in topo.nodes},
        capacities={
            n: (topo.level(n) + 1) * leaf_capacity for n in topo.nodes
        },
    )
    return replace(scenario, topology=rebuilt)
