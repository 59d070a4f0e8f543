"""Fat-tree topology, service classes, and placement economics.

The world is a tree of datacenters: leaves are points of attachment (PoAs)
where users enter the network, the root is the central cloud, and capacity
grows with height.  A service request may only be hosted on a contiguous
prefix of the path from its PoA toward the root — the prefix where the
round-trip latency still honours the request's delay bound and the host
level is one the service supports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

__all__ = [
    "DatacenterId",
    "RequestId",
    "ServiceClass",
    "CostModel",
    "Request",
    "PlacementSnapshot",
    "FeasibilityReport",
    "Topology",
    "build_tree",
    "feasible_set_for",
    "objective_cost",
    "check_feasible",
]

DatacenterId = int
RequestId = int

#: Sentinel returned by :func:`objective_cost` for infeasible placements.
INFEASIBLE_COST = float("inf")


@dataclass(frozen=True)
class ServiceClass:
    """A class of service requests sharing demand and delay characteristics.

    ``cpu_demand`` maps a tree level to the CPU units one instance needs
    there; a level absent from the map cannot host this class at all.
    ``max_delay`` is the end-to-end latency bound (seconds) a placement
    must honour.
    """

    class_id: int
    name: str
    max_delay: float
    cpu_demand: Mapping[int, int]

    def demand_at(self, level: int) -> int | None:
        """CPU units needed at ``level``, or None when that level cannot host."""
        return self.cpu_demand.get(level)


@dataclass(frozen=True)
class CostModel:
    """Economic model: relocation, hosting, and transport prices.

    ``migration_cost`` charges relocating a placed instance (per class);
    ``placement_cost`` maps class id -> level -> the running cost of hosting
    one instance there; ``per_bit_cost`` prices control-plane traffic and is
    reported separately — it never enters the placement objective.
    """

    migration_cost: Mapping[int, float]
    placement_cost: Mapping[int, Mapping[int, float]]
    per_bit_cost: float = 0.0

    def place_price(self, class_id: int, level: int) -> float:
        return self.placement_cost[class_id][level]

    def move_price(self, class_id: int) -> float:
        return self.migration_cost[class_id]


@dataclass(frozen=True)
class Request:
    """One user's service request: identity, class, attachment, reach.

    ``feasible`` is the contiguous run of datacenters, ordered PoA to root,
    that can host the request without breaking its delay bound.
    """

    request_id: RequestId
    class_id: int
    poa: DatacenterId
    feasible: tuple[DatacenterId, ...]

    @property
    def top_feasible(self) -> DatacenterId:
        """The highest (closest-to-root) datacenter that may host this request."""
        return self.feasible[-1]


@dataclass(frozen=True)
class PlacementSnapshot:
    """Before/after placement maps for one decision period.

    ``current`` is where each request runs now; ``scheduled`` is where it
    will run after the period's decisions execute.  Requests absent from
    ``current`` are newly arrived; requests absent from ``scheduled`` were
    left unplaced.
    """

    current: Mapping[RequestId, DatacenterId]
    scheduled: Mapping[RequestId, DatacenterId]


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of checking a placement against capacity and latency limits."""

    ok: bool
    violations: tuple[str, ...] = ()
    unplaced: tuple[RequestId, ...] = ()


class Topology:
    """A rooted tree of datacenters with per-node CPU capacity.

    Levels count from the leaves: leaves sit at level 0 and the root at
    ``height - 1``.  Children are kept sorted by id so that every traversal
    in the simulator is deterministic.
    """

    def __init__(
        self,
        parents: Mapping[DatacenterId, DatacenterId | None],
        levels: Mapping[DatacenterId, int],
        capacities: Mapping[DatacenterId, int],
    ) -> None:
        roots = [n for n, p in parents.items() if p is None]
        if len(roots) != 1:
            raise ValueError(f"expected exactly one root, found {len(roots)}")
        self.root: DatacenterId = roots[0]
        self._parent = dict(parents)
        self._level = dict(levels)
        self._capacity = dict(capacities)
        children: dict[DatacenterId, list[DatacenterId]] = {n: [] for n in parents}
        for node, parent in parents.items():
            if parent is not None:
                if parent not in parents:
                    raise ValueError(f"node {node} has unknown parent {parent}")
                children[parent].append(node)
        self._children = {n: tuple(sorted(c)) for n, c in children.items()}
        self.nodes: tuple[DatacenterId, ...] = tuple(sorted(parents))
        self.leaves: tuple[DatacenterId, ...] = tuple(
            n for n in self.nodes if not self._children[n]
        )
        self.height: int = self._level[self.root] + 1
        self._subtree_cache: dict[DatacenterId, frozenset[DatacenterId]] = {}
        self._path_cache: dict[DatacenterId, tuple[DatacenterId, ...]] = {}
        self._validate()

    def _validate(self) -> None:
        for node in self.nodes:
            parent = self._parent[node]
            if parent is not None and self._level[parent] != self._level[node] + 1:
                raise ValueError(
                    f"node {node} at level {self._level[node]} has parent "
                    f"{parent} at level {self._level[parent]}"
                )
            if self._capacity[node] < 0:
                raise ValueError(f"node {node} has negative capacity")
        for leaf in self.leaves:
            if self._level[leaf] != 0:
                raise ValueError(f"leaf {leaf} is at level {self._level[leaf]}, not 0")

    def parent(self, node: DatacenterId) -> DatacenterId | None:
        return self._parent[node]

    def children(self, node: DatacenterId) -> tuple[DatacenterId, ...]:
        return self._children[node]

    def level(self, node: DatacenterId) -> int:
        return self._level[node]

    def capacity(self, node: DatacenterId) -> int:
        return self._capacity[node]

    def is_leaf(self, node: DatacenterId) -> bool:
        return not self._children[node]

    def subtree(self, node: DatacenterId) -> frozenset[DatacenterId]:
        """All datacenters in the subtree rooted at ``node`` (inclusive)."""
        cached = self._subtree_cache.get(node)
        if cached is None:
            members = set()
            stack = [node]
            while stack:
                cur = stack.pop()
                members.add(cur)
                stack.extend(self._children[cur])
            cached = frozenset(members)
            self._subtree_cache[node] = cached
        return cached

    def path_to_root(self, node: DatacenterId) -> tuple[DatacenterId, ...]:
        """The chain from ``node`` up to and including the root."""
        cached = self._path_cache.get(node)
        if cached is None:
            chain = [node]
            cur = self._parent[node]
            while cur is not None:
                chain.append(cur)
                cur = self._parent[cur]
            cached = tuple(chain)
            self._path_cache[node] = cached
        return cached

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"Topology(nodes={len(self.nodes)}, height={self.height}, "
            f"leaves={len(self.leaves)})"
        )


def build_tree(
    levels: int,
    arity: int,
    leaf_capacity: int,
    capacity_overrides: Mapping[DatacenterId, int] | None = None,
    prune: tuple[DatacenterId, ...] = (),
) -> Topology:
    """Build a full fat tree, then apply capacity overrides and pruning.

    Nodes are numbered breadth-first from the root (id 0).  A node at level
    ``l`` defaults to ``(l + 1) * leaf_capacity`` CPU units, so capacity
    grows linearly with height.  ``prune`` removes whole subtrees by their
    root id (ids keep the full-tree numbering); the result must still have
    every leaf at level 0.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if arity < 1:
        raise ValueError("arity must be >= 1")
    parents: dict[DatacenterId, DatacenterId | None] = {0: None}
    node_level: dict[DatacenterId, int] = {0: levels - 1}
    frontier = [0]
    next_id = 1
    for depth in range(1, levels):
        new_frontier: list[DatacenterId] = []
        for parent in frontier:
            for _ in range(arity):
                parents[next_id] = parent
                node_level[next_id] = levels - 1 - depth
                new_frontier.append(next_id)
                next_id += 1
        frontier = new_frontier
    removed: set[DatacenterId] = set()
    for top in prune:
        if top not in parents:
            raise ValueError(f"cannot prune unknown node {top}")
        stack = [top]
        while stack:
            cur = stack.pop()
            removed.add(cur)
            stack.extend(n for n, p in parents.items() if p == cur)
    kept = {n for n in parents if n not in removed}
    if 0 in removed:
        raise ValueError("cannot prune the root")
    capacities = {
        n: (node_level[n] + 1) * leaf_capacity for n in kept
    }
    for node, cap in (capacity_overrides or {}).items():
        if node not in kept:
            raise ValueError(f"capacity override for unknown node {node}")
        capacities[node] = cap
    return Topology(
        parents={n: parents[n] for n in kept},
        levels={n: node_level[n] for n in kept},
        capacities=capacities,
    )


def feasible_set_for(
    topology: Topology,
    poa: DatacenterId,
    svc: ServiceClass,
    rtt_by_level: Mapping[int, float],
) -> tuple[DatacenterId, ...]:
    """Datacenters that can host a request attached at ``poa``, PoA first.

    Walks the PoA-to-root path and keeps nodes while the level's round-trip
    time stays within the class delay bound and the class can run at that
    level; the walk stops at the first violation, so the result is always a
    contiguous path prefix.
    """
    if not topology.is_leaf(poa):
        raise ValueError(f"PoA must be a leaf, got node {poa}")
    out: list[DatacenterId] = []
    for node in topology.path_to_root(poa):
        level = topology.level(node)
        rtt = rtt_by_level.get(level)
        if rtt is None or rtt > svc.max_delay:
            break
        if svc.demand_at(level) is None:
            break
        out.append(node)
    return tuple(out)


def objective_cost(
    topology: Topology,
    classes: Mapping[int, ServiceClass],
    costs: CostModel,
    requests: Mapping[RequestId, Request],
    snapshot: PlacementSnapshot,
) -> float:
    """Total decision-period cost of moving from ``current`` to ``scheduled``.

    Sums one migration charge per request whose host changed plus the
    hosting price of every scheduled placement.  Returns infinity when any
    request is left unplaced, placed outside its feasible set, or when the
    scheduled load exceeds any datacenter's capacity.
    """
    load: dict[DatacenterId, int] = {}
    total = 0.0
    for rid, req in requests.items():
        node = snapshot.scheduled.get(rid)
        if node is None or node not in req.feasible:
            return INFEASIBLE_COST
        svc = classes[req.class_id]
        demand = svc.demand_at(topology.level(node))
        if demand is None:
            return INFEASIBLE_COST
        load[node] = load.get(node, 0) + demand
        total += costs.place_price(req.class_id, topology.level(node))
        previous = snapshot.current.get(rid)
        if previous is not None and previous != node:
            total += costs.move_price(req.class_id)
    for node, used in load.items():
        if used > topology.capacity(node):
            return INFEASIBLE_COST
    return total


def check_feasible(
    topology: Topology,
    classes: Mapping[int, ServiceClass],
    requests: Mapping[RequestId, Request],
    placement: Mapping[RequestId, DatacenterId],
) -> FeasibilityReport:
    """Check a placement map against latency reach and CPU capacity."""
    violations: list[str] = []
    unplaced: list[RequestId] = []
    load: dict[DatacenterId, int] = {}
    for rid in sorted(requests):
        req = requests[rid]
        node = placement.get(rid)
        if node is None:
            unplaced.append(rid)
            continue
        if node not in req.feasible:
            violations.append(f"request {rid} placed at {node}, outside its reach")
            continue
        demand = classes[req.class_id].demand_at(topology.level(node))
        if demand is None:
            violations.append(
                f"request {rid} placed at {node}, level cannot host its class"
            )
            continue
        load[node] = load.get(node, 0) + demand
    for node in sorted(load):
        if load[node] > topology.capacity(node):
            violations.append(
                f"datacenter {node} over capacity: {load[node]} > "
                f"{topology.capacity(node)}"
            )
    return FeasibilityReport(
        ok=not violations and not unplaced,
        violations=tuple(violations),
        unplaced=tuple(unplaced),
    )
