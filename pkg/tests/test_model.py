"""Tests for the topology, feasibility, and cost layer."""

from __future__ import annotations

import random

import pytest

from edgeplace.model import (
    CostModel,
    PlacementSnapshot,
    Request,
    ServiceClass,
    Topology,
    build_tree,
    check_feasible,
    feasible_set_for,
    objective_cost,
)
from edgeplace.scenarios import (
    NONRT_CLASS,
    PROFILE_COSTS,
    PROFILE_RTT,
    RT_CLASS,
    default_profile,
)

from .oracles import brute_feasible


# ---------------------------------------------------------------------------
# tree construction


def test_build_tree_reference_shape() -> None:
    topo = build_tree(levels=6, arity=2, leaf_capacity=10)
    assert len(topo.nodes) == 63
    assert topo.root == 0
    assert topo.level(topo.root) == 5
    assert topo.capacity(topo.root) == 60
    assert len(topo.leaves) == 32
    assert all(topo.level(leaf) == 0 for leaf in topo.leaves)
    assert all(topo.capacity(leaf) == 10 for leaf in topo.leaves)


def test_build_tree_breadth_first_numbering() -> None:
    topo = build_tree(levels=3, arity=2, leaf_capacity=2)
    assert topo.nodes == (0, 1, 2, 3, 4, 5, 6)
    assert topo.children(0) == (1, 2)
    assert topo.children(1) == (3, 4)
    assert topo.children(2) == (5, 6)
    assert [topo.level(n) for n in topo.nodes] == [2, 1, 1, 0, 0, 0, 0]
    # default capacity is (level + 1) * leaf capacity
    assert [topo.capacity(n) for n in topo.nodes] == [6, 4, 4, 2, 2, 2, 2]


def test_build_tree_overrides_make_irregular_capacities() -> None:
    topo = build_tree(
        levels=3, arity=2, leaf_capacity=2, capacity_overrides={0: 5, 4: 1}
    )
    assert topo.capacity(0) == 5
    assert topo.capacity(4) == 1
    assert topo.capacity(3) == 2  # untouched nodes keep the default


def test_build_tree_degenerate_single_node() -> None:
    topo = build_tree(levels=1, arity=1, leaf_capacity=1)
    assert topo.nodes == (0,)
    assert topo.root == 0
    assert topo.leaves == (0,)
    assert topo.level(0) == 0
    assert topo.capacity(0) == 1
    assert topo.height == 1


def test_build_tree_prune_removes_whole_subtree() -> None:
    topo = build_tree(levels=3, arity=2, leaf_capacity=2, prune=(1,))
    assert topo.nodes == (0, 2, 5, 6)
    assert topo.children(0) == (2,)
    assert topo.leaves == (5, 6)


def test_build_tree_rejects_bad_arguments() -> None:
    with pytest.raises(ValueError):
        build_tree(levels=0, arity=2, leaf_capacity=1)
    with pytest.raises(ValueError):
        build_tree(levels=2, arity=0, leaf_capacity=1)
    with pytest.raises(ValueError):
        build_tree(levels=2, arity=2, leaf_capacity=1, prune=(99,))
    with pytest.raises(ValueError):
        build_tree(levels=2, arity=2, leaf_capacity=1, prune=(0,))
    with pytest.raises(ValueError):
        build_tree(levels=2, arity=2, leaf_capacity=1, capacity_overrides={9: 4})


def test_build_tree_prune_cannot_orphan_an_inner_node() -> None:
    # removing both children of node 1 leaves it childless at level 1,
    # which the validator refuses: every leaf must sit at level 0
    with pytest.raises(ValueError):
        build_tree(levels=3, arity=2, leaf_capacity=2, prune=(3, 4))


def test_topology_validation_errors() -> None:
    with pytest.raises(ValueError):  # two roots
        Topology(
            parents={0: None, 1: None},
            levels={0: 0, 1: 0},
            capacities={0: 1, 1: 1},
        )
    with pytest.raises(ValueError):  # unknown parent
        Topology(parents={0: None, 1: 7}, levels={0: 1, 1: 0}, capacities={0: 1, 1: 1})
    with pytest.raises(ValueError):  # child level must be parent level - 1
        Topology(
            parents={0: None, 1: 0},
            levels={0: 3, 1: 0},
            capacities={0: 1, 1: 1},
        )
    with pytest.raises(ValueError):  # negative capacity
        Topology(
            parents={0: None, 1: 0},
            levels={0: 1, 1: 0},
            capacities={0: 1, 1: -2},
        )
    with pytest.raises(ValueError):  # a leaf stranded above level 0
        Topology(parents={0: None}, levels={0: 2}, capacities={0: 1})


def test_subtree_and_path_to_root() -> None:
    topo = build_tree(levels=3, arity=2, leaf_capacity=1)
    assert topo.subtree(1) == {1, 3, 4}
    assert topo.subtree(0) == set(topo.nodes)
    assert topo.subtree(6) == {6}
    assert topo.path_to_root(5) == (5, 2, 0)
    assert topo.path_to_root(0) == (0,)
    assert topo.parent(0) is None
    assert topo.is_leaf(3) and not topo.is_leaf(1)


# ---------------------------------------------------------------------------
# feasible sets


def test_feasible_set_depth_tracks_delay_bound() -> None:
    topo, _classes, _costs, rtt = default_profile(leaf_capacity=10)
    leaf = topo.leaves[0]
    tight = feasible_set_for(topo, leaf, RT_CLASS, rtt)
    relaxed = feasible_set_for(topo, leaf, NONRT_CLASS, rtt)
    # the tight class stops where the round trip first exceeds 10 ms
    assert len(tight) == 3
    assert [topo.level(n) for n in tight] == [0, 1, 2]
    # the relaxed class reaches the root of the six-level tree
    assert len(relaxed) == 6
    assert relaxed == topo.path_to_root(leaf)
    assert tight == relaxed[:3]


def test_feasible_set_zero_delay_is_empty() -> None:
    topo, _classes, _costs, rtt = default_profile(leaf_capacity=10)
    never = ServiceClass(class_id=9, name="never", max_delay=0.0, cpu_demand={0: 1})
    assert feasible_set_for(topo, topo.leaves[0], never, rtt) == ()


def test_feasible_set_stops_at_first_demand_gap() -> None:
    # demand defined at levels 0 and 2 but not 1: the walk must stop at the
    # gap, never skip over it
    topo = build_tree(levels=3, arity=2, leaf_capacity=4)
    gappy = ServiceClass(
        class_id=5, name="gappy", max_delay=1.0, cpu_demand={0: 1, 2: 1}
    )
    rtt = {0: 0.001, 1: 0.002, 2: 0.003}
    assert feasible_set_for(topo, 3, gappy, rtt) == (3,)


def test_feasible_set_stops_where_rtt_is_undefined() -> None:
    topo = build_tree(levels=3, arity=2, leaf_capacity=4)
    svc = ServiceClass(class_id=0, name="s", max_delay=1.0, cpu_demand={0: 1, 1: 1, 2: 1})
    assert feasible_set_for(topo, 3, svc, {0: 0.001}) == (3,)


def test_feasible_set_requires_a_leaf() -> None:
    topo, _classes, _costs, rtt = default_profile(leaf_capacity=10)
    with pytest.raises(ValueError):
        feasible_set_for(topo, topo.root, RT_CLASS, rtt)


def test_feasible_set_is_contiguous_path_prefix() -> None:
    rng = random.Random(7)
    for _ in range(50):
        levels = rng.randint(1, 5)
        arity = rng.randint(1, 3)
        topo = build_tree(levels=levels, arity=arity, leaf_capacity=5)
        max_delay = rng.choice([0.0, 0.002, 0.005, 0.05, 1.0])
        demand_levels = {
            lvl: 1 for lvl in range(levels) if rng.random() < 0.8
        }
        svc = ServiceClass(
            class_id=0, name="x", max_delay=max_delay, cpu_demand=demand_levels
        )
        rtt = {lvl: PROFILE_RTT.get(lvl, 0.1) for lvl in range(levels)}
        poa = rng.choice(topo.leaves)
        feas = feasible_set_for(topo, poa, svc, rtt)
        assert feas == topo.path_to_root(poa)[: len(feas)]


# ---------------------------------------------------------------------------
# objective cost


def _one_request(topo: Topology, rtt: dict[int, float]) -> Request:
    leaf = topo.leaves[0]
    return Request(
        request_id=1,
        class_id=NONRT_CLASS.class_id,
        poa=leaf,
        feasible=feasible_set_for(topo, leaf, NONRT_CLASS, rtt),
    )


def test_objective_cost_of_single_root_placement() -> None:
    topo, classes, costs, rtt = default_profile(leaf_capacity=340)
    req = _one_request(topo, rtt)
    snapshot = PlacementSnapshot(current={}, scheduled={1: topo.root})
    assert objective_cost(topo, classes, costs, {1: req}, snapshot) == 47.0


def test_objective_cost_charges_one_migration() -> None:
    topo, classes, costs, rtt = default_profile(leaf_capacity=340)
    req = _one_request(topo, rtt)
    mid = req.feasible[1]  # the level-1 aggregation node
    snapshot = PlacementSnapshot(current={1: req.poa}, scheduled={1: mid})
    # hosting at level 1 plus one relocation charge
    assert objective_cost(topo, classes, costs, {1: req}, snapshot) == 278.0 + 600.0


def test_objective_cost_no_charge_when_host_unchanged() -> None:
    topo, classes, costs, rtt = default_profile(leaf_capacity=340)
    req = _one_request(topo, rtt)
    snapshot = PlacementSnapshot(current={1: req.poa}, scheduled={1: req.poa})
    assert objective_cost(topo, classes, costs, {1: req}, snapshot) == 544.0


def test_objective_cost_empty_is_zero() -> None:
    topo, classes, costs, _rtt = default_profile(leaf_capacity=10)
    assert (
        objective_cost(topo, classes, costs, {}, PlacementSnapshot({}, {})) == 0.0
    )


def test_objective_cost_infeasible_sentinels() -> None:
    topo, classes, costs, rtt = default_profile(leaf_capacity=340)
    req = _one_request(topo, rtt)
    inf = float("inf")
    # left unplaced
    assert (
        objective_cost(
            topo, classes, costs, {1: req}, PlacementSnapshot({}, {})
        )
        == inf
    )
    # placed outside the feasible set
    other_leaf = next(n for n in topo.leaves if n not in req.feasible)
    assert (
        objective_cost(
            topo, classes, costs, {1: req}, PlacementSnapshot({}, {1: other_leaf})
        )
        == inf
    )
    # over capacity: a 340-unit leaf holds two 170-unit instances, not three
    many = {
        rid: Request(rid, req.class_id, req.poa, req.feasible)
        for rid in range(1, 4)
    }
    crowded = PlacementSnapshot({}, {rid: req.poa for rid in many})
    assert objective_cost(topo, classes, costs, many, crowded) == inf
    two = {rid: many[rid] for rid in (1, 2)}
    snug = PlacementSnapshot({}, {rid: req.poa for rid in two})
    assert objective_cost(topo, classes, costs, two, snug) == 2 * 544.0


def test_objective_cost_rejects_level_without_demand() -> None:
    topo = build_tree(levels=2, arity=2, leaf_capacity=10)
    svc = ServiceClass(class_id=0, name="leafy", max_delay=1.0, cpu_demand={0: 1})
    costs = CostModel(
        migration_cost={0: 1.0}, placement_cost={0: {0: 1.0, 1: 1.0}}
    )
    req = Request(request_id=1, class_id=0, poa=1, feasible=(1, 0))
    snapshot = PlacementSnapshot(current={}, scheduled={1: 0})
    assert objective_cost(topo, {0: svc}, costs, {1: req}, snapshot) == float("inf")


def test_profile_prices_fall_with_height() -> None:
    for class_id, by_level in PROFILE_COSTS.placement_cost.items():
        prices = [by_level[lvl] for lvl in sorted(by_level)]
        assert all(a > b for a, b in zip(prices, prices[1:])), class_id


# ---------------------------------------------------------------------------
# feasibility reports


def test_check_feasible_reports_over_capacity() -> None:
    topo = build_tree(levels=1, arity=1, leaf_capacity=2)
    svc = ServiceClass(class_id=0, name="pair", max_delay=1.0, cpu_demand={0: 2})
    requests = {
        rid: Request(rid, 0, 0, (0,)) for rid in (1, 2)
    }
    report = check_feasible(topo, {0: svc}, requests, {1: 0, 2: 0})
    assert not report.ok
    assert report.violations == ("datacenter 0 over capacity: 4 > 2",)
    assert report.unplaced == ()


def test_check_feasible_reports_missing_placement() -> None:
    topo = build_tree(levels=1, arity=1, leaf_capacity=2)
    svc = ServiceClass(class_id=0, name="one", max_delay=1.0, cpu_demand={0: 1})
    requests = {1: Request(1, 0, 0, (0,))}
    report = check_feasible(topo, {0: svc}, requests, {})
    assert not report.ok
    assert report.unplaced == (1,)
    assert report.violations == ()


def test_check_feasible_reports_out_of_reach() -> None:
    topo = build_tree(levels=2, arity=2, leaf_capacity=2)
    svc = ServiceClass(class_id=0, name="one", max_delay=1.0, cpu_demand={0: 1, 1: 1})
    requests = {1: Request(1, 0, 1, (1,))}
    report = check_feasible(topo, {0: svc}, requests, {1: 2})
    assert not report.ok
    assert "outside its reach" in report.violations[0]


def test_check_feasible_accepts_exact_fit() -> None:
    topo = build_tree(levels=1, arity=1, leaf_capacity=4)
    svc = ServiceClass(class_id=0, name="pair", max_delay=1.0, cpu_demand={0: 2})
    requests = {rid: Request(rid, 0, 0, (0,)) for rid in (1, 2)}
    report = check_feasible(topo, {0: svc}, requests, {1: 0, 2: 0})
    assert report.ok
    assert report.violations == () and report.unplaced == ()


def test_check_feasible_matches_brute_force() -> None:
    rng = random.Random(23)
    for _ in range(120):
        levels = rng.randint(1, 3)
        arity = rng.randint(1, 2)
        topo = build_tree(levels=levels, arity=arity, leaf_capacity=rng.randint(1, 3))
        demand = {0: {lvl: rng.randint(1, 2) for lvl in range(levels)}}
        svc = ServiceClass(
            class_id=0, name="x", max_delay=1.0, cpu_demand=demand[0]
        )
        rtt = {lvl: 0.001 for lvl in range(levels)}
        requests = {}
        placement = {}
        for rid in range(rng.randint(1, 5)):
            poa = rng.choice(topo.leaves)
            feas = feasible_set_for(topo, poa, svc, rtt)
            requests[rid] = Request(rid, 0, poa, feas)
            # sometimes deliberately place outside the feasible set
            placement[rid] = rng.choice(topo.nodes)
        report = check_feasible(topo, {0: svc}, requests, placement)
        expected = brute_feasible(
            topo,
            demand,
            {rid: (0, placement[rid]) for rid in requests},
            {rid: requests[rid].feasible for rid in requests},
        )
        assert report.ok == expected


def test_request_top_feasible() -> None:
    req = Request(request_id=4, class_id=0, poa=9, feasible=(9, 4, 1))
    assert req.top_feasible == 1
