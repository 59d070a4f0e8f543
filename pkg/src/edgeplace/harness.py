"""Experiment orchestration: runs, golden replays, sweeps, capacity search.

This is the layer the CLI is built on.  Everything here is deterministic:
given the same scenario parameters and seeds, every function returns the
same rows, so reports can be diffed byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from io import StringIO
from typing import Any, Iterable, Mapping, Sequence

from . import golden_logs
from .baselines import ALGORITHMS, exact_optimal, min_cpu_binary_search
from .protocol import ProtocolTiming
from .scenarios import Scenario, builtin_scenario, jittered_scenario, rand_scenario
from .simnet import RunResult, Simulator

__all__ = [
    "ALGO_CHOICES",
    "build_simulator",
    "run_scenario",
    "metrics_row",
    "metrics_rows_for",
    "render_rows",
    "write_rows",
    "ReplayOutcome",
    "replay_fixture",
    "golden_text_for",
    "sweep_overhead",
    "min_cpu_for",
    "METRIC_FIELDS",
]

#: Algorithms a run can use: the distributed protocol plus the centralized
#: per-epoch algorithms.
ALGO_CHOICES: tuple[str, ...] = ("dapp",) + tuple(sorted(ALGORITHMS))


def build_simulator(
    scenario: Scenario,
    algo: str,
    *,
    event_budget: int = 500_000,
    check_invariants: bool = False,
    bnb_budget: int = 200_000,
) -> Simulator:
    """A fresh simulator for one run of ``algo`` over ``scenario``."""
    common = dict(
        topology=scenario.topology,
        classes=scenario.classes,
        costs=scenario.costs,
        rtt_by_level=scenario.rtt_by_level,
        timing=scenario.timing,
        link=scenario.link,
        event_budget=event_budget,
        check_invariants=check_invariants,
    )
    if algo == "dapp":
        return Simulator(mode="protocol", **common)
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; pick one of {ALGO_CHOICES}")
    if algo == "exact":
        algorithm = lambda problem: exact_optimal(problem, node_budget=bnb_budget)
    else:
        algorithm = ALGORITHMS[algo]
    return Simulator(mode="centralized", algorithm=algorithm, **common)


def run_scenario(
    scenario: Scenario,
    algo: str,
    *,
    event_budget: int = 500_000,
    check_invariants: bool = False,
    bnb_budget: int = 200_000,
    until: float | None = None,
) -> RunResult:
    """Run one algorithm over one scenario to quiescence."""
    sim = build_simulator(
        scenario,
        algo,
        event_budget=event_budget,
        check_invariants=check_invariants,
        bnb_budget=bnb_budget,
    )
    return sim.run(scenario.trace, until=until)


# ---------------------------------------------------------------------------
# metrics rows and report rendering

METRIC_FIELDS = (
    "scenario",
    "algorithm",
    "seed",
    "verdict",
    "requests",
    "placed",
    "failed",
    "unplaced",
    "migrations",
    "push_downs",
    "messages",
    "bytes_per_request",
    "decision_cost",
    "normalized_cost",
    "migration_cost",
    "placement_cost",
    "comm_cost",
    "end_time",
)


def metrics_row(
    scenario_name: str,
    algo: str,
    seed: int,
    result: RunResult,
    reference_cost: float | None = None,
) -> dict[str, Any]:
    """One flat report row; ``reference_cost`` normalizes the decision cost
    against the exact solver's run on the same inputs."""
    if (
        reference_cost is not None
        and reference_cost > 0
        and math.isfinite(result.decision_cost)
    ):
        normalized = result.decision_cost / reference_cost
    else:
        normalized = float("nan")
    return {
        "scenario": scenario_name,
        "algorithm": algo,
        "seed": seed,
        "verdict": result.verdict,
        "requests": result.request_count,
        "placed": len(result.placements),
        "failed": len(result.failed),
        "unplaced": len(result.unplaced),
        "migrations": result.counters.migrations,
        "push_downs": result.counters.push_downs,
        "messages": result.counters.total_messages(),
        "bytes_per_request": result.overhead_bytes_per_request,
        "decision_cost": result.decision_cost,
        "normalized_cost": normalized,
        "migration_cost": result.migration_cost,
        "placement_cost": result.final_placement_cost,
        "comm_cost": result.comm_cost,
        "end_time": result.end_time,
    }


def metrics_rows_for(
    scenario: Scenario,
    algos: Sequence[str],
    seed: int,
    *,
    event_budget: int = 500_000,
    bnb_budget: int = 200_000,
    check_invariants: bool = False,
    normalize: bool = True,
) -> tuple[list[dict[str, Any]], dict[str, RunResult]]:
    """Run every requested algorithm once and build their report rows.

    Also runs the exact solver as the normalization reference when asked
    (reusing it if it is itself on the algorithm list).  Scenarios with no
    requests produce no rows.
    """
    results: dict[str, RunResult] = {}
    reference_cost: float | None = None
    if normalize:
        reference = run_scenario(
            scenario,
            "exact",
            event_budget=event_budget,
            bnb_budget=bnb_budget,
            check_invariants=check_invariants,
        )
        if "exact" in algos:
            results["exact"] = reference
        if reference.verdict == "ok" and not reference.solver_exhausted:
            reference_cost = reference.decision_cost
    for algo in algos:
        if algo not in results:
            results[algo] = run_scenario(
                scenario,
                algo,
                event_budget=event_budget,
                bnb_budget=bnb_budget,
                check_invariants=check_invariants,
            )
    rows = [
        metrics_row(scenario.name, algo, seed, results[algo], reference_cost)
        for algo in algos
        if results[algo].request_count > 0
    ]
    return rows, results


def _csv_cell(value: Any) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return f"{value:.6f}"
    return str(value)


def render_rows(rows: Sequence[Mapping[str, Any]], fmt: str) -> str:
    """Serialize report rows deterministically as CSV or JSON."""
    if fmt == "json":
        cleaned = [
            {
                k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in row.items()
            }
            for row in rows
        ]
        return json.dumps(cleaned, indent=2, sort_keys=True) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    columns: tuple[str, ...] = tuple(rows[0]) if rows else METRIC_FIELDS
    out = StringIO()
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(_csv_cell(row[c]) for c in columns) + "\n")
    return out.getvalue()


def write_rows(
    rows: Sequence[Mapping[str, Any]], path: str | None, fmt: str
) -> str:
    """Render rows; write them to ``path`` when given.  Returns the text."""
    text = render_rows(rows, fmt)
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# golden replays


@dataclass(frozen=True)
class ReplayOutcome:
    """Result of replaying a fixture against its frozen event log."""

    name: str
    ok: bool
    diff: tuple[str, ...]
    result: RunResult


def _first_divergence(expected: Sequence[str], actual: Sequence[str]) -> list[str]:
    for index, (exp, act) in enumerate(zip(expected, actual)):
        if exp != act:
            return [
                f"first difference at event {index + 1}:",
                f"  expected: {exp}",
                f"  actual:   {act}",
            ]
    if len(expected) != len(actual):
        index = min(len(expected), len(actual))
        exp = expected[index] if index < len(expected) else "<end of log>"
        act = actual[index] if index < len(actual) else "<end of log>"
        return [
            f"first difference at event {index + 1}:",
            f"  expected: {exp}",
            f"  actual:   {act}",
        ]
    return []


def replay_fixture(
    name: str,
    golden_text: str | None = None,
    *,
    event_budget: int = 500_000,
) -> ReplayOutcome:
    """Re-run a built-in fixture and compare its event log to the frozen one.

    ``golden_text`` overrides the embedded log (used to test the comparison
    itself); otherwise the fixture's committed log is used.
    """
    if golden_text is None:
        golden_text = golden_logs.GOLDEN_LOGS.get(name)
        if golden_text is None:
            raise ValueError(
                f"no frozen log for {name!r}; choose one of "
                f"{sorted(golden_logs.GOLDEN_LOGS)}"
            )
    scenario = builtin_scenario(name)
    result = run_scenario(
        scenario, "dapp", event_budget=event_budget, check_invariants=True
    )
    diff = _first_divergence(golden_text.splitlines(), result.event_log)
    return ReplayOutcome(name=name, ok=not diff, diff=tuple(diff), result=result)


def golden_text_for(name: str, *, event_budget: int = 500_000) -> str:
    """The event log a fixture produces right now (for regeneration)."""
    scenario = builtin_scenario(name)
    result = run_scenario(
        scenario, "dapp", event_budget=event_budget, check_invariants=True
    )
    return "\n".join(result.event_log) + "\n"


# ---------------------------------------------------------------------------
# capacity search and signaling sweep


def min_cpu_for(
    algo: str,
    *,
    seed: int = 1,
    users: int = 12,
    p_rt: float = 0.5,
    levels: int = 4,
    arity: int = 2,
    family: str = "rand",
    tolerance: int = 1,
    start: int = 8,
    max_capacity: int = 1 << 20,
    event_budget: int = 500_000,
    bnb_budget: int = 200_000,
) -> int:
    """Least leaf capacity at which ``algo`` serves the whole scenario.

    The scenario family is regenerated at each probed capacity with the same
    seed, so the workload is identical and only the tree scales.  A probe
    succeeds only on a fully clean run (everything placed, no failures, no
    budget exhaustion).
    """
    if family == "rand":
        make = rand_scenario
    elif family == "jitter":
        make = jittered_scenario
    else:
        raise ValueError(f"unknown scenario family {family!r}")

    def probe(leaf_capacity: int) -> bool:
        scenario = make(
            seed=seed,
            users=users,
            p_rt=p_rt,
            leaf_capacity=leaf_capacity,
            levels=levels,
            arity=arity,
        )
        result = run_scenario(
            scenario, algo, event_budget=event_budget, bnb_budget=bnb_budget
        )
        return result.verdict == "ok"

    return min_cpu_binary_search(
        probe, start=start, max_capacity=max_capacity, tolerance=tolerance
    )


def sweep_overhead(
    p_rt_grid: Sequence[float],
    t_ad_grid: Sequence[float],
    seeds: Iterable[int],
    *,
    users: int = 24,
    levels: int = 6,
    arity: int = 2,
    event_budget: int = 500_000,
    leaf_capacity: int | None = None,
) -> list[dict[str, Any]]:
    """Signaling cost of the protocol across class-mix and batching grids.

    Per seed, the tree is sized 10% above the least capacity the exact
    solver needs with every user in the tight class (the hardest mix), then
    each (share, window) grid point runs the protocol with the push-down
    window at four times the scan window.  ``leaf_capacity`` overrides the
    sizing step.  Rows are sorted, one per grid point and seed.
    """
    rows: list[dict[str, Any]] = []
    for seed in sorted(set(seeds)):
        if leaf_capacity is None:
            base = min_cpu_for(
                "exact",
                seed=seed,
                users=users,
                p_rt=1.0,
                levels=levels,
                arity=arity,
                family="jitter",
                event_budget=event_budget,
            )
            capacity = max(1, math.ceil(1.10 * base))
        else:
            capacity = leaf_capacity
        for p_rt in p_rt_grid:
            for t_ad in t_ad_grid:
                timing = ProtocolTiming(
                    scan_window=t_ad, push_down_window=4.0 * t_ad
                )
                scenario = jittered_scenario(
                    seed=seed,
                    users=users,
                    p_rt=p_rt,
                    leaf_capacity=capacity,
                    levels=levels,
                    arity=arity,
                    timing=timing,
                )
                result = run_scenario(
                    scenario, "dapp", event_budget=event_budget
                )
                rows.append(
                    {
                        "p_rt": p_rt,
                        "t_ad": t_ad,
                        "seed": seed,
                        "leaf_capacity": capacity,
                        "verdict": result.verdict,
                        "messages": result.counters.total_messages(),
                        "bytes_per_request": result.overhead_bytes_per_request,
                    }
                )
    rows.sort(key=lambda r: (r["p_rt"], r["t_ad"], r["seed"]))
    return rows
