"""Gate-DAG analysis: counts, bootstrapped depth and list-scheduled makespan.

The worker model has no scheduling overhead. At each event time, ready gates
(all dependencies finished) are handed to free workers in ascending node id
order. Pseudo-nodes never occupy a worker: INPUT nodes are available at time
zero and a SYNC node completes the instant its last dependency does.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

from .gates import CostTable, GateDag, GateKind

UNBOUNDED = math.inf


@dataclass
class ScheduleReport:
    counts_by_kind: dict[str, int]
    bootstrapped_count: int
    critical_path_ms: float
    critical_path_levels: int
    makespan_ms: dict[float, float] = field(default_factory=dict)
    peak_width: int = 0

    def makespan(self, workers: float) -> float:
        return self.makespan_ms[workers]

    def to_json(self) -> dict:
        return {
            "counts_by_kind": dict(self.counts_by_kind),
            "bootstrapped_count": self.bootstrapped_count,
            "critical_path_ms": self.critical_path_ms,
            "critical_path_levels": self.critical_path_levels,
            "makespan_ms": {worker_key(p): ms for p, ms in self.makespan_ms.items()},
            "peak_width": self.peak_width,
        }


def worker_key(p: float) -> str:
    return "inf" if p == UNBOUNDED else str(int(p))


def parse_workers(spec: str) -> list[float]:
    """``"1,2,4,inf"`` -> ``[1, 2, 4, inf]``."""
    out: list[float] = []
    for tok in spec.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        if tok in ("inf", "unbounded", "∞"):
            out.append(UNBOUNDED)
            continue
        p = int(tok)
        if p < 1:
            raise ValueError(f"worker count must be positive, got {p}")
        out.append(p)
    if not out:
        raise ValueError("no worker counts given")
    return out


def _costs(dag: GateDag, costs: CostTable | None) -> list[float]:
    if costs is None:
        return [n.cost for n in dag.nodes]
    return [costs[n.kind] if n.is_gate else 0.0 for n in dag.nodes]


def _earliest(dag: GateDag, cost: list[float]) -> tuple[list[float], list[float]]:
    start = [0.0] * len(dag)
    finish = [0.0] * len(dag)
    for n in dag.nodes:
        s = max((finish[d] for d in n.deps), default=0.0)
        start[n.node_id] = s
        finish[n.node_id] = s + cost[n.node_id]
    return start, finish


def depth_bootstrapped(dag: GateDag) -> int:
    """Longest path counting single-bootstrap gates as 1, MUX as 2, free gates as 0."""
    depth = [0] * len(dag)
    best = 0
    for n in dag.nodes:
        d = max((depth[x] for x in n.deps), default=0) + n.bootstraps
        depth[n.node_id] = d
        best = max(best, d)
    return best


def makespan(dag: GateDag, workers: float, costs: CostTable | None = None) -> float:
    cost = _costs(dag, costs)
    if workers == UNBOUNDED:
        return max(_earliest(dag, cost)[1], default=0.0)
    return _list_schedule(dag, int(workers), cost)


def _list_schedule(dag: GateDag, workers: int, cost: list[float]) -> float:
    if workers < 1:
        raise ValueError("worker count must be positive")
    n = len(dag)
    children: list[list[int]] = [[] for _ in range(n)]
    waiting = [0] * n
    ready: list[int] = []
    running: list[tuple[float, int]] = []
    instant: list[int] = []
    for node in dag.nodes:
        deps = set(node.deps)
        waiting[node.node_id] = len(deps)
        for d in deps:
            children[d].append(node.node_id)
        if not deps:
            (ready if node.is_gate else instant).append(node.node_id)
    heapq.heapify(ready)

    t = end = 0.0
    free = workers

    def finish(i: int) -> None:
        stack = [i]
        while stack:
            for c in children[stack.pop()]:
                waiting[c] -= 1
                if waiting[c] == 0:
                    if dag.nodes[c].is_gate:
                        heapq.heappush(ready, c)
                    else:
                        stack.append(c)

    for i in instant:
        finish(i)
    while ready or running:
        while ready and free:
            i = heapq.heappop(ready)
            heapq.heappush(running, (t + cost[i], i))
            free -= 1
        t = running[0][0]
        while running and running[0][0] == t:
            _, i = heapq.heappop(running)
            free += 1
            end = t
            finish(i)
    return end


def peak_width(dag: GateDag, costs: CostTable | None = None) -> int:
    """Most bootstrapped gates in flight at once under unbounded workers."""
    cost = _costs(dag, costs)
    start, finish = _earliest(dag, cost)
    events = []
    for node in dag.nodes:
        if node.bootstraps and cost[node.node_id] > 0:
            events.append((finish[node.node_id], -1))
            events.append((start[node.node_id], 1))
    # Ends sort before starts at the same instant.
    events.sort()
    width = best = 0
    for _, delta in events:
        width += delta
        best = max(best, width)
    return best


def analyze(dag: GateDag, workers: Iterable[float] = (1, UNBOUNDED), costs: CostTable | None = None) -> ScheduleReport:
    """Full report for ``dag``; ``costs`` overrides the latencies recorded at build time."""
    gates = [n for n in dag.nodes if n.is_gate]
    if not gates:
        raise ValueError("cannot analyse an empty gate DAG")
    counts = Counter(n.kind.value for n in gates)
    cost = _costs(dag, costs)
    critical = max(_earliest(dag, cost)[1])
    report = ScheduleReport(
        counts_by_kind={k.value: counts[k.value] for k in GateKind if counts[k.value]},
        bootstrapped_count=sum(1 for n in gates if n.bootstraps),
        critical_path_ms=critical,
        critical_path_levels=depth_bootstrapped(dag),
        peak_width=peak_width(dag, costs),
    )
    for p in workers:
        report.makespan_ms[p] = critical if p == UNBOUNDED else _list_schedule(dag, int(p), cost)
    return report
