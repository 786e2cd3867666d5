from __future__ import annotations

import math

from cryptovm.alu import encrypt_int
from cryptovm.gates import CostTable, GateDag, SimBackend
from cryptovm.sched import UNBOUNDED, analyze


def op_dag(build, n: int, operands: int = 2, costs: CostTable | None = None) -> GateDag:
    """DAG of a single operation on fresh encrypted inputs."""
    be = SimBackend(costs=costs or CostTable.uniform())
    words = [encrypt_int(be, 0, n) for _ in range(operands)]
    start = be.dag.mark()
    build(*words)
    return be.dag.since(start)


def depth_in_g(build, n: int, operands: int = 2) -> float:
    report = analyze(op_dag(build, n, operands), workers=(UNBOUNDED,))
    return report.makespan_ms[UNBOUNDED]


def log2(n: int) -> int:
    return int(math.log2(n))
