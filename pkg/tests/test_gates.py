import threading

import pytest

from cryptovm.gates import (
    INPUT,
    SYNC,
    DEFAULT_LATENCY_MS,
    CostTable,
    GateDag,
    GateError,
    GateKind,
    SimBackend,
    SimKey,
    binary_gate,
    mux_bit,
    truth,
    unary_gate,
)

# Output column for inputs (a, b) = 00, 01, 10, 11.
TRUTH = {
    GateKind.AND: (0, 0, 0, 1),
    GateKind.NAND: (1, 1, 1, 0),
    GateKind.OR: (0, 1, 1, 1),
    GateKind.NOR: (1, 0, 0, 0),
    GateKind.XOR: (0, 1, 1, 0),
    GateKind.XNOR: (1, 0, 0, 1),
    GateKind.ANDNY: (0, 1, 0, 0),  # NOT a AND b
    GateKind.ANDYN: (0, 0, 1, 0),  # a AND NOT b
    GateKind.ORNY: (1, 1, 0, 1),  # NOT a OR b
    GateKind.ORYN: (1, 0, 1, 1),  # a OR NOT b
}


@pytest.mark.parametrize("kind", sorted(TRUTH, key=lambda k: k.value))
def test_binary_truth_tables(kind):
    be = SimBackend()
    for idx, (a, b) in enumerate([(0, 0), (0, 1), (1, 0), (1, 1)]):
        out = be.eval_gate(kind, be.encrypt_bit(a), be.encrypt_bit(b))
        assert be.decrypt_bit(out) == bool(TRUTH[kind][idx])
        assert truth(kind, a, b) == bool(TRUTH[kind][idx])


def test_unary_mux_constant():
    be = SimBackend()
    for a in (0, 1):
        x = be.encrypt_bit(a)
        assert be.decrypt_bit(be.eval_gate(GateKind.NOT, x)) == (not a)
        assert be.decrypt_bit(be.eval_gate(GateKind.COPY, x)) == bool(a)
        assert be.decrypt_bit(be.constant(bool(a))) == bool(a)
    for s in (0, 1):
        for a in (0, 1):
            for b in (0, 1):
                out = mux_bit(be, be.encrypt_bit(s), be.encrypt_bit(a), be.encrypt_bit(b))
                assert be.decrypt_bit(out) == bool(a if s else b)


def test_lanes_match_scalar_semantics():
    be = SimBackend(lanes=4)
    a = be.encrypt_lanes(0b1100)
    b = be.encrypt_lanes(0b1010)
    for kind, col in TRUTH.items():
        got = be.lane_values(be.eval_gate(kind, a, b))
        # lane k has (a, b) = (bit k of 1100, bit k of 1010)
        expect = sum(col[((0b1100 >> k & 1) << 1) | (0b1010 >> k & 1)] << k for k in range(4))
        assert got == expect, kind
    assert be.lane_values(be.eval_gate(GateKind.NOT, a)) == 0b0011


def test_arity_and_kind_errors():
    be = SimBackend()
    x = be.encrypt_bit(1)
    with pytest.raises(GateError):
        be.eval_gate(GateKind.AND, x)
    with pytest.raises(GateError):
        be.eval_gate(GateKind.NOT, x, x)
    with pytest.raises(GateError):
        be.eval_gate(GateKind.MUX, x, x)
    with pytest.raises(GateError):
        be.eval_gate(GateKind.CONSTANT)
    with pytest.raises(GateError):
        unary_gate(be, GateKind.AND, x)
    with pytest.raises(GateError):
        binary_gate(be, GateKind.NOT, x, x)


def test_bootstrap_classes():
    free = {GateKind.NOT, GateKind.COPY, GateKind.CONSTANT}
    for kind in GateKind:
        expect = 0 if kind in free else 2 if kind is GateKind.MUX else 1
        assert kind.bootstraps == expect


def test_default_costs_match_benchmark_table():
    table = CostTable.default()
    assert table[GateKind.AND] == 25.6176
    assert table[GateKind.MUX] == 49.2645
    assert table[GateKind.NOT] == 0.000679717
    assert table[GateKind.COPY] == 0.000624117
    assert table[GateKind.CONSTANT] == 0.00433995
    assert table[GateKind.XNOR] == 25.795
    assert set(DEFAULT_LATENCY_MS) == set(GateKind)


def test_cost_table_parse_and_roundtrip():
    t = CostTable.parse("# comment\nand = 3\n  MUX=7.5  # inline\n\n")
    assert t[GateKind.AND] == 3.0
    assert t[GateKind.MUX] == 7.5
    assert t[GateKind.OR] == CostTable.default()[GateKind.OR]
    assert CostTable.parse(t.dumps()) == t
    with pytest.raises(ValueError, match="line 2"):
        CostTable.parse("AND = 1\nFROB = 2")
    with pytest.raises(ValueError, match="line 1"):
        CostTable.parse("AND 1")
    with pytest.raises(ValueError):
        CostTable.parse("AND = -1")


def test_uniform_costs():
    t = CostTable.uniform(2.0)
    assert t[GateKind.XOR] == 2.0
    assert t[GateKind.MUX] == 4.0
    assert t[GateKind.NOT] == 0.0


def test_dag_records_every_gate_in_order():
    be = SimBackend(staged=False)
    a, b = be.encrypt_bit(1), be.encrypt_bit(0)
    c = be.eval_gate(GateKind.XOR, a, b)
    be.eval_gate(GateKind.NOT, c)
    kinds = [n.kind for n in be.dag]
    assert kinds == [INPUT, INPUT, GateKind.XOR, GateKind.NOT]
    for node in be.dag:
        assert node.node_id == be.dag.nodes.index(node)
        assert all(d < node.node_id for d in node.deps)
    assert be.dag[2].deps == (0, 1)
    assert be.dag[2].cost == DEFAULT_LATENCY_MS[GateKind.XOR]


def test_stage_adds_barrier():
    be = SimBackend()
    a, b = be.encrypt_bit(1), be.encrypt_bit(1)
    with be.stage("first"):
        x = be.eval_gate(GateKind.AND, a, b)
        y = be.eval_gate(GateKind.OR, a, b)
    z = be.eval_gate(GateKind.NOT, a)
    sync = be.dag[z.node_id].deps[-1]
    assert be.dag[sync].kind == SYNC
    assert set(be.dag[sync].deps) == {x.node_id, y.node_id}
    assert be.dag[x.node_id].region == "first"


def test_dataflow_mode_has_no_barriers():
    be = SimBackend(staged=False)
    a = be.encrypt_bit(1)
    with be.stage("s"):
        be.eval_gate(GateKind.NOT, a)
    assert all(n.kind != SYNC for n in be.dag)


def test_concurrent_gate_ids_are_unique_and_dense():
    be = SimBackend(staged=False)
    a, b = be.encrypt_bit(1), be.encrypt_bit(0)
    out: list[int] = []
    lock = threading.Lock()

    def worker():
        ids = [be.eval_gate(GateKind.AND, a, b).node_id for _ in range(200)]
        with lock:
            out.extend(ids)

    threads = [threading.Thread(target=worker) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(out) == list(range(2, 2 + 1600))
    assert [n.node_id for n in be.dag] == list(range(len(be.dag)))


def test_regions_are_per_thread():
    be = SimBackend(staged=False)
    a = be.encrypt_bit(1)
    seen = {}

    def worker(name):
        with be.region(name):
            seen[name] = be.eval_gate(GateKind.COPY, a).node_id

    threads = [threading.Thread(target=worker, args=(f"r{i}",)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for name, node_id in seen.items():
        assert be.dag[node_id].region == name


def test_dag_json_roundtrip_and_since():
    be = SimBackend()
    a, b = be.encrypt_bit(1), be.encrypt_bit(1)
    with be.stage("s"):
        be.eval_gate(GateKind.AND, a, b)
    start = be.dag.mark()
    be.eval_gate(GateKind.XOR, a, b)
    back = GateDag.from_json(be.dag.to_json())
    assert [(n.kind, n.deps, n.cost, n.region) for n in back] == [(n.kind, n.deps, n.cost, n.region) for n in be.dag]
    sub = be.dag.since(start)
    assert [n.kind for n in sub] == [INPUT, INPUT, INPUT, GateKind.XOR]
    with pytest.raises(ValueError):
        GateDag.from_json({"nodes": [[0, "AND", [1], 1.0, ""]]})


def test_decrypt_counts_and_lane_guard():
    be = SimBackend()
    be.decrypt_bit(be.encrypt_bit(1))
    assert be.decrypt_count == 1
    wide = SimBackend(lanes=8)
    with pytest.raises(ValueError):
        wide.decrypt_bit(wide.encrypt_lanes(3))
    with pytest.raises(ValueError):
        wide.encrypt_lanes(1 << 8)


def test_sealed_payload_needs_the_right_key():
    key = SimKey()
    be = SimBackend(key=key)
    bits = [be.encrypt_bit(v) for v in (1, 0, 1, 1)]
    payload = be.export_sealed(bits)
    assert key.open(payload) == bytes([1, 0, 1, 1])
    with pytest.raises(ValueError, match="does not decrypt"):
        SimKey().open(payload)
    with pytest.raises(ValueError):
        key.open(b"short")
    assert be.decrypt_count == 0
