import contextlib
import itertools
import json
import logging
import random
import socket

import pytest

import oracles as ref
from cryptovm import memfile
from cryptovm.alu import Flags, decrypt_int
from cryptovm.emulator import END, ERROR, MachineState, run
from cryptovm.gates import SimBackend, SimKey
from cryptovm.isa import CONDITIONS, assemble
from cryptovm.keyservice import (
    BranchClient,
    BranchQuery,
    LocalOracle,
    ProtocolError,
    RemoteOracle,
    decrypt_file,
    encrypt_file,
    follow_branch,
    load_key,
    query_remote,
    resolve_branch,
    save_key,
    serve,
)

LOOP = "MOV R0 R0 42\nLoop_label:\n    SUBS R0 R0 1\n    B_NE Loop_label\n"


def sealed(be, n, z, c, v):
    return be.export_sealed([be.encrypt_bit(x) for x in (n, z, c, v)])


@pytest.fixture
def key():
    return SimKey()


@pytest.fixture
def server(key):
    with serve(("127.0.0.1", 0), key).start() as srv:
        yield srv


def test_resolve_examples(key):
    be = SimBackend(key=key)
    assert resolve_branch(BranchQuery("AL", sealed(be, 0, 0, 0, 0)), key).taken
    assert not resolve_branch(BranchQuery("NE", sealed(be, 0, 1, 0, 0)), key).taken
    assert resolve_branch(BranchQuery("HI", sealed(be, 0, 0, 1, 0)), key).taken


def test_resolve_rejects_foreign_payload(key):
    be = SimBackend()  # different key
    with pytest.raises(ValueError):
        resolve_branch(BranchQuery("EQ", sealed(be, 0, 1, 0, 0)), key)


def test_query_validation():
    with pytest.raises(ProtocolError):
        BranchQuery.from_json({"type": "branch", "cond": "ZZ", "nzcv": ""})
    with pytest.raises(ProtocolError):
        BranchQuery.from_json({"type": "branch", "cond": "EQ", "nzcv": "***"})
    with pytest.raises(ProtocolError):
        BranchQuery.from_json({"type": "other"})
    q = BranchQuery("LT", b"\x01\x02", pc=8, target=0)
    assert BranchQuery.from_json(json.loads(json.dumps(q.to_json()))) == q


def test_wire_and_local_oracles_agree(key, server):
    be = SimBackend(key=key)
    local = LocalOracle(be)
    remote = RemoteOracle(be, server.endpoint)
    try:
        for cond in CONDITIONS:
            for bits in itertools.product([False, True], repeat=4):
                nzcv = Flags(*(be.encrypt_bit(x) for x in bits))
                expect = ref.condition_holds(cond, *bits)
                assert local.resolve(cond, nzcv) == expect
                assert remote.resolve(cond, nzcv) == expect
    finally:
        remote.close()


def test_one_shot_query(key, server):
    be = SimBackend(key=key)
    assert query_remote(server.endpoint, BranchQuery("NE", sealed(be, 0, 1, 0, 0))).taken is False


def test_malformed_line_keeps_connection_open(key, server):
    be = SimBackend(key=key)
    host, port = server.server_address[:2]
    with socket.create_connection((host, port)) as sock:
        f = sock.makefile("rwb")
        f.write(b"{not json\n")
        f.flush()
        reply = json.loads(f.readline())
        assert reply["type"] == "error" and reply["msg"]
        f.write(b'{"type": "branch", "cond": "EQ", "nzcv": "AAAA"}\n')
        f.flush()
        assert json.loads(f.readline())["type"] == "error"
        good = BranchQuery("EQ", sealed(be, 0, 1, 0, 0)).to_json()
        f.write((json.dumps(good) + "\n").encode())
        f.flush()
        assert json.loads(f.readline()) == {"type": "branch_resp", "taken": True}


def test_loop_over_the_wire_matches_in_process(key, server):
    p = assemble(LOOP, word_size=16)
    results = []
    for make in (LocalOracle, lambda be: RemoteOracle(be, server.endpoint)):
        be = SimBackend(key=key)
        oracle = make(be)
        state = run(MachineState(be, width=16, oracle=oracle), p)
        if isinstance(oracle, RemoteOracle):
            oracle.close()
        results.append((state.status, decrypt_int(state.reg(0)), state.stats["branch_queries"], state.pc))
    assert results[0] == results[1] == (END, 0, 42, 12)


def test_user_controlled_next_pc(key):
    with serve(("127.0.0.1", 0), key, policy=follow_branch).start() as srv:
        be = SimBackend(key=key)
        client = BranchClient(srv.endpoint)
        reply = client.query(BranchQuery("EQ", sealed(be, 0, 1, 0, 0), pc=4, target=40))
        assert reply.taken and reply.next_pc == 40
        reply = client.query(BranchQuery("NE", sealed(be, 0, 1, 0, 0), pc=4, target=40))
        assert not reply.taken and reply.next_pc == 8
        client.close()
        oracle = RemoteOracle(be, srv.endpoint)
        state = run(MachineState(be, width=16, oracle=oracle), assemble(LOOP, word_size=16))
        oracle.close()
        assert decrypt_int(state.reg(0)) == 0


def test_connection_loss_halts_with_error(key):
    srv = serve(("127.0.0.1", 0), key).start()
    be = SimBackend(key=key)
    oracle = RemoteOracle(be, srv.endpoint)
    srv.close()
    with contextlib.suppress(OSError):  # peer may already have reset it
        oracle.client._sock.shutdown(socket.SHUT_RDWR)
    state = run(MachineState(be, width=16, oracle=oracle), assemble(LOOP, word_size=16))
    assert state.status == ERROR
    assert "connection" in state.error or "closed" in state.error


def test_logs_carry_only_the_outcome(key, server, caplog):
    be = SimBackend(key=key)
    caplog.set_level(logging.DEBUG)
    oracle = RemoteOracle(be, server.endpoint)
    run(MachineState(be, width=16, oracle=oracle), assemble(LOOP, word_size=16))
    oracle.close()
    text = " ".join(r.getMessage() for r in caplog.records)
    for needle in ("nzcv", "n=", "z=", "flags"):
        assert needle not in text.lower()


def test_key_file_roundtrip(tmp_path, key):
    save_key(key, tmp_path / "k")
    assert load_key(tmp_path / "k").secret == key.secret
    (tmp_path / "bad").write_text("zz")
    with pytest.raises(ValueError):
        load_key(tmp_path / "bad")


# -- memory file format -----------------------------------------------------------


def test_two_word_file_layout(tmp_path):
    path = tmp_path / "a.mem"
    encrypt_file([1, 3], 16, path)
    assert path.read_bytes() == b"CEMU" + bytes([1]) + (16).to_bytes(2, "little") + (2).to_bytes(4, "little") + b"\x01\x00\x03\x00"
    assert decrypt_file(path) == (16, [1, 3])


def test_empty_file(tmp_path):
    encrypt_file([], 32, tmp_path / "e.mem")
    assert decrypt_file(tmp_path / "e.mem") == (32, [])
    assert (tmp_path / "e.mem").stat().st_size == 11


def test_odd_width_packs_lsb_first():
    data = memfile.pack(12, [0xABC])
    assert data[11:] == bytes([0xBC, 0x0A])
    assert memfile.unpack(data) == (12, [0xABC])


def test_random_roundtrips(tmp_path):
    rng = random.Random(7)
    for i in range(1000):
        width = rng.choice([8, 16, 32, 64])
        values = [rng.getrandbits(width) for _ in range(rng.randrange(0, 20))]
        path = tmp_path / "r.mem"
        encrypt_file(values, width, path)
        assert decrypt_file(path) == (width, values)


def test_value_out_of_range(tmp_path):
    with pytest.raises(memfile.ValueRangeError):
        encrypt_file([1 << 16], 16, tmp_path / "x.mem")
    with pytest.raises(memfile.ValueRangeError):
        encrypt_file([-1], 16, tmp_path / "x.mem")


def test_corrupt_files(tmp_path):
    good = memfile.pack(16, [1, 2, 3])
    cases = {
        "magic": (b"XEMU" + good[4:], memfile.BadMagic),
        "version": (good[:4] + bytes([2]) + good[5:], memfile.BadVersion),
        "body": (good[:-1], memfile.Truncated),
        "header": (good[:7], memfile.Truncated),
    }
    for name, (data, err) in cases.items():
        path = tmp_path / f"{name}.mem"
        path.write_bytes(data)
        with pytest.raises(err):
            decrypt_file(path)
    assert not issubclass(memfile.BadMagic, memfile.BadVersion)
