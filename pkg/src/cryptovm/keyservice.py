"""Key-owner services: branch resolution, the branch server and memory files.

Wire protocol (one JSON object per line, UTF-8):

* request ``{"type": "branch", "cond": "NE", "nzcv": "<base64 sealed flags>"}``,
  optionally with ``"pc"`` and ``"target"`` byte addresses;
* reply ``{"type": "branch_resp", "taken": true}``, plus ``"next_pc"`` when the
  server runs in user-controlled mode;
* on a bad request ``{"type": "error", "msg": "..."}``; the connection stays open.
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import socket
import socketserver
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import memfile
from .alu import Flags
from .emulator import BranchOracle, EmulatorError, cond_predicate
from .gates import SimBackend, SimKey
from .isa import CONDITIONS

logger = logging.getLogger(__name__)


class ProtocolError(ValueError):
    pass


class OracleUnavailable(EmulatorError):
    """The remote key owner could not be reached or hung up."""


@dataclass(frozen=True)
class BranchQuery:
    cond: str
    nzcv: bytes  # sealed flag ciphertexts, readable only with the key
    pc: int | None = None
    target: int | None = None

    def to_json(self) -> dict:
        msg = {"type": "branch", "cond": self.cond, "nzcv": base64.b64encode(self.nzcv).decode("ascii")}
        if self.pc is not None:
            msg["pc"] = self.pc
        if self.target is not None:
            msg["target"] = self.target
        return msg

    @classmethod
    def from_json(cls, msg: dict) -> BranchQuery:
        if not isinstance(msg, dict) or msg.get("type") != "branch":
            raise ProtocolError("expected a message of type 'branch'")
        cond = msg.get("cond")
        if cond not in CONDITIONS:
            raise ProtocolError(f"unknown condition {cond!r}")
        try:
            nzcv = base64.b64decode(msg.get("nzcv", ""), validate=True)
        except (binascii.Error, TypeError) as exc:
            raise ProtocolError(f"nzcv is not base64: {exc}") from None
        pc, target = msg.get("pc"), msg.get("target")
        for name, v in (("pc", pc), ("target", target)):
            if v is not None and (not isinstance(v, int) or v < 0):
                raise ProtocolError(f"{name} must be a non-negative integer")
        return cls(cond, nzcv, pc, target)


@dataclass(frozen=True)
class BranchReply:
    taken: bool
    next_pc: int | None = None

    def to_json(self) -> dict:
        msg = {"type": "branch_resp", "taken": self.taken}
        if self.next_pc is not None:
            msg["next_pc"] = self.next_pc
        return msg

    @classmethod
    def from_json(cls, msg: dict) -> BranchReply:
        if msg.get("type") == "error":
            raise ProtocolError(f"server error: {msg.get('msg')}")
        if msg.get("type") != "branch_resp" or not isinstance(msg.get("taken"), bool):
            raise ProtocolError(f"malformed reply {msg!r}")
        next_pc = msg.get("next_pc")
        if next_pc is not None and (not isinstance(next_pc, int) or next_pc < 0):
            raise ProtocolError("next_pc must be a non-negative integer")
        return cls(msg["taken"], next_pc)


def resolve_branch(q: BranchQuery, key: SimKey) -> BranchReply:
    """Open the sealed flags with ``key`` and evaluate the condition."""
    raw = key.open(q.nzcv)
    if len(raw) != 4:
        raise ProtocolError(f"expected 4 flag bits, got {len(raw)}")
    n, z, c, v = (bool(b) for b in raw)
    return BranchReply(cond_predicate(q.cond, n, z, c, v))


# Policy for user-controlled control flow: given the query and the decided
# branch, return the next pc. The default follows the branch.
PcPolicy = Callable[[BranchQuery, bool], int]


def follow_branch(q: BranchQuery, taken: bool) -> int:
    if q.pc is None or q.target is None:
        raise ProtocolError("user-controlled mode needs pc and target in the query")
    return q.target if taken else q.pc + 4


def handle_message(line: bytes, key: SimKey, policy: PcPolicy | None = None) -> dict:
    try:
        msg = json.loads(line)
        q = BranchQuery.from_json(msg)
        reply = resolve_branch(q, key)
        if policy is not None:
            reply = BranchReply(reply.taken, policy(q, reply.taken))
    except (ValueError, ProtocolError) as exc:
        return {"type": "error", "msg": str(exc)}
    # Only the public outcome is logged.
    logger.debug("branch %s -> %s", q.cond, "taken" if reply.taken else "not taken")
    return reply.to_json()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        server: BranchServer = self.server  # type: ignore[assignment]
        for line in self.rfile:
            if not line.strip():
                continue
            reply = handle_message(line, server.key, server.policy)
            self.wfile.write((json.dumps(reply) + "\n").encode())
            self.wfile.flush()


class BranchServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], key: SimKey, policy: PcPolicy | None = None) -> None:
        super().__init__(address, _Handler)
        self.key = key
        self.policy = policy
        self._thread: threading.Thread | None = None

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start(self) -> BranchServer:
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def close(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self) -> BranchServer:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def parse_endpoint(endpoint: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(endpoint, tuple):
        return endpoint
    host, sep, port = endpoint.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"endpoint must be host:port, got {endpoint!r}")
    return host or "127.0.0.1", int(port)


def serve(endpoint: str | tuple[str, int], key: SimKey, policy: PcPolicy | None = None) -> BranchServer:
    """Bind a branch server; call ``serve_forever()`` or ``start()`` on the result."""
    return BranchServer(parse_endpoint(endpoint), key, policy)


class BranchClient:
    """Persistent newline-JSON connection to a branch server."""

    def __init__(self, endpoint: str | tuple[str, int], timeout: float = 30.0) -> None:
        self.address = parse_endpoint(endpoint)
        try:
            self._sock = socket.create_connection(self.address, timeout=timeout)
        except OSError as exc:
            raise OracleUnavailable(f"cannot reach branch server at {self.address}: {exc}") from None
        self._file = self._sock.makefile("rwb")

    def request(self, msg: dict) -> dict:
        try:
            self._file.write((json.dumps(msg) + "\n").encode())
            self._file.flush()
            line = self._file.readline()
        except OSError as exc:
            raise OracleUnavailable(f"connection to branch server lost: {exc}") from None
        if not line:
            raise OracleUnavailable("branch server closed the connection")
        return json.loads(line)

    def query(self, q: BranchQuery) -> BranchReply:
        return BranchReply.from_json(self.request(q.to_json()))

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()


def query_remote(endpoint: str | tuple[str, int], q: BranchQuery) -> BranchReply:
    client = BranchClient(endpoint)
    try:
        return client.query(q)
    finally:
        client.close()


class LocalOracle(BranchOracle):
    """In-process key owner: seals the flags exactly as a remote query would."""

    def __init__(self, backend: SimBackend, key: SimKey | None = None) -> None:
        self.backend = backend
        self.key = key or backend.key

    def resolve(self, cond: str, nzcv: Flags) -> bool:
        q = BranchQuery(cond, self.backend.export_sealed(nzcv.bits()))
        return resolve_branch(q, self.key).taken


class RemoteOracle(BranchOracle):
    def __init__(self, backend: SimBackend, endpoint: str | tuple[str, int]) -> None:
        self.backend = backend
        self.client = BranchClient(endpoint)

    def _ask(self, cond: str, nzcv: Flags, pc: int | None = None, target: int | None = None) -> BranchReply:
        q = BranchQuery(cond, self.backend.export_sealed(nzcv.bits()), pc, target)
        try:
            return self.client.query(q)
        except ProtocolError as exc:
            raise EmulatorError(str(exc)) from None

    def resolve(self, cond: str, nzcv: Flags) -> bool:
        return self._ask(cond, nzcv).taken

    def next_pc(self, cond: str, nzcv: Flags, pc: int, target: int) -> int:
        reply = self._ask(cond, nzcv, pc, target)
        if reply.next_pc is not None:
            return reply.next_pc
        return target if reply.taken else pc + 4

    def close(self) -> None:
        self.client.close()


# -- user-side memory files ---------------------------------------------------


def encrypt_file(values: Sequence[int], width: int, path: str | Path) -> None:
    """Write a memory image. In the simulation a ciphertext word is its bits."""
    memfile.write(path, width, list(values))


def decrypt_file(path: str | Path) -> tuple[int, list[int]]:
    return memfile.read(path)


def load_key(path: str | Path) -> SimKey:
    text = Path(path).read_text().strip()
    try:
        secret = bytes.fromhex(text)
    except ValueError:
        raise ValueError(f"key file {path} is not hex") from None
    if len(secret) < 16:
        raise ValueError("key secret must be at least 16 bytes")
    return SimKey(secret)


def save_key(key: SimKey, path: str | Path) -> None:
    Path(path).write_text(key.secret.hex() + "\n")
