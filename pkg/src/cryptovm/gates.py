"""Boolean gate set over encrypted bits and the cleartext simulation backend.

Circuit code only ever talks to a :class:`Backend`. The shipped
:class:`SimBackend` evaluates gates on cleartext values and appends one node
per gate to a :class:`GateDag`, which the scheduler later turns into latency
and scalability figures.

The simulation backend can also run in *lane* mode: every bit carries an
integer whose bit ``k`` is the value of that wire in independent evaluation
``k``. Gate semantics are bitwise, so one circuit construction checks many
input vectors at once. With ``lanes=1`` (the default) values are 0/1.
"""

from __future__ import annotations

import contextlib
import enum
import hashlib
import hmac
import logging
import secrets
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

logger = logging.getLogger(__name__)


class GateError(ValueError):
    """A gate was invoked outside its contract (wrong kind or arity)."""


class GateKind(enum.Enum):
    CONSTANT = "CONSTANT"
    NOT = "NOT"
    COPY = "COPY"
    NAND = "NAND"
    AND = "AND"
    OR = "OR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOR = "NOR"
    ANDNY = "ANDNY"
    ANDYN = "ANDYN"
    ORNY = "ORNY"
    ORYN = "ORYN"
    MUX = "MUX"

    @property
    def bootstraps(self) -> int:
        """Number of bootstrapping procedures one evaluation costs."""
        if self in FREE_KINDS:
            return 0
        if self is GateKind.MUX:
            return 2
        return 1


FREE_KINDS = frozenset({GateKind.CONSTANT, GateKind.NOT, GateKind.COPY})
UNARY_KINDS = frozenset({GateKind.NOT, GateKind.COPY})
BINARY_KINDS = frozenset(
    {
        GateKind.NAND,
        GateKind.AND,
        GateKind.OR,
        GateKind.XOR,
        GateKind.XNOR,
        GateKind.NOR,
        GateKind.ANDNY,
        GateKind.ANDYN,
        GateKind.ORNY,
        GateKind.ORYN,
    }
)

# Pseudo-kinds. Neither is a gate: zero cost, never scheduled on a worker.
# INPUT marks bits entering from outside (user encryption, a memory image);
# SYNC joins every gate of one stage so that later gates start after it.
INPUT = "INPUT"
SYNC = "SYNC"
PSEUDO_KINDS = frozenset({INPUT, SYNC})


def _binary(kind: GateKind, a: int, b: int, mask: int) -> int:
    if kind is GateKind.AND:
        return a & b
    if kind is GateKind.OR:
        return a | b
    if kind is GateKind.XOR:
        return a ^ b
    if kind is GateKind.NAND:
        return ~(a & b) & mask
    if kind is GateKind.NOR:
        return ~(a | b) & mask
    if kind is GateKind.XNOR:
        return ~(a ^ b) & mask
    # "N" marks the negated operand, first operand first.
    if kind is GateKind.ANDNY:
        return ~a & b & mask
    if kind is GateKind.ANDYN:
        return a & ~b & mask
    if kind is GateKind.ORNY:
        return (~a | b) & mask
    if kind is GateKind.ORYN:
        return (a | ~b) & mask
    raise GateError(f"{kind} is not a binary gate")


def truth(kind: GateKind, *inputs: bool) -> bool:
    """Reference boolean function of a gate kind on plain booleans."""
    if kind is GateKind.NOT:
        (a,) = inputs
        return not a
    if kind is GateKind.COPY:
        (a,) = inputs
        return bool(a)
    if kind is GateKind.MUX:
        s, a, b = inputs
        return bool(a if s else b)
    a, b = inputs
    return bool(_binary(kind, int(a), int(b), 1))


# Latencies in milliseconds, single core, from the TFHE API benchmark.
DEFAULT_LATENCY_MS: dict[GateKind, float] = {
    GateKind.CONSTANT: 0.00433995,
    GateKind.NOT: 0.000679717,
    GateKind.COPY: 0.000624117,
    GateKind.NAND: 25.5738,
    GateKind.OR: 25.618,
    GateKind.AND: 25.6176,
    GateKind.XOR: 25.6526,
    GateKind.XNOR: 25.795,
    GateKind.NOR: 25.6265,
    GateKind.ANDNY: 25.6982,
    GateKind.ANDYN: 25.684,
    GateKind.ORNY: 25.7787,
    GateKind.ORYN: 25.6957,
    GateKind.MUX: 49.2645,
}


@dataclass(frozen=True)
class CostTable:
    """Per-gate latency in milliseconds."""

    latency: dict[GateKind, float]

    def __post_init__(self) -> None:
        missing = [k.value for k in GateKind if k not in self.latency]
        if missing:
            raise ValueError(f"cost table lacks entries for {', '.join(missing)}")
        for kind, ms in self.latency.items():
            if ms < 0:
                raise ValueError(f"negative latency for {kind.value}: {ms}")

    def __getitem__(self, kind: GateKind) -> float:
        return self.latency[kind]

    @classmethod
    def default(cls) -> CostTable:
        return cls(dict(DEFAULT_LATENCY_MS))

    @classmethod
    def uniform(cls, g: float = 1.0) -> CostTable:
        """Idealised table: single-bootstrap gates cost ``g``, MUX ``2g``, free gates 0."""
        return cls({k: g * k.bootstraps for k in GateKind})

    @classmethod
    def parse(cls, text: str, base: CostTable | None = None) -> CostTable:
        """Parse ``KIND = ms`` lines. Kinds not listed keep their ``base`` value."""
        table = dict((base or cls.default()).latency)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: expected 'KIND = milliseconds'")
            key = key.strip().upper()
            try:
                kind = GateKind(key)
            except ValueError:
                raise ValueError(f"line {lineno}: unknown gate kind {key!r}") from None
            try:
                table[kind] = float(value)
            except ValueError:
                raise ValueError(f"line {lineno}: bad latency {value.strip()!r}") from None
        return cls(table)

    @classmethod
    def load(cls, path: str | Path) -> CostTable:
        return cls.parse(Path(path).read_text())

    def dumps(self) -> str:
        return "".join(f"{k.value} = {self.latency[k]!r}\n" for k in GateKind)


@dataclass(frozen=True, slots=True)
class Bit:
    """Handle to one encrypted bit.

    ``value`` is the simulation backend's cleartext and must only be read by
    decryption and test oracles, never by circuit construction.
    """

    node_id: int
    value: int = field(repr=False, compare=False)


@dataclass(frozen=True, slots=True)
class Node:
    node_id: int
    kind: GateKind | str
    deps: tuple[int, ...]
    cost: float
    region: str = ""

    @property
    def is_gate(self) -> bool:
        return self.kind not in PSEUDO_KINDS

    @property
    def bootstraps(self) -> int:
        return self.kind.bootstraps if self.is_gate else 0


class GateDag:
    """Append-only record of gate evaluations.

    Node ids equal their index in :attr:`nodes`; dependencies always refer to
    earlier nodes, so the record is acyclic and already in topological order.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)

    def __getitem__(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def append(self, kind: GateKind | str, deps: tuple[int, ...], cost: float, region: str) -> int:
        with self._lock:
            node_id = len(self.nodes)
            self.nodes.append(Node(node_id, kind, deps, cost, region))
            return node_id

    def mark(self) -> int:
        """Current length; pair with :meth:`since` to slice out one operation."""
        return len(self.nodes)

    def since(self, start: int) -> GateDag:
        """Sub-DAG of nodes created after ``start``, with ids renumbered from 0.

        Dependencies on earlier nodes become dependencies on fresh INPUT nodes,
        so the slice can be analysed on its own.
        """
        sub = GateDag()
        remap: dict[int, int] = {}
        for node in self.nodes[start:]:
            deps = []
            for d in node.deps:
                if d not in remap:
                    remap[d] = sub.append(INPUT, (), 0.0, "")
                deps.append(remap[d])
            remap[node.node_id] = sub.append(node.kind, tuple(deps), node.cost, node.region)
        return sub

    def to_json(self) -> dict:
        return {
            "nodes": [
                [n.node_id, n.kind.value if n.is_gate else n.kind, list(n.deps), n.cost, n.region]
                for n in self.nodes
            ]
        }

    @classmethod
    def from_json(cls, data: dict) -> GateDag:
        dag = cls()
        for node_id, kind, deps, cost, region in data["nodes"]:
            if node_id != len(dag.nodes):
                raise ValueError(f"node ids must be dense and ordered (got {node_id})")
            if any(d >= node_id for d in deps):
                raise ValueError(f"node {node_id} depends on a later node")
            dag.append(kind if kind in PSEUDO_KINDS else GateKind(kind), tuple(deps), float(cost), region)
        return dag


class Backend(ABC):
    """Gate evaluation contract shared by the simulator and a real FHE library.

    Gates on independent inputs may be evaluated concurrently; results depend
    only on the input bits and the gate kind.
    """

    @abstractmethod
    def constant(self, value: bool) -> Bit: ...

    @abstractmethod
    def eval_gate(self, kind: GateKind, *inputs: Bit) -> Bit: ...

    @abstractmethod
    def encrypt_bit(self, value: bool) -> Bit: ...

    @abstractmethod
    def decrypt_bit(self, bit: Bit) -> bool: ...

    @contextlib.contextmanager
    def region(self, name: str) -> Iterator[None]:
        yield

    @contextlib.contextmanager
    def stage(self, name: str = "") -> Iterator[None]:
        """One parallel region: gates inside may run concurrently, later ones wait for all of them."""
        with self.region(name) if name else contextlib.nullcontext():
            yield


class SimKey:
    """Stand-in for the user's secret key in the simulation.

    It seals byte strings with a keyed stream and a MAC so that a payload
    produced under one key cannot be opened with another. This is a
    simulation convenience, not a cryptographic construction.
    """

    NONCE = 8
    TAG = 16

    def __init__(self, secret: bytes | None = None) -> None:
        self.secret = secret if secret is not None else secrets.token_bytes(32)

    def _stream(self, nonce: bytes, n: int) -> bytes:
        out = b""
        counter = 0
        while len(out) < n:
            out += hashlib.sha256(self.secret + nonce + counter.to_bytes(4, "little")).digest()
            counter += 1
        return out[:n]

    def seal(self, data: bytes) -> bytes:
        nonce = secrets.token_bytes(self.NONCE)
        body = bytes(x ^ y for x, y in zip(data, self._stream(nonce, len(data))))
        tag = hmac.new(self.secret, nonce + body, hashlib.sha256).digest()[: self.TAG]
        return nonce + body + tag

    def open(self, payload: bytes) -> bytes:
        if len(payload) < self.NONCE + self.TAG:
            raise ValueError("payload too short to be a sealed ciphertext")
        nonce, body, tag = payload[: self.NONCE], payload[self.NONCE : -self.TAG], payload[-self.TAG :]
        expect = hmac.new(self.secret, nonce + body, hashlib.sha256).digest()[: self.TAG]
        if not hmac.compare_digest(tag, expect):
            raise ValueError("payload does not decrypt under this key")
        return bytes(x ^ y for x, y in zip(body, self._stream(nonce, len(body))))


class SimBackend(Backend):
    """Cleartext simulation that records every gate into a :class:`GateDag`."""

    def __init__(
        self,
        costs: CostTable | None = None,
        lanes: int = 1,
        key: SimKey | None = None,
        staged: bool = True,
    ) -> None:
        if lanes < 1:
            raise ValueError("lanes must be positive")
        self.costs = costs or CostTable.default()
        self.lanes = lanes
        self.mask = (1 << lanes) - 1
        self.key = key or SimKey()
        self.dag = GateDag()
        self.decrypt_count = 0
        self.staged = staged
        self._barrier: int | None = None
        self._collect: list[int] | None = None
        self._local = threading.local()

    # -- bookkeeping -------------------------------------------------------

    def _regions(self) -> list[str]:
        if not hasattr(self._local, "regions"):
            self._local.regions = []
        return self._local.regions

    @contextlib.contextmanager
    def region(self, name: str) -> Iterator[None]:
        stack = self._regions()
        stack.append(name)
        try:
            yield
        finally:
            stack.pop()

    @contextlib.contextmanager
    def stage(self, name: str = "") -> Iterator[None]:
        if not self.staged:
            with self.region(name) if name else contextlib.nullcontext():
                yield
            return
        outer, self._collect = self._collect, []
        try:
            with self.region(name) if name else contextlib.nullcontext():
                yield
        finally:
            created, self._collect = self._collect, outer
            if created:
                sync = self.dag.append(SYNC, tuple(created), 0.0, "/".join(self._regions()))
                self._barrier = sync
                if outer is not None:
                    outer.append(sync)

    def _record(self, kind: GateKind | str, inputs: Sequence[Bit], value: int) -> Bit:
        deps = tuple(b.node_id for b in inputs)
        if kind == INPUT:
            return Bit(self.dag.append(INPUT, deps, 0.0, ""), value)
        if self._barrier is not None:
            deps += (self._barrier,)
        node_id = self.dag.append(kind, deps, self.costs[kind], "/".join(self._regions()))
        if self._collect is not None:
            self._collect.append(node_id)
        return Bit(node_id, value)

    # -- gate set ----------------------------------------------------------

    def constant(self, value: bool) -> Bit:
        return self._record(GateKind.CONSTANT, (), self.mask if value else 0)

    def eval_gate(self, kind: GateKind, *inputs: Bit) -> Bit:
        if kind is GateKind.CONSTANT:
            raise GateError("use constant() for CONSTANT")
        if kind in UNARY_KINDS:
            if len(inputs) != 1:
                raise GateError(f"{kind.value} takes one input, got {len(inputs)}")
            (a,) = inputs
            value = a.value if kind is GateKind.COPY else ~a.value & self.mask
        elif kind in BINARY_KINDS:
            if len(inputs) != 2:
                raise GateError(f"{kind.value} takes two inputs, got {len(inputs)}")
            value = _binary(kind, inputs[0].value, inputs[1].value, self.mask)
        elif kind is GateKind.MUX:
            if len(inputs) != 3:
                raise GateError(f"MUX takes three inputs, got {len(inputs)}")
            s, a, b = inputs
            value = (s.value & a.value) | (~s.value & b.value & self.mask)
        else:
            raise GateError(f"unknown gate kind {kind!r}")
        return self._record(kind, inputs, value)

    # -- user-side operations ---------------------------------------------

    def encrypt_bit(self, value: bool) -> Bit:
        return self._record(INPUT, (), self.mask if value else 0)

    def encrypt_lanes(self, value: int) -> Bit:
        """Input bit with an explicit per-lane pattern (lane ``k`` = bit ``k``)."""
        if value < 0 or value > self.mask:
            raise ValueError("lane pattern wider than the backend's lane count")
        return self._record(INPUT, (), value)

    def decrypt_bit(self, bit: Bit) -> bool:
        if self.lanes != 1:
            raise ValueError("decrypt_bit needs a single-lane backend; use lane_values")
        self.decrypt_count += 1
        logger.debug("decrypt of node %d (user role assumed)", bit.node_id)
        return bool(bit.value)

    def lane_values(self, bit: Bit) -> int:
        self.decrypt_count += 1
        return bit.value

    def store_bits(self, bits: Sequence[Bit]) -> list[bool]:
        """Ciphertext serialisation; in the simulation a ciphertext is its bit."""
        if self.lanes != 1:
            raise ValueError("serialisation needs a single-lane backend")
        return [bool(b.value & 1) for b in bits]

    def load_bits(self, values: Sequence[bool]) -> list[Bit]:
        return [self._record(INPUT, (), self.mask if v else 0) for v in values]

    def export_sealed(self, bits: Sequence[Bit]) -> bytes:
        """Serialise ciphertexts so only the key owner can read them."""
        if self.lanes != 1:
            raise ValueError("sealed export needs a single-lane backend")
        return self.key.seal(bytes(b.value & 1 for b in bits))


# Thin functional wrappers used throughout the circuit code.


def const_bit(be: Backend, value: bool) -> Bit:
    return be.constant(value)


def unary_gate(be: Backend, kind: GateKind, a: Bit) -> Bit:
    if kind not in UNARY_KINDS:
        raise GateError(f"{kind} is not a unary gate")
    return be.eval_gate(kind, a)


def binary_gate(be: Backend, kind: GateKind, a: Bit, b: Bit) -> Bit:
    if kind not in BINARY_KINDS:
        raise GateError(f"{kind} is not a bootstrapped binary gate")
    return be.eval_gate(kind, a, b)


def mux_bit(be: Backend, sel: Bit, a: Bit, b: Bit) -> Bit:
    """``a`` where ``sel`` is 1, else ``b``."""
    return be.eval_gate(GateKind.MUX, sel, a, b)
