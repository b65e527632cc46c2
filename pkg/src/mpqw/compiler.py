"""Circuit IR, native-gate decomposition, block planning and graph layout.

Wires are named ``"c0" .. "c{n-1}"`` for computational qubits and
``"m0", ...`` for mediators.  The standard scheme uses a single mediator
``"m0"``; the planar scheme interleaves ``c0, m0, c1, m1, ..., c{n-1}`` from
top to bottom and only couples neighbours.

Rail coordinates
----------------
Every rail ``(wire, value)`` carries a global position ``p = 1, 2, ...``
running left to right.  Block ``b`` starts at offset ``P`` on each rail and
its input segment occupies ``P+1 .. P+K`` with ``K = 2M(k) + L``.  A type-I
block puts the gadget input terminal at ``P+K`` and the output terminal at
``P+K+1``; the next block starts at ``P+K`` so that its input segment is
exactly this block's output segment.  Type-II blocks are embedded through
their own labelled rail coordinates; the next block starts ``K`` before the
end of the rail.  Gadget interiors (switch internals, vertical paths) have no
rail position.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
import numpy as np

from . import graph_core, timing
from .errors import PhaseNotRealizable, PlanError, TooManyQubits, NotFound
from .dynamics import WavePacketSpec
from .graph_core import Gadget, Graph, _Builder
from .two_particle import cd_repeat_count

L_MIN = 8
MAX_IDEAL_QUBITS = 12

# ---------------------------------------------------------------------------
# IR


@dataclass(frozen=True)
class Gate:
    """A gate in the circuit IR.

    ``name`` is one of ``T, B, I, H_MED, CD, PCD, CP, CZ``.  ``wires`` are
    wire names; ``CD`` acts on (computational, mediator) and ``PCD`` on
    (upper, lower) neighbours of the planar register.
    """

    name: str
    wires: tuple

    def to_dict(self) -> dict:
        return {"gate": self.name, "wires": list(self.wires)}


def PhaseT(q: int) -> Gate:
    return Gate("T", (f"c{q}",))


def BasisB(q: int) -> Gate:
    return Gate("B", (f"c{q}",))


def Identity(q: int) -> Gate:
    return Gate("I", (f"c{q}",))


def HadamardMed(m: int = 0) -> Gate:
    return Gate("H_MED", (f"m{m}",))


def CD(q: int, m: int = 0) -> Gate:
    return Gate("CD", (f"c{q}", f"m{m}"))


def PCD(upper: str, lower: str) -> Gate:
    return Gate("PCD", (upper, lower))


def CP(i: int, j: int) -> Gate:
    return Gate("CP", (f"c{i}", f"c{j}"))


def CZ(i: int, j: int) -> Gate:
    return Gate("CZ", (f"c{i}", f"c{j}"))


_ARITY = {"T": 1, "B": 1, "I": 1, "H_MED": 1, "CD": 2, "PCD": 2, "CP": 2, "CZ": 2}
NATIVE = {"T", "B", "I", "H_MED", "CD", "PCD"}
SINGLE = {"T", "B", "I", "H_MED"}


@dataclass(frozen=True)
class CircuitIR:
    qubit_count: int
    gates: tuple = ()
    mediators: int = 0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.qubit_count < 0 or self.mediators < 0:
            raise ValueError("negative register size")
        wires = set(self.wires)
        for g in self.gates:
            if g.name not in _ARITY:
                raise ValueError(f"unknown gate {g.name!r}")
            if len(g.wires) != _ARITY[g.name]:
                raise ValueError(f"{g.name} takes {_ARITY[g.name]} wires, got {g.wires}")
            if len(set(g.wires)) != len(g.wires):
                raise ValueError(f"{g.name} targets must be distinct: {g.wires}")
            for w in g.wires:
                if w not in wires:
                    raise ValueError(f"gate {g.name} targets unknown wire {w!r}")
            if g.name in ("T", "B", "I", "CP", "CZ") and not all(w[0] == "c" for w in g.wires):
                raise ValueError(f"{g.name} acts on computational qubits only")
            if g.name == "H_MED" and g.wires[0][0] != "m":
                raise ValueError("H_MED acts on a mediator")
            if g.name == "CD" and not (g.wires[0][0] == "c" and g.wires[1][0] == "m"):
                raise ValueError("CD acts on (computational, mediator)")

    @property
    def wires(self) -> tuple:
        return tuple(f"c{i}" for i in range(self.qubit_count)) + \
            tuple(f"m{i}" for i in range(self.mediators))

    def is_native(self) -> bool:
        return all(g.name in NATIVE for g in self.gates)

    def to_dict(self) -> dict:
        return {"qubits": self.qubit_count, "mediators": self.mediators,
                "gates": [g.to_dict() for g in self.gates], "metadata": dict(self.metadata)}

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitIR":
        gates = []
        for g in d.get("gates", []):
            if "wires" in g:
                wires = tuple(g["wires"])
            else:
                qs = g.get("qubits", [g["qubit"]] if "qubit" in g else [])
                wires = tuple(f"c{q}" for q in qs)
            gates.append(Gate(g["gate"], wires))
        return cls(int(d["qubits"]), tuple(gates), int(d.get("mediators", 0)),
                   dict(d.get("metadata", {})))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "CircuitIR":
        return cls.from_dict(json.loads(s))


# ---------------------------------------------------------------------------
# decomposition


def planar_order(n: int) -> tuple:
    """Top-to-bottom wire order of the planar register."""
    out = []
    for i in range(n):
        out.append(f"c{i}")
        if i < n - 1:
            out.append(f"m{i}")
    return tuple(out)


def _repeat(theta, target, tol):
    try:
        return cd_repeat_count(theta, target, tol)
    except NotFound:
        return None


def _cnot_via_cz(ctrl: int, tgt: int, cz) -> list:
    return _comp_hadamard(tgt) + cz(ctrl, tgt) + _comp_hadamard(tgt)


def _comp_hadamard(q: int) -> list:
    # B T T B equals the Hadamard up to a global phase
    return [BasisB(q), PhaseT(q), PhaseT(q), BasisB(q)]


def _standard_pair(i, j, theta, middle_target, tol):
    a = _repeat(theta, -math.pi / 2, tol)
    outer = 2 * a if a is not None else _repeat(theta, math.pi, tol)
    mid = _repeat(theta, middle_target, tol)
    if outer is None or mid is None:
        raise PhaseNotRealizable(
            f"no power of e^(i {theta:.6f}) reaches the required phase within {tol}")
    h = [HadamardMed(0)]
    return (h + [CD(i)] * outer + h + [CD(j)] * mid + h + [CD(i)] * outer + h)


def _planar_adjacent(i, theta, middle_target, tol):
    """Gate on c_i, c_{i+1} through m_i; phase e^{i middle_target} on |11>."""
    a = _repeat(2 * theta, math.pi, tol)
    mid = _repeat(2 * theta, middle_target, tol)
    if a is None or mid is None:
        raise PhaseNotRealizable(
            f"no power of e^(2i {theta:.6f}) reaches the required phase within {tol}")
    h = [HadamardMed(i)]
    lower = PCD(f"m{i}", f"c{i + 1}")
    upper = PCD(f"c{i}", f"m{i}")
    return h + [lower] * a + h + [upper] * mid + h + [lower] * a + h


def decompose_to_native(c: CircuitIR, theta: float, variant: str = "standard",
                        tol: float = 1e-9) -> CircuitIR:
    """Rewrite CP/CZ into mediator gates.

    Standard: ``CP_ij = H CD_i^{2a} H CD_j^{a} H CD_i^{2a} H`` with
    ``e^{i a theta} = -i``; CZ uses ``CD_j^{b}`` with ``e^{i b theta} = -1`` in
    the middle.  Planar: neighbouring qubits use the X-conjugated squared CD of
    the planar entangler; distant pairs are brought together with SWAP
    ladders built from CZ and single-qubit gates.  A native circuit is
    returned unchanged.
    """
    if c.is_native() and (variant == "standard" or c.mediators >= max(c.qubit_count - 1, 0)):
        return c
    if variant not in ("standard", "planar"):
        raise ValueError(f"unknown variant {variant!r}")
    n = c.qubit_count
    out = []
    if variant == "standard":
        for g in c.gates:
            if g.name in ("CP", "CZ"):
                i, j = (int(w[1:]) for w in g.wires)
                target = -math.pi / 2 if g.name == "CP" else math.pi
                out += _standard_pair(i, j, theta, target, tol)
            else:
                out.append(g)
        return CircuitIR(n, tuple(out), max(c.mediators, 1), dict(c.metadata, variant="standard"))

    def adj_cz(a, b):
        lo = min(a, b)
        return _planar_adjacent(lo, theta, math.pi, tol)

    def adj_cp(a, b):
        lo = min(a, b)
        try:
            return _planar_adjacent(lo, theta, -math.pi / 2, tol)
        except PhaseNotRealizable:
            # CP = P(-pi/4) x P(-pi/4) . CNOT . (1 x P(pi/4)) . CNOT with P(pi/4) ~ T
            return (_cnot_via_cz(a, b, adj_cz) + [PhaseT(b)]
                    + _cnot_via_cz(a, b, adj_cz) + [PhaseT(a)] * 7 + [PhaseT(b)] * 7)

    def swap(a, b):
        return _cnot_via_cz(a, b, adj_cz) + _cnot_via_cz(b, a, adj_cz) + _cnot_via_cz(a, b, adj_cz)

    for g in c.gates:
        if g.name in ("CP", "CZ"):
            i, j = sorted(int(w[1:]) for w in g.wires)
            ladder = []
            for s in range(i, j - 1):
                ladder += swap(s, s + 1)
            core = adj_cz(j - 1, j) if g.name == "CZ" else adj_cp(j - 1, j)
            back = []
            for s in reversed(range(i, j - 1)):
                back += swap(s, s + 1)
            out += ladder + core + back
        elif g.name == "CD":
            raise PlanError("standard CD gates cannot be laid out planarly")
        else:
            out.append(g)
    return CircuitIR(n, tuple(out), max(n - 1, c.mediators), dict(c.metadata, variant="planar"))


# ---------------------------------------------------------------------------
# ideal unitaries

U_PHASE = np.diag([np.exp(-1j * np.pi / 4), 1.0])
U_BASIS = -(1j / np.sqrt(2)) * np.array([[1, -1j], [-1j, 1]])
U_HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
_SINGLE_MATRIX = {"T": U_PHASE, "B": U_BASIS, "I": np.eye(2), "H_MED": U_HADAMARD}


def _apply(U, mat, axes, nq):
    """Left-multiply the 2^nq x 2^nq operator U by ``mat`` acting on ``axes``."""
    k = len(axes)
    U = U.reshape((2,) * nq + (-1,))
    U = np.moveaxis(U, axes, range(k))
    shp = U.shape
    U = (mat @ U.reshape(2 ** k, -1)).reshape(shp)
    U = np.moveaxis(U, range(k), axes)
    return U.reshape(2 ** nq, -1)


def gate_matrix(g: Gate, theta: float) -> np.ndarray:
    if g.name in _SINGLE_MATRIX:
        return _SINGLE_MATRIX[g.name]
    if g.name == "CD":
        return np.diag([1, 1, 1, np.exp(1j * theta)])
    if g.name == "PCD":
        return np.diag([1, 1, np.exp(2j * theta), 1])
    if g.name == "CP":
        return np.diag([1, 1, 1, -1j])
    if g.name == "CZ":
        return np.diag([1, 1, 1, -1.0])
    raise ValueError(g.name)


def ideal_unitary(c: CircuitIR, theta: float) -> np.ndarray:
    """Dense unitary of the circuit on all its wires (computational first, wire 0
    most significant).  Mediator Hadamards use the normalized Hadamard; the
    gadgets realize it up to a global phase."""
    nq = len(c.wires)
    if nq > MAX_IDEAL_QUBITS:
        raise TooManyQubits(f"{nq} wires exceed the dense limit {MAX_IDEAL_QUBITS}")
    index = {w: i for i, w in enumerate(c.wires)}
    U = np.eye(2 ** nq, dtype=complex)
    for g in c.gates:
        U = _apply(U, gate_matrix(g, theta), [index[w] for w in g.wires], nq)
    return U


def logical_block(U: np.ndarray, n: int, mediators: int) -> np.ndarray:
    """Restriction of a register unitary to mediators |0> at input and output."""
    rows = [z << mediators for z in range(2 ** n)]
    return U[np.ix_(rows, rows)]


def phase_free_distance(A: np.ndarray, B: np.ndarray) -> float:
    """min over global phases of max |A - e^{i phi} B|."""
    i = np.unravel_index(np.argmax(np.abs(B)), B.shape)
    if abs(B[i]) == 0:
        return float(np.max(np.abs(A)))
    ph = A[i] / B[i]
    ph = ph / abs(ph) if abs(ph) > 0 else 1.0
    return float(np.max(np.abs(A - ph * B)))


# ---------------------------------------------------------------------------
# block planning


@dataclass(frozen=True)
class Block:
    """``kind`` is "I" (``ops`` maps wire -> single-qubit gate name) or "II"
    (``gate`` is the CD or PCD gate)."""

    kind: str
    ops: tuple = ()
    gate: Gate | None = None

    def op(self, wire: str) -> str:
        return dict(self.ops).get(wire, "I")

    def to_dict(self) -> dict:
        if self.kind == "I":
            return {"type": "I", "gates": dict(self.ops)}
        return {"type": "II", "gate": self.gate.to_dict()}


@dataclass(frozen=True)
class BlockPlan:
    blocks: tuple
    L: int
    variant: str
    qubit_count: int
    mediators: int

    @property
    def wires(self) -> tuple:
        if self.variant == "planar":
            order = planar_order(self.qubit_count)
            return order + tuple(f"m{i}" for i in range(self.qubit_count - 1, self.mediators))
        return tuple(f"c{i}" for i in range(self.qubit_count)) + \
            tuple(f"m{i}" for i in range(self.mediators))

    def counts(self) -> tuple[int, int]:
        g1 = sum(b.kind == "I" for b in self.blocks)
        return g1, len(self.blocks) - g1

    def to_dict(self) -> dict:
        return {"L": self.L, "variant": self.variant, "qubits": self.qubit_count,
                "mediators": self.mediators, "blocks": [b.to_dict() for b in self.blocks]}


def plan_blocks(native: CircuitIR, L: int, variant: str = "standard", L_min: int = L_MIN) -> BlockPlan:
    """Greedy earliest-first packing.

    A single-qubit gate joins the earliest type-I block after the last block
    touching its wire in which that wire is still idle; each two-qubit gate
    is appended as its own type-II block.  The plan is padded with identity
    type-I blocks so that it starts and ends with type I.
    """
    if L < L_min:
        raise PlanError(f"L = {L} is below the floor {L_min}")
    if variant not in ("standard", "planar"):
        raise ValueError(f"unknown variant {variant!r}")
    if not native.is_native():
        raise PlanError("plan_blocks needs a native circuit; call decompose_to_native first")
    blocks: list = []          # [kind, ops dict or gate]
    last: dict = {}
    for g in native.gates:
        if g.name == "I":
            continue
        if g.name in SINGLE:
            w = g.wires[0]
            start = last.get(w, -1) + 1
            slot = next((b for b in range(start, len(blocks))
                         if blocks[b][0] == "I" and w not in blocks[b][1]), None)
            if slot is None:
                blocks.append(["I", {}])
                slot = len(blocks) - 1
            blocks[slot][1][w] = g.name
            last[w] = slot
        else:
            if variant == "standard" and g.name != "CD":
                raise PlanError(f"{g.name} is not a standard-layout gate")
            if variant == "planar" and g.name != "PCD":
                raise PlanError(f"{g.name} is not a planar-layout gate")
            if variant == "planar":
                order = planar_order(native.qubit_count)
                a, b = (order.index(w) if w in order else -9 for w in g.wires)
                if b != a + 1:
                    raise PlanError(f"PCD{g.wires} does not act on neighbouring wires")
            blocks.append(["II", g])
            for w in g.wires:
                last[w] = len(blocks) - 1
    if not blocks or blocks[0][0] != "I":
        blocks.insert(0, ["I", {}])
    if blocks[-1][0] != "I":
        blocks.append(["I", {}])
    out = tuple(Block("I", tuple(sorted(b[1].items()))) if b[0] == "I" else Block("II", gate=b[1])
                for b in blocks)
    meds = max(native.mediators, 1) if variant == "standard" else native.mediators
    return BlockPlan(out, L, variant, native.qubit_count, meds)


# ---------------------------------------------------------------------------
# layout


def wire_momentum(wire: str) -> float:
    return timing.K_COMPUTATIONAL if wire[0] == "c" else timing.K_MEDIATOR


@dataclass(frozen=True)
class ScheduleEntry:
    block: int
    kind: str
    duration: float
    start: float


@dataclass
class CompiledLayout:
    """Full walk graph for a circuit.

    ``rail_registry[(wire, value, p)]`` is the vertex at global rail position
    ``p``.  ``input_offsets`` and ``output_offsets`` give, per rail, the
    global position of the first block's input terminal and the last block's
    output terminal, so that local coordinates are
    ``x_in = in_terminal - p + 1`` and ``x_out = p - out_terminal + 1``.
    """

    graph: Graph
    plan: BlockPlan
    rail_registry: dict
    input_terminal: dict
    output_terminal: dict
    schedule: tuple
    total_time: float
    wires: tuple
    aux_vertices: tuple = ()

    @property
    def L(self) -> int:
        return self.plan.L

    def offset(self, wire: str) -> int:
        return timing.packet_offset(wire_momentum(wire), self.L)

    def input_vertex(self, wire, value, x) -> int:
        return self.rail_registry[(wire, value, self.input_terminal[wire] - x + 1)]

    def output_vertex(self, wire, value, x) -> int:
        return self.rail_registry[(wire, value, self.output_terminal[wire] + x - 1)]

    def input_rail_map(self) -> dict:
        """((wire, value), x) -> vertex on the first block's input paths."""
        out = {}
        for wire in self.wires:
            K = timing.block_rail_length(wire_momentum(wire), self.L)
            for v in (0, 1):
                for x in range(1, K + 1):
                    out[((wire, v), x)] = self.input_vertex(wire, v, x)
        return out

    def output_rail_map(self) -> dict:
        out = {}
        for wire in self.wires:
            K = timing.block_rail_length(wire_momentum(wire), self.L)
            for v in (0, 1):
                for x in range(1, K + 1):
                    out[((wire, v), x)] = self.output_vertex(wire, v, x)
        return out

    def readout_windows(self) -> dict:
        """(wire, value) -> vertices at output positions M+1 .. M+L."""
        out = {}
        for wire in self.wires:
            M = self.offset(wire)
            for v in (0, 1):
                out[(wire, v)] = [self.output_vertex(wire, v, x) for x in range(M + 1, M + self.L + 1)]
        return out

    def to_dict(self) -> dict:
        return {
            "format": "mpqw-layout", "version": 1,
            "graph": graph_core.graph_to_dict(self.graph),
            "plan": self.plan.to_dict(),
            "wires": list(self.wires),
            "registry": [[w, v, p, u] for (w, v, p), u in sorted(self.rail_registry.items())],
            "input_terminal": dict(sorted(self.input_terminal.items())),
            "output_terminal": dict(sorted(self.output_terminal.items())),
            "schedule": [[s.block, s.kind, s.duration, s.start] for s in self.schedule],
            "total_time": self.total_time,
            "aux_vertices": list(self.aux_vertices),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CompiledLayout":
        p = d["plan"]
        blocks = []
        for b in p["blocks"]:
            if b["type"] == "I":
                blocks.append(Block("I", tuple(sorted(b["gates"].items()))))
            else:
                blocks.append(Block("II", gate=Gate(b["gate"]["gate"], tuple(b["gate"]["wires"]))))
        plan = BlockPlan(tuple(blocks), p["L"], p["variant"], p["qubits"], p["mediators"])
        return cls(graph=graph_core.graph_from_dict(d["graph"]), plan=plan,
                   rail_registry={(w, v, p_): u for w, v, p_, u in d["registry"]},
                   input_terminal=dict(d["input_terminal"]),
                   output_terminal=dict(d["output_terminal"]),
                   schedule=tuple(ScheduleEntry(*s) for s in d["schedule"]),
                   total_time=d["total_time"], wires=tuple(d["wires"]),
                   aux_vertices=tuple(d.get("aux_vertices", ())))

    @classmethod
    def from_json(cls, s: str) -> "CompiledLayout":
        return cls.from_dict(json.loads(s))


class _RailBuilder(_Builder):
    def __init__(self):
        super().__init__()
        self.edge_set = set()
        self.registry = {}
        self.aux = []

    def edge(self, a, b):
        key = (min(a, b), max(a, b))
        if a != b and key not in self.edge_set:
            self.edge_set.add(key)
            self.edges.append(key)

    def at(self, wire, value, p):
        key = (wire, value, p)
        if key not in self.registry:
            self.registry[key] = self.vertex()
        return self.registry[key]

    def straight(self, wire, value, start, stop):
        """Chain over global positions start..stop inclusive."""
        prev = None
        for p in range(start, stop + 1):
            v = self.at(wire, value, p)
            if prev is not None:
                self.edge(prev, v)
            prev = v

    def embed_labeled(self, gadget: Gadget, rails: dict, offsets: dict):
        """Copy a gadget whose vertices carry (rail_id, x) labels.

        ``rails`` maps rail ids to (wire, value); labelled vertices land on
        global position offsets[(wire, value)] + x, reusing existing ones.
        Other vertices are fresh.
        """
        m = {}
        for u in range(gadget.graph.vertex_count):
            lab = gadget.graph.labels.get(u)
            if lab is not None and lab[0] in rails:
                wv = rails[lab[0]]
                m[u] = self.at(wv[0], wv[1], offsets[wv] + int(lab[1]))
            else:
                m[u] = self.vertex()
                self.aux.append(m[u])
        for a, b in gadget.graph.edges:
            self.edge(m[a], m[b])


@functools.lru_cache(maxsize=None)
def _single_gadget(op: str, wire: str, variant: str) -> Gadget:
    if op == "I":
        return graph_core.build_gadget("identity_gate")
    if op == "T":
        return graph_core.build_gadget("phase_gate")
    if op == "B":
        return graph_core.build_gadget("basis_change")
    if op == "H_MED":
        return graph_core.build_gadget("hadamard_planar" if variant == "planar" else "hadamard_k2")
    raise PlanError(f"no gadget for {op!r} on {wire}")


@functools.lru_cache(maxsize=64)
def _cd_gadget(L: int) -> Gadget:
    return graph_core.build_gadget("cd_block", {"L": L})


@functools.lru_cache(maxsize=64)
def _entangler(L: int, k_top: float, k_bottom: float):
    ln = timing.planar_entangler_lengths(L, k_top, k_bottom)
    return ln, graph_core.planar_entangler_graph(ln)


def emit_layout(plan: BlockPlan) -> CompiledLayout:
    """Build the walk graph, rail registry and schedule of a plan."""
    L = plan.L
    if not plan.blocks or plan.blocks[0].kind != "I" or plan.blocks[-1].kind != "I":
        raise PlanError("plan must start and end with a type-I block")
    wires = plan.wires
    b = _RailBuilder()
    K = {w: timing.block_rail_length(wire_momentum(w), L) for w in wires}
    start = {w: 0 for w in wires}
    for w in wires:
        for v in (0, 1):
            b.straight(w, v, 1, K[w])
    in_term = {w: K[w] for w in wires}
    out_term = {}
    sched, clock = [], 0.0
    for bi, blk in enumerate(plan.blocks):
        if blk.kind == "I":
            for w in wires:
                P = start[w]
                op = blk.op(w)
                if op == "H_MED" and w[0] != "m":
                    raise PlanError("H_MED on a computational wire")
                if op in ("T", "B") and w[0] != "c":
                    raise PlanError(f"{op} on mediator wire {w}")
                g = _single_gadget(op, w, plan.variant)
                m = {}
                for q, t in enumerate(g.terminals):
                    v, side = q % 2, q // 2
                    m[t] = b.at(w, v, P + K[w] + side)
                for u in range(g.graph.vertex_count):
                    if u not in m:
                        m[u] = b.vertex()
                        b.aux.append(m[u])
                for x, y in g.graph.edges:
                    b.edge(m[x], m[y])
                for v in (0, 1):
                    b.straight(w, v, P + K[w] + 1, P + 2 * K[w])
                out_term[w] = P + K[w] + 1
                start[w] = P + K[w]
            dur = timing.single_qubit_duration(L)
        else:
            g = blk.gate
            if plan.variant == "standard":
                cw, mw = g.wires
                ln = timing.cd_lengths(L)
                gad = _cd_gadget(L)
                rails = {1: (cw, 0), 2: (cw, 1), 3: (mw, 1), 4: (mw, 0)}
                dur = ln.duration
                lengths = {cw: ln.comp_rail, mw: ln.med_rail}
            else:
                top, bot = g.wires
                ln, gad = _entangler(L, wire_momentum(top), wire_momentum(bot))
                rails = {"top0": (top, 0), "top1": (top, 1), "bot0": (bot, 0), "bot1": (bot, 1)}
                dur = ln.duration
                lengths = {top: ln.E_top, bot: ln.E_bottom}
            offsets = {(w, v): start[w] for w in lengths for v in (0, 1)}
            b.embed_labeled(gad, rails, offsets)
            for w in wires:
                if w in lengths:
                    E = lengths[w]
                else:
                    k = wire_momentum(w)
                    E = (timing.cd_lengths(L).comp_rail if plan.variant == "standard" and w[0] == "c"
                         else timing.pass_through_length(k, L, dur))
                    for v in (0, 1):
                        b.straight(w, v, start[w] + 1, start[w] + E)
                if E < 2 * K[w]:
                    raise PlanError(f"type-II rail on {w} shorter than two overlaps")
                start[w] = start[w] + E - K[w]
        sched.append(ScheduleEntry(bi, blk.kind, dur, clock))
        clock += dur
    graph = b.graph()
    total = math.fsum(s.duration for s in sched)
    return CompiledLayout(graph=graph, plan=plan, rail_registry=dict(b.registry),
                          input_terminal=in_term, output_terminal=out_term,
                          schedule=tuple(sched), total_time=total, wires=wires,
                          aux_vertices=tuple(b.aux))


def compile_circuit(c: CircuitIR, L: int, theta: float, variant: str = "standard",
                    tol: float = 1e-9) -> CompiledLayout:
    native = decompose_to_native(c, theta, variant, tol)
    return emit_layout(plan_blocks(native, L, variant))


# ---------------------------------------------------------------------------
# encoding


def encode_input(layout: CompiledLayout, bits, mediator_bits=None):
    """Packet specs for a basis input.

    Each particle sits on the first block's input path of its wire, on rail
    ``bits[i]``, at x = M(k)+1 .. M(k)+L with amplitude e^{-ikx}.  Returns
    ``(specs, rail_map)`` for ``dynamics.wave_packet``.
    """
    comps = [w for w in layout.wires if w[0] == "c"]
    meds = [w for w in layout.wires if w[0] == "m"]
    bits = list(bits)
    if len(bits) != len(comps):
        raise ValueError(f"need {len(comps)} bits, got {len(bits)}")
    mediator_bits = list(mediator_bits) if mediator_bits is not None else [0] * len(meds)
    if len(mediator_bits) != len(meds):
        raise ValueError(f"need {len(meds)} mediator bits")
    value = dict(zip(comps, bits)) | dict(zip(meds, mediator_bits))
    specs = []
    for w in layout.wires:
        k = wire_momentum(w)
        if value[w] not in (0, 1):
            raise ValueError("bits must be 0 or 1")
        specs.append(WavePacketSpec((w, int(value[w])), layout.offset(w), layout.L, k, sign=-1))
    return specs, layout.input_rail_map()


def output_packet(layout: CompiledLayout, wire: str, value: int) -> np.ndarray:
    """Single-particle logical output state: e^{ikx} on x = M+1 .. M+L after the last block."""
    k = wire_momentum(wire)
    M = layout.offset(wire)
    amp = np.zeros(layout.graph.vertex_count, dtype=complex)
    for x in range(M + 1, M + layout.L + 1):
        amp[layout.output_vertex(wire, value, x)] = np.exp(1j * k * x) / math.sqrt(layout.L)
    return amp


def input_packet(layout: CompiledLayout, wire: str, value: int) -> np.ndarray:
    k = wire_momentum(wire)
    M = layout.offset(wire)
    amp = np.zeros(layout.graph.vertex_count, dtype=complex)
    for x in range(M + 1, M + layout.L + 1):
        amp[layout.input_vertex(wire, value, x)] = np.exp(-1j * k * x) / math.sqrt(layout.L)
    return amp


def register_bits(index: int, nq: int) -> tuple:
    return tuple((index >> (nq - 1 - i)) & 1 for i in range(nq))
