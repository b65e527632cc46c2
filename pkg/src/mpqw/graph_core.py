"""Graphs with labelled terminals, the gadget library and gadget composition.

Vertices are dense integers ``0..n-1``.  Optional labels map a vertex to a
tuple such as ``(path_id, position)`` so rail coordinates survive
relabelling and serialization.

Gadget numbering
----------------
The figure-derived gadgets are frozen edge lists.  Terminal order is always
``inputs + outputs``: ``(0_in, 1_in, 0_out, 1_out)`` for the one-qubit
gadgets and ports ``(1, 2, 3)`` for the momentum switch (ports 1 and 2 are
stored as inputs, port 3 as the single output).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import GadgetError
from . import timing

# ---------------------------------------------------------------------------
# frozen gadget data


# Phase gate: a path 7-8-9-10 from 0_in to 0_out, and 0_in(1)=0 -> 1 -> 2=1_out
# with a 4-cycle 1-3-{5,6}-4 hanging off vertex 1.
PHASE_GATE_EDGES = ((1, 0), (1, 2), (1, 3), (3, 5), (3, 6), (5, 4), (6, 4),
                    (8, 7), (8, 9), (9, 10))
PHASE_GATE_TERMINALS = (7, 0, 10, 2)

# Basis change: hexagon 1-3-6-4-2-5 with one pendant terminal on 1, 2, 3, 4.
BASIS_CHANGE_EDGES = ((7, 1), (8, 2), (3, 9), (4, 0), (1, 3), (1, 5), (2, 4),
                      (2, 5), (3, 6), (4, 6))
BASIS_CHANGE_TERMINALS = (7, 8, 9, 0)

# Momentum switch: node j of the drawing is vertex j-1; ports 1, 2, 3 are
# vertices 0, 2, 1.
MOMENTUM_SWITCH_EDGES = tuple((a - 1, b - 1) for a, b in (
    (2, 4), (4, 5), (3, 7), (1, 6), (6, 4), (6, 7), (7, 5), (7, 8), (8, 9),
    (8, 10), (11, 5), (11, 12), (11, 13)))
MOMENTUM_SWITCH_TERMINALS = (0, 2, 1)

# Hadamard at k=-pi/2: terminals 0..3, internal vertex i of the drawing is 3+i.
# Every drawn line that passes over a vertex position is split at that vertex;
# this is the only reading of the crossing region that reproduces U_H.
_H = {i: i + 3 for i in range(1, 10)}
HADAMARD_K2_EDGES = (
    (_H[8], _H[9]), (_H[9], 3), (0, _H[7]), (_H[3], 2), (_H[3], _H[4]),
    (_H[7], _H[6]), (_H[8], _H[4]), (_H[4], _H[1]), (_H[9], _H[6]),
    (_H[6], _H[2]), (_H[4], _H[5]), (_H[5], _H[6]), (_H[8], _H[5]),
    (_H[5], _H[2]), (1, _H[1]), (_H[1], _H[2]), (_H[1], _H[3]),
    (_H[3], _H[6]), (_H[4], _H[7]), (_H[7], _H[9]))
HADAMARD_K2_TERMINALS = (0, 1, 2, 3)

# Planar Hadamard (30 vertices).  Vertex order follows the drawing's grid
# coordinates: 0_in(-1,4), 1_in(-1,0), 0_out(4,4), 1_out(4,0), then
# (0,0) (1,0) (2,0) (0,1) (2,1) (0,2) (1,2) (2,2) (0,3) (1,3) (2,3) (3,1)
# (4,1) (3,2) (4,2) (3,0), the two side vertices a b, (0,-1) (1,-1) (2,-1)
# (1,-2) (2,-2), the side vertices c d, and (0,4).
HADAMARD_PLANAR_EDGES = (
    (0, 29), (1, 4), (2, 14), (3, 19), (4, 5), (4, 7), (4, 22), (5, 6), (5, 7),
    (6, 19), (7, 8), (7, 9), (8, 11), (8, 15), (8, 19), (9, 10), (9, 12),
    (10, 11), (10, 13), (11, 14), (12, 13), (12, 29), (13, 14), (15, 16),
    (15, 17), (16, 18), (16, 21), (17, 18), (17, 20), (18, 20), (18, 21),
    (22, 23), (23, 24), (23, 25), (24, 26), (24, 27), (25, 26), (25, 28),
    (26, 27), (26, 28))
HADAMARD_PLANAR_TERMINALS = (0, 1, 2, 3)

GADGET_NAMES = ("path", "identity_edge", "identity_gate", "phase_gate", "basis_change",
                "hadamard_k2", "hadamard_planar", "momentum_switch", "cd_block",
                "planar_entangler")

# ---------------------------------------------------------------------------
# core types


def _norm_edge(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """Finite simple undirected graph.

    Parameters
    ----------
    vertex_count : int
    edges : tuple of (int, int)
        Stored normalized (i < j) and sorted.
    labels : mapping vertex -> tuple, optional
    """

    vertex_count: int
    edges: tuple = ()
    labels: Mapping[int, tuple] = field(default_factory=dict)

    def __post_init__(self):
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GadgetError(f"self-loop at vertex {i}")
            if not (0 <= i < self.vertex_count and 0 <= j < self.vertex_count):
                raise GadgetError(f"edge ({i},{j}) outside 0..{self.vertex_count - 1}")
            e = _norm_edge(i, j)
            if e in norm:
                raise GadgetError(f"duplicate edge {e}")
            norm.add(e)
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        object.__setattr__(self, "labels", {int(v): tuple(l) for v, l in dict(self.labels).items()})

    def adjacency(self, dtype=float) -> np.ndarray:
        a = np.zeros((self.vertex_count, self.vertex_count), dtype=dtype)
        if self.edges:
            e = np.asarray(self.edges)
            a[e[:, 0], e[:, 1]] = 1
            a[e[:, 1], e[:, 0]] = 1
        return a

    def adjacency_sparse(self):
        import scipy.sparse as sp
        n = self.vertex_count
        if not self.edges:
            return sp.csr_matrix((n, n))
        e = np.asarray(self.edges)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    def neighbors(self) -> list[list[int]]:
        csr = self.adjacency_sparse()
        csr.sort_indices()
        ptr, idx = csr.indptr, csr.indices
        return [idx[ptr[v]:ptr[v + 1]].tolist() for v in range(self.vertex_count)]

    def degrees(self) -> np.ndarray:
        if not self.edges:
            return np.zeros(self.vertex_count, dtype=int)
        return np.bincount(np.asarray(self.edges).ravel(), minlength=self.vertex_count)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.vertex_count))
        g.add_edges_from(self.edges)
        return g

    def vertex_of(self, label: tuple) -> int:
        """Inverse label lookup (linear scan, build a dict for bulk use)."""
        label = tuple(label)
        for v, l in self.labels.items():
            if l == label:
                return v
        raise KeyError(label)

    def label_index(self) -> dict:
        return {l: v for v, l in self.labels.items()}


@dataclass(frozen=True)
class Gadget:
    """A graph with ordered input and output terminals."""

    graph: Graph
    inputs: tuple
    outputs: tuple
    design_momentum: tuple = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(int(v) for v in self.inputs))
        object.__setattr__(self, "outputs", tuple(int(v) for v in self.outputs))
        object.__setattr__(self, "design_momentum", tuple(float(k) for k in self.design_momentum))
        terms = self.inputs + self.outputs
        if len(set(terms)) != len(terms):
            raise GadgetError("terminals must be distinct and inputs disjoint from outputs")
        for v in terms:
            if not 0 <= v < self.graph.vertex_count:
                raise GadgetError(f"terminal {v} is not a vertex")

    @property
    def terminals(self) -> tuple:
        return self.inputs + self.outputs


@dataclass(frozen=True)
class ValidationReport:
    is_simple: bool
    max_degree: int
    is_planar: bool
    terminal_separation_ok: bool
    min_terminal_distance: float


# ---------------------------------------------------------------------------
# builders


def _gadget(n, edges, terminals, n_in, momentum, name, labels=None):
    g = Graph(n, tuple(edges), labels or {})
    return Gadget(g, terminals[:n_in], terminals[n_in:], momentum, name)


def _path_gadget(n: int) -> Gadget:
    if n < 2:
        raise GadgetError("path gadget needs n >= 2")
    return _gadget(n, [(i, i + 1) for i in range(n - 1)], (0, n - 1), 1, (), "path")


def parallel(*gadgets: Gadget, name: str = "") -> Gadget:
    """Disjoint union; inputs and outputs are concatenated in argument order."""
    offset = 0
    edges, labels, ins, outs = [], {}, [], []
    for g in gadgets:
        edges += [(i + offset, j + offset) for i, j in g.graph.edges]
        labels.update({v + offset: l for v, l in g.graph.labels.items()})
        ins += [v + offset for v in g.inputs]
        outs += [v + offset for v in g.outputs]
        offset += g.graph.vertex_count
    moms = tuple(sorted({k for g in gadgets for k in g.design_momentum}))
    return Gadget(Graph(offset, tuple(edges), labels), tuple(ins), tuple(outs), moms, name)


def _require(params, key, minimum=1):
    if key not in params:
        raise GadgetError(f"missing parameter {key!r}")
    v = int(params[key])
    if v < minimum:
        raise GadgetError(f"parameter {key!r} must be >= {minimum}, got {v}")
    return v


class _Builder:
    """Incremental graph builder with labelled path segments."""

    def __init__(self):
        self.n = 0
        self.edges = []
        self.labels = {}

    def vertex(self, label=None):
        v = self.n
        self.n += 1
        if label is not None:
            self.labels[v] = tuple(label)
        return v

    def edge(self, a, b):
        self.edges.append((a, b))

    def chain(self, labels):
        vs = [self.vertex(l) for l in labels]
        for a, b in zip(vs, vs[1:]):
            self.edge(a, b)
        return vs

    def embed(self, gadget: Gadget, terminal_vertices: Sequence[int]):
        """Insert a gadget, identifying its terminals with existing vertices."""
        m = {}
        for t, v in zip(gadget.terminals, terminal_vertices):
            m[t] = v
        for u in range(gadget.graph.vertex_count):
            if u not in m:
                m[u] = self.vertex()
        for a, b in gadget.graph.edges:
            self.edge(m[a], m[b])
        return m

    def graph(self):
        return Graph(self.n, tuple(self.edges), self.labels)


def switch_ports(k_native: float, k_other: float) -> dict:
    """Port numbers (0-based switch terminal order) used on a rail switch.

    A switch sitting on the rail of particle ``native`` is entered
    horizontally by that particle and left vertically; the other particle
    arrives vertically and leaves horizontally.  Port 1 carries -pi/4, port 2
    carries -pi/2 and port 3 is the vertical.
    """
    port = {"computational": 0, "mediator": 1}
    return {"native": port[timing.momentum_kind(k_native)],
            "other": port[timing.momentum_kind(k_other)],
            "vertical": 2}


def _cd_block(params) -> Gadget:
    defaults = {}
    if "L" in params:
        ln = timing.cd_lengths(_require(params, "L"))
        defaults = {"Z": ln.Z, "X": ln.X, "W": ln.W}
    try:
        Z, X, W = (int(params.get(key, defaults.get(key))) for key in ("Z", "X", "W"))
    except TypeError:
        raise GadgetError("cd_block needs L, or all of Z, X, W") from None
    if min(Z, X, W) < 2:
        raise GadgetError("cd_block needs L, or Z, X, W >= 2")
    sw = build_gadget("momentum_switch")
    b = _Builder()
    comp_len, med_len = 2 * W + Z + 4, 2 * X + Z + 6
    p1 = b.chain([(1, x) for x in range(1, comp_len + 1)])       # 0_c straight
    p4 = b.chain([(4, x) for x in range(1, med_len + 1)])        # 0_med straight
    c_in = b.chain([(2, x) for x in range(1, W + 1)])
    m_in = b.chain([(3, x) for x in range(1, X + 1)])
    vert = b.chain([(5, x) for x in range(1, Z + 1)])
    c_out = b.chain([(2, x) for x in range(W + Z + 5, 2 * W + Z + 5)])
    m_out = b.chain([(3, x) for x in range(X + Z + 7, 2 * X + Z + 7)])
    # top switch: port1 <- 1_c in, port3 -> vertical top, port2 -> 1_med out
    b.embed(sw, (c_in[-1], m_out[0], vert[0]))
    # bottom switch: port2 <- 1_med in, port3 -> vertical bottom, port1 -> 1_c out
    b.embed(sw, (c_out[0], m_in[-1], vert[-1]))
    g = b.graph()
    return Gadget(g, (p1[0], c_in[0], p4[0], m_in[0]), (p1[-1], c_out[-1], p4[-1], m_out[-1]),
                  (timing.K_COMPUTATIONAL, timing.K_MEDIATOR), "cd_block")


def _planar_entangler(params) -> Gadget:
    L = _require(params, "L")
    top_is_mediator = bool(params.get("top_is_mediator", 1))
    k_top = timing.K_MEDIATOR if top_is_mediator else timing.K_COMPUTATIONAL
    k_bot = timing.K_COMPUTATIONAL if top_is_mediator else timing.K_MEDIATOR
    ln = timing.planar_entangler_lengths(L, k_top, k_bot)
    return planar_entangler_graph(ln)


def planar_entangler_graph(ln: "timing.PlanarEntanglerLengths") -> Gadget:
    """Four-switch entangler between the top qubit's 1-rail and the bottom
    qubit's 0-rail.  Labels are ``(rail, position)`` with rails
    ``"top0", "top1", "bot0", "bot1"`` and the verticals ``"v1", "v2"``.

    Terminal order: inputs (top0, top1, bot0, bot1), outputs likewise.
    """
    sw = build_gadget("momentum_switch")
    et, eb = timing.switch_edges(ln.k_top), timing.switch_edges(ln.k_bottom)
    b = _Builder()
    top0 = b.chain([("top0", x) for x in range(1, ln.E_top + 1)])
    bot1 = b.chain([("bot1", x) for x in range(1, ln.E_bottom + 1)])
    # bottom particle rail (bot0): in, s1, V1 up, s3, upper horizontal, s4, V2 down, s2, out
    Z = ln.Z
    pos = 0
    bot_in = b.chain([("bot0", x) for x in range(1, ln.a_bottom + 1)])
    pos = ln.a_bottom + eb
    v1 = b.chain([("v1", x) for x in range(1, Z + 1)])          # v1[0] bottom end
    pos_v1_top = pos + Z - 1
    pos = pos_v1_top + eb
    upper = b.chain([("bot0", x) for x in range(pos, pos + ln.h_top)])
    pos = pos + ln.h_top - 1 + eb
    v2 = b.chain([("v2", x) for x in range(1, Z + 1)])          # v2[0] top end
    pos = pos + Z - 1 + eb
    bot_out = b.chain([("bot0", x) for x in range(pos, pos + ln.o_bottom)])
    assert pos + ln.o_bottom - 1 == ln.E_bottom
    # top particle rail (top1): in, s3, V1 down, s1, lower horizontal, s2, V2 up, s4, out
    top_in = b.chain([("top1", x) for x in range(1, ln.a_top + 1)])
    pos = ln.a_top + et + Z - 1 + et
    lower = b.chain([("top1", x) for x in range(pos, pos + ln.h_bottom)])
    pos = pos + ln.h_bottom - 1 + et + Z - 1 + et
    top_out = b.chain([("top1", x) for x in range(pos, pos + ln.o_top)])
    assert pos + ln.o_top - 1 == ln.E_top
    pb = switch_ports(ln.k_bottom, ln.k_top)
    pt = switch_ports(ln.k_top, ln.k_bottom)

    def place(ports, native_side, other_side, vertical):
        terms = [None, None, None]
        terms[ports["native"]] = native_side
        terms[ports["other"]] = other_side
        terms[ports["vertical"]] = vertical
        b.embed(sw, terms)

    # s1: bottom rail, left; bottom particle enters from the west
    place(pb, bot_in[-1], lower[0], v1[0])
    # s2: bottom rail, right; bottom particle leaves to the east
    place(pb, bot_out[0], lower[-1], v2[-1])
    # s3: top rail, left; top particle enters from the west
    place(pt, top_in[-1], upper[0], v1[-1])
    # s4: top rail, right; top particle leaves to the east
    place(pt, top_out[0], upper[-1], v2[0])
    g = b.graph()
    return Gadget(g, (top0[0], top_in[0], bot_in[0], bot1[0]),
                  (top0[-1], top_out[-1], bot_out[-1], bot1[-1]),
                  (timing.K_COMPUTATIONAL, timing.K_MEDIATOR), "planar_entangler")


def build_gadget(name: str, params: Mapping | None = None) -> Gadget:
    """Build a library gadget.

    Parameters
    ----------
    name : str
        One of ``GADGET_NAMES``.
    params : dict
        ``path`` needs ``n``; ``cd_block`` needs ``L`` (or explicit ``Z``,
        ``X``, ``W``); ``planar_entangler`` needs ``L`` and accepts
        ``top_is_mediator`` (default 1).
    """
    params = dict(params or {})
    k4, k2 = timing.K_COMPUTATIONAL, timing.K_MEDIATOR
    if name == "path":
        return _path_gadget(_require(params, "n", 2))
    if name == "identity_edge":
        return _gadget(2, [(0, 1)], (0, 1), 1, (), "identity_edge")
    if name == "identity_gate":
        e = build_gadget("identity_edge")
        return parallel(e, e, name="identity_gate")
    if name == "phase_gate":
        return _gadget(11, PHASE_GATE_EDGES, PHASE_GATE_TERMINALS, 2, (k4,), name)
    if name == "basis_change":
        return _gadget(10, BASIS_CHANGE_EDGES, BASIS_CHANGE_TERMINALS, 2, (k4,), name)
    if name == "hadamard_k2":
        return _gadget(13, HADAMARD_K2_EDGES, HADAMARD_K2_TERMINALS, 2, (k2,), name)
    if name == "hadamard_planar":
        return _gadget(30, HADAMARD_PLANAR_EDGES, HADAMARD_PLANAR_TERMINALS, 2, (k2,), name)
    if name == "momentum_switch":
        return _gadget(13, MOMENTUM_SWITCH_EDGES, MOMENTUM_SWITCH_TERMINALS, 2, (k4, k2), name)
    if name == "cd_block":
        return _cd_block(params)
    if name == "planar_entangler":
        return _planar_entangler(params)
    raise GadgetError(f"unknown gadget {name!r}")


# ---------------------------------------------------------------------------
# composition


def attach_terminal_paths(g: Gadget, lengths: Sequence[int]) -> Graph:
    """Attach a pendant path to every terminal.

    Terminal ``q`` (inputs then outputs) is rail position 1; the
    ``lengths[q]`` new vertices get labels ``(q, 2) .. (q, lengths[q] + 1)``
    moving away from the gadget.  The terminal itself is labelled ``(q, 1)``.
    """
    terms = g.terminals
    if len(lengths) != len(terms):
        raise GadgetError(f"{len(terms)} terminals but {len(lengths)} lengths")
    n = g.graph.vertex_count
    edges = list(g.graph.edges)
    labels = dict(g.graph.labels)
    for q, (t, ln) in enumerate(zip(terms, lengths)):
        if ln < 0:
            raise GadgetError("path lengths must be >= 0")
        labels[t] = (q, 1)
        prev = t
        for x in range(2, ln + 2):
            labels[n] = (q, x)
            edges.append((prev, n))
            prev = n
            n += 1
    return Graph(n, tuple(edges), labels)


def rails_graph(g: Gadget, K: int) -> Graph:
    """Truncated graph G(K): every terminal gets a rail of K vertices in total."""
    return attach_terminal_paths(g, [K - 1] * len(g.terminals))


def concatenate(a: Gadget, b: Gadget) -> Gadget:
    """Identify ``a.outputs[i]`` with ``b.inputs[i]``.

    The merged vertices keep ``a``'s indices; ``b``'s remaining vertices are
    appended in increasing order.
    """
    if len(a.outputs) != len(b.inputs):
        raise GadgetError(f"arity mismatch: {len(a.outputs)} outputs vs {len(b.inputs)} inputs")
    n = a.graph.vertex_count
    m = dict(zip(b.inputs, a.outputs))
    for u in range(b.graph.vertex_count):
        if u not in m:
            m[u] = n
            n += 1
    edges = list(a.graph.edges) + [(m[i], m[j]) for i, j in b.graph.edges]
    labels = dict(a.graph.labels)
    for v, l in b.graph.labels.items():
        labels.setdefault(m[v], l)
    moms = tuple(sorted(set(a.design_momentum) | set(b.design_momentum)))
    return Gadget(Graph(n, tuple(edges), labels), a.inputs, tuple(m[v] for v in b.outputs),
                  moms, f"{a.name}*{b.name}")


def components_containing(g: Graph, seeds) -> list[int]:
    """Sorted vertices of the connected components that contain any seed."""
    from scipy.sparse.csgraph import connected_components
    _, comp = connected_components(g.adjacency_sparse(), directed=False)
    wanted = {comp[v] for v in seeds}
    return [v for v in range(g.vertex_count) if comp[v] in wanted]


def induced_subgraph(g: Graph, vertices) -> tuple[Graph, dict]:
    """Subgraph on ``vertices`` (kept in the given order) and the old -> new map."""
    m = {v: i for i, v in enumerate(vertices)}
    edges = tuple((m[i], m[j]) for i, j in g.edges if i in m and j in m)
    labels = {m[v]: l for v, l in g.labels.items() if v in m}
    return Graph(len(m), edges, labels), m


def canonical_hash(g: Graph) -> str:
    """Isomorphism-invariant hash (Weisfeiler-Lehman)."""
    return nx.weisfeiler_lehman_graph_hash(g.to_networkx(), iterations=5)


def _terminal_distance(nxg, group) -> float:
    best = float("inf")
    for i, s in enumerate(group):
        dist = nx.single_source_shortest_path_length(nxg, s)
        for t in group[i + 1:]:
            best = min(best, dist.get(t, float("inf")))
    return best


def _smoothed(graph: Graph) -> nx.Graph:
    """Graph with every degree-2 vertex suppressed (same planarity, far smaller)."""
    nbrs = graph.neighbors()
    keep = [v for v in range(graph.vertex_count) if len(nbrs[v]) != 2]
    out = nx.Graph()
    out.add_nodes_from(keep)
    seen = set()
    for s in keep:
        for first in nbrs[s]:
            prev, cur = s, first
            while len(nbrs[cur]) == 2 and cur != s:
                if cur in seen:
                    break
                seen.add(cur)
                a, b = nbrs[cur]
                prev, cur = cur, (b if a == prev else a)
            if len(nbrs[cur]) != 2 and cur != s:
                out.add_edge(s, cur)
    # pure cycles of degree-2 vertices are planar and carry no information
    return out


def validate(g, interaction_range: int = 1, check_planarity: bool = True) -> ValidationReport:
    """Structural checks on a Graph or Gadget.

    ``terminal_separation_ok`` requires every pair of inputs and every pair of
    outputs to be more than ``interaction_range`` edges apart.  A bare Graph
    has no terminals and passes trivially.
    """
    gadget = g if isinstance(g, Gadget) else None
    graph = g.graph if gadget else g
    e = np.asarray(graph.edges, dtype=np.int64).reshape(-1, 2)
    simple = bool(np.all(e[:, 0] != e[:, 1])) and len(np.unique(e, axis=0)) == len(e)
    deg = graph.degrees()
    planar = bool(nx.check_planarity(_smoothed(graph))[0]) if check_planarity else False
    dmin = float("inf")
    if gadget:
        nxg = graph.to_networkx()
        dmin = min(_terminal_distance(nxg, list(gadget.inputs)),
                   _terminal_distance(nxg, list(gadget.outputs)))
    return ValidationReport(is_simple=simple, max_degree=int(deg.max()) if len(deg) else 0,
                            is_planar=planar,
                            terminal_separation_ok=dmin > interaction_range,
                            min_terminal_distance=dmin)


# ---------------------------------------------------------------------------
# serialization


def _label_to_json(l):
    return list(l)


def graph_to_dict(g, inputs=(), outputs=()) -> dict:
    if isinstance(g, Gadget):
        inputs, outputs, g = g.inputs, g.outputs, g.graph
    return {"vertices": g.vertex_count,
            "edges": [[i, j] for i, j in g.edges],
            "inputs": list(inputs),
            "outputs": list(outputs),
            "labels": {str(v): _label_to_json(l) for v, l in sorted(g.labels.items())}}


def graph_from_dict(d: Mapping):
    """Inverse of ``graph_to_dict``; returns a Gadget when terminals are present."""
    labels = {int(v): tuple(l) for v, l in d.get("labels", {}).items()}
    g = Graph(int(d["vertices"]), tuple(tuple(e) for e in d["edges"]), labels)
    if d.get("inputs") or d.get("outputs"):
        return Gadget(g, tuple(d.get("inputs", ())), tuple(d.get("outputs", ())))
    return g


def to_json(g, **kw) -> str:
    return json.dumps(graph_to_dict(g, **kw), sort_keys=True)


def from_json(s: str):
    return graph_from_dict(json.loads(s))


def to_dot(g, name: str = "G") -> str:
    """Graphviz DOT text; terminals are drawn as boxes."""
    gadget = g if isinstance(g, Gadget) else None
    graph = g.graph if gadget else g
    lines = [f"graph {name} {{"]
    term = {}
    if gadget:
        term.update({v: f"in{i}" for i, v in enumerate(gadget.inputs)})
        term.update({v: f"out{i}" for i, v in enumerate(gadget.outputs)})
    for v in range(graph.vertex_count):
        attrs = []
        if v in graph.labels:
            attrs.append('label="%s"' % ",".join(str(x) for x in graph.labels[v]))
        if v in term:
            attrs.append(f'shape=box xlabel="{term[v]}"')
        lines.append(f"  {v}" + (f" [{' '.join(attrs)}]" if attrs else "") + ";")
    for i, j in graph.edges:
        lines.append(f"  {i} -- {j};")
    lines.append("}")
    return "\n".join(lines) + "\n"
