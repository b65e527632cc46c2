"""Experiment drivers and the ``mpqw`` command line.

Drivers return :class:`ExperimentRecord` lists (gate scans, CD scans,
truncation trials) or a :class:`LogicalOutcome` (full circuit runs).  Records
serialize to a versioned CSV with one row per measured quantity, and to JSON
with the same content.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import struct
import sys
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import compiler, graph_core, scattering, timing, two_particle
from .dynamics import (DEFAULT_CAP, StateVector, WavePacketSpec, build_hamiltonian, evolve,
                       product_and_symmetrize, truncation_bound, wave_packet)
from .errors import GeometryMismatch, MPQWError
from .two_particle import InteractionModel

SCHEMA_VERSION = 1
CSV_FIELDS = ("schema_version", "kind", "seed", "params", "quantity", "measured", "predicted",
              "abs_error")
STATE_MAGIC = b"MPQWSTAT"

# rails of the controlled-phase block carrying each logical value
CD_COMP_RAIL = {0: 1, 1: 2}
CD_MED_RAIL = {0: 4, 1: 3}

# ---------------------------------------------------------------------------
# records


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentRecord:
    """One experiment at one parameter point.

    ``measured`` and ``predicted`` share their keys; ``errors`` holds the
    absolute difference, wrapped to (-pi, pi] for keys containing "phase".
    For bounds (truncation trials) the predicted value is the bound.
    """

    kind: str
    params: dict
    measured: dict
    predicted: dict
    seconds: float = 0.0
    seed: int | None = None
    errors: dict = field(init=False)

    def __post_init__(self):
        if set(self.measured) != set(self.predicted):
            raise ValueError("every measured value needs a predicted counterpart")
        self.measured = {k: float(v) for k, v in self.measured.items()}
        self.predicted = {k: float(v) for k, v in self.predicted.items()}
        self.errors = {}
        for k, m in self.measured.items():
            d = m - self.predicted[k]
            self.errors[k] = abs(_wrap(d)) if "phase" in k else abs(d)

    def param_string(self) -> str:
        return ";".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))

    def rows(self) -> list[dict]:
        return [{"schema_version": SCHEMA_VERSION, "kind": self.kind,
                 "seed": "" if self.seed is None else self.seed, "params": self.param_string(),
                 "quantity": q, "measured": repr(self.measured[q]),
                 "predicted": repr(self.predicted[q]), "abs_error": repr(self.errors[q])}
                for q in sorted(self.measured)]

    def to_dict(self, include_timing: bool = False) -> dict:
        d = {"kind": self.kind, "params": dict(sorted(self.params.items())), "seed": self.seed,
             "measured": dict(sorted(self.measured.items())),
             "predicted": dict(sorted(self.predicted.items())),
             "errors": dict(sorted(self.errors.items()))}
        if include_timing:
            d["seconds"] = self.seconds
        return d


def records_to_csv(records, include_timing: bool = False) -> str:
    """Deterministic CSV: rows in record order, quantities sorted, floats by repr."""
    buf = io.StringIO()
    fields = CSV_FIELDS + (("seconds",) if include_timing else ())
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in records:
        for row in r.rows():
            if include_timing:
                row["seconds"] = repr(r.seconds)
            w.writerow(row)
    return buf.getvalue()


def records_to_json(records, include_timing: bool = False) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION,
                       "records": [r.to_dict(include_timing) for r in records]},
                      sort_keys=True, indent=1)


@dataclass
class LogicalOutcome:
    """Readout of a circuit run.

    ``probabilities[z]`` is the probability of finding one particle in the
    readout window of each wire's rail ``z_w``; ``leakage`` is the probability
    of every other configuration.  ``normalized`` rescales the window
    probabilities to sum to one.  ``fidelity`` is ``|<phi|psi(T)>|`` against
    the encoded ideal output, insensitive to the overall phase.
    """

    wires: tuple
    probabilities: dict
    leakage: float
    fidelity: float
    ideal_probabilities: dict
    overlaps: dict
    norm: float

    @property
    def normalized(self) -> dict:
        s = sum(self.probabilities.values())
        return {z: p / s for z, p in self.probabilities.items()} if s > 0 else dict(self.probabilities)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "wires": list(self.wires),
                "probabilities": self.probabilities, "normalized": self.normalized,
                "ideal_probabilities": self.ideal_probabilities,
                "overlaps": {z: [v.real, v.imag] for z, v in self.overlaps.items()},
                "leakage": self.leakage, "fidelity": self.fidelity, "norm": self.norm}


# ---------------------------------------------------------------------------
# single-qubit gate scan


def _packet_on(n_vertices, rail_map, rail, offset, L, k, sign, phase=1.0):
    spec = WavePacketSpec(rail, offset, L, k, sign=sign)
    return phase * wave_packet(spec, rail_map, n_vertices).amplitudes


def gate_block(gate: str, k: float | None = None):
    """(gadget, k, U) for a gadget with perfect transmission at k."""
    gad = graph_core.build_gadget(gate)
    if k is None:
        if not gad.design_momentum:
            raise ValueError(f"{gate} has no design momentum; pass k")
        k = gad.design_momentum[0]
    sol = scattering.s_matrix(gad, k)
    bf = scattering.check_block_form(sol, len(gad.inputs))
    if not bf.is_perfect_transmission:
        raise GeometryMismatch(f"{gate} reflects at k = {k} (|R| = {bf.reflection_norm:.2e})")
    return gad, float(k), bf.U


def run_gate_scan(gate: str, L_list, k: float | None = None, amplitudes=(0.6, 0.8j),
                  tol: float = 1e-10, backend=None) -> list[ExperimentRecord]:
    """Evolve encoded inputs through a truncated single-qubit gate graph.

    For each L the graph has rails of K = 2M(k)+L vertices and the walk runs
    for t_I = 3L/2.  Logical outputs are
    ``e^{-2it cos k} L^{-1/2} sum_{x=M+1}^{M+L} e^{ikx}`` on the output rails.

    Recorded quantities: ``error_norm`` = ||psi(t_I) - psi_out|| and
    ``fidelity`` = |<psi_out|psi(t_I)>| for the input ``amplitudes``;
    ``worst_basis_error`` over the two basis inputs; ``logical_entry_error``
    = max |<v_out|psi_j(t_I)> - U_vj| (phase sensitive).
    """
    gad, k, U = gate_block(gate, k)
    a = np.asarray(amplitudes, dtype=complex)
    a = a / np.linalg.norm(a)
    records = []
    for L in L_list:
        t0 = time.perf_counter()
        L = int(L)
        M = timing.packet_offset(k, L)
        K = timing.block_rail_length(k, L)
        g = graph_core.rails_graph(gad, K)
        rmap = g.label_index()
        V = g.vertex_count
        H = build_hamiltonian(g, 1, None, "distinguishable", backend=backend)
        t = timing.single_qubit_duration(L)
        ph = np.exp(-2j * t * math.cos(k))
        outs = [_packet_on(V, rmap, 2 + v, M, L, k, +1, ph) for v in (0, 1)]
        evolved = []
        for j in (0, 1):
            psi0 = _packet_on(V, rmap, j, M, L, k, -1)
            evolved.append(evolve(H, StateVector(H.basis, psi0), t, tol, backend=backend).amplitudes)
        Umeas = np.array([[np.vdot(outs[v], evolved[j]) for j in (0, 1)] for v in (0, 1)])
        basis_err = max(np.linalg.norm(evolved[j] - U[0, j] * outs[0] - U[1, j] * outs[1])
                        for j in (0, 1))
        psi = a[0] * evolved[0] + a[1] * evolved[1]
        b = U @ a
        target = b[0] * outs[0] + b[1] * outs[1]
        err = float(np.linalg.norm(psi - target))
        fid = float(abs(np.vdot(target, psi)))
        records.append(ExperimentRecord(
            "gate_scan",
            {"gate": gate, "k": k, "L": L, "tol": tol, "M": M, "K": K, "t": t, "vertices": V},
            {"error_norm": err, "fidelity": fid, "worst_basis_error": basis_err,
             "logical_entry_error": float(np.max(np.abs(Umeas - U)))},
            {"error_norm": 0.0, "fidelity": 1.0, "worst_basis_error": 0.0,
             "logical_entry_error": 0.0},
            seconds=time.perf_counter() - t0))
    return records


# ---------------------------------------------------------------------------
# controlled-phase block scan


def _restrict(vectors, keep):
    return [v[keep] for v in vectors]


def cd_branch(L: int, comp_bit: int, med_bit: int, model, statistics: str, tol: float = 1e-10,
              backend=None, cap: int = DEFAULT_CAP, single_particle_check: bool = True) -> dict:
    """Evolve one logical input of the controlled-phase block for t_II.

    The walk is restricted to the connected components holding the two
    packets, which is exact.  Returns the overlap with ``|ab_out>`` and, if
    requested, ||psi - Sym(psi_c (x) psi_m)|| against two independent
    single-particle runs.
    """
    ln = timing.cd_lengths(L)
    gad = graph_core.build_gadget("cd_block", {"L": L})
    g = gad.graph
    rmap = g.label_index()
    V = g.vertex_count
    t = ln.duration
    kc, km = timing.K_COMPUTATIONAL, timing.K_MEDIATOR
    rc, rm = CD_COMP_RAIL[comp_bit], CD_MED_RAIL[med_bit]
    in_c = _packet_on(V, rmap, rc, ln.m_comp, L, kc, +1)
    in_m = _packet_on(V, rmap, rm, ln.m_med, L, km, +1)
    out_c = _packet_on(V, rmap, rc, ln.comp_readout_offset, L, kc, +1, np.exp(-2j * t * math.cos(kc)))
    out_m = _packet_on(V, rmap, rm, ln.med_readout_offset, L, km, +1, np.exp(-2j * t * math.cos(km)))
    seeds = np.nonzero(np.abs(in_c) + np.abs(in_m))[0]
    keep = graph_core.components_containing(g, seeds)
    sub, _ = graph_core.induced_subgraph(g, keep)
    in_c, in_m, out_c, out_m = _restrict((in_c, in_m, out_c, out_m), keep)
    H = build_hamiltonian(sub, 2, model, statistics, cap=cap, backend=backend)
    psi0 = product_and_symmetrize([in_c, in_m], statistics, H.basis)
    psi = evolve(H, psi0, t, tol, backend=backend)
    target = product_and_symmetrize([out_c, out_m], statistics, H.basis)
    res = {"overlap": target.overlap(psi), "dimension": H.dimension, "vertices": len(keep), "t": t,
           "norm": psi.norm()}
    if single_particle_check:
        H1 = build_hamiltonian(sub, 1, None, "distinguishable", backend=backend)
        ec = evolve(H1, StateVector(H1.basis, in_c), t, tol, backend=backend).amplitudes
        em = evolve(H1, StateVector(H1.basis, in_m), t, tol, backend=backend).amplitudes
        prod = product_and_symmetrize([ec, em], statistics, H.basis)
        res["factorization_error"] = float(np.linalg.norm(psi.amplitudes - prod.amplitudes))
        res["product_overlap"] = target.overlap(prod)
    return res


def run_cd_scan(model: InteractionModel, statistics: str = "boson", L_list=(16, 24, 32),
                tol: float = 1e-10, backend=None, cap: int = DEFAULT_CAP) -> list[ExperimentRecord]:
    """Run all four logical inputs of the controlled-phase block per L.

    ``phase`` is arg<11_out|psi_11> - arg<00_out|psi_00>, predicted to be the
    two-particle phase theta at the collision momenta.
    ``phase_branch_referenced`` also subtracts the 10 and 01 phases, which
    cancels single-particle phases common to the branches.  ``fidelity_ab`` is
    |<ab_out|psi_ab>|.  For the three non-interacting inputs,
    ``factorization_error_ab`` compares against independent single-particle
    runs and ``product_fidelity_error_ab`` compares the two fidelities.
    """
    theta = two_particle.cd_phase(model, statistics)
    records = []
    for L in L_list:
        t0 = time.perf_counter()
        L = int(L)
        br = {}
        for c in (0, 1):
            for m in (0, 1):
                br[(c, m)] = cd_branch(L, c, m, model, statistics, tol, backend, cap,
                                       single_particle_check=(c, m) != (1, 1))
        arg = {key: float(np.angle(r["overlap"])) for key, r in br.items()}
        phase = _wrap(arg[(1, 1)] - arg[(0, 0)])
        referenced = _wrap(arg[(1, 1)] - arg[(1, 0)] - arg[(0, 1)] + arg[(0, 0)])
        measured = {"phase": phase, "phase_branch_referenced": referenced}
        predicted = {"phase": theta, "phase_branch_referenced": theta}
        for (c, m), r in br.items():
            key = f"{c}{m}"
            measured[f"fidelity_{key}"] = abs(r["overlap"])
            predicted[f"fidelity_{key}"] = 1.0
            measured[f"norm_{key}"] = r["norm"]
            predicted[f"norm_{key}"] = 1.0
            if "factorization_error" in r:
                measured[f"factorization_error_{key}"] = r["factorization_error"]
                predicted[f"factorization_error_{key}"] = 0.0
                measured[f"product_fidelity_error_{key}"] = abs(abs(r["overlap"]) - abs(r["product_overlap"]))
                predicted[f"product_fidelity_error_{key}"] = 0.0
        records.append(ExperimentRecord(
            "cd_scan",
            {"model": model.kind, "U": model.U, "statistics": statistics, "L": L, "tol": tol,
             "t": br[(1, 1)]["t"], "dimension_11": br[(1, 1)]["dimension"]},
            measured, predicted, seconds=time.perf_counter() - t0))
    return records


# ---------------------------------------------------------------------------
# full circuit runs


def plan_circuit(plan: compiler.BlockPlan) -> compiler.CircuitIR:
    """The gate sequence a block plan implements, block by block."""
    gates = []
    for blk in plan.blocks:
        if blk.kind == "I":
            gates += [compiler.Gate(op, (w,)) for w, op in blk.ops if op != "I"]
        else:
            gates.append(blk.gate)
    return compiler.CircuitIR(plan.qubit_count, tuple(gates), plan.mediators)


def _circuit_theta(layout, model, statistics, theta):
    if theta is not None:
        return float(theta)
    if not any(b.kind == "II" for b in layout.plan.blocks):
        return 0.0
    if model is None:
        raise ValueError("a model (or theta) is needed for circuits with type-II blocks")
    return two_particle.cd_phase(model, statistics)


def _readout_codes(layout, keep_map, n_sub):
    """Per restricted vertex: wire index * 2 + value inside a readout window, else -1."""
    code = np.full(n_sub, -1, dtype=np.int64)
    index = {w: i for i, w in enumerate(layout.wires)}
    for (w, v), verts in layout.readout_windows().items():
        for u in verts:
            if u in keep_map:
                code[keep_map[u]] = 2 * index[w] + v
    return code


def prepare_circuit_state(layout: compiler.CompiledLayout, bits=None, mediator_bits=None,
                          statistics: str = "boson", model=None, backend=None,
                          cap: int = DEFAULT_CAP):
    """(H, psi0, keep) for an encoded basis input on the occupied components."""
    comps = [w for w in layout.wires if w[0] == "c"]
    bits = [0] * len(comps) if bits is None else [int(b) for b in bits]
    specs, rmap = compiler.encode_input(layout, bits, mediator_bits)
    V = layout.graph.vertex_count
    phis = [wave_packet(s, rmap, V).amplitudes for s in specs]
    seeds = np.nonzero(sum(np.abs(p) for p in phis))[0]
    keep = graph_core.components_containing(layout.graph, seeds)
    sub, _ = graph_core.induced_subgraph(layout.graph, keep)
    H = build_hamiltonian(sub, len(phis), model, statistics, cap=cap, backend=backend)
    psi0 = product_and_symmetrize(_restrict(phis, keep), statistics, H.basis)
    return H, psi0, keep


def run_circuit_sim(layout: compiler.CompiledLayout, model: InteractionModel | None = None,
                    statistics: str = "boson", tol: float = 1e-8, circuit=None, bits=None,
                    mediator_bits=None, theta: float | None = None, backend=None,
                    cap: int = DEFAULT_CAP) -> LogicalOutcome:
    """Evolve an encoded basis input for the layout's total time and read out.

    ``circuit`` defaults to the plan's own gate sequence; its ideal unitary
    (with CD = diag(1, 1, 1, e^{i theta})) defines the encoded target
    ``|phi> = sum_z <z|U|input> |z_out>``.
    """
    theta = _circuit_theta(layout, model, statistics, theta)
    circuit = plan_circuit(layout.plan) if circuit is None else circuit
    H, psi0, keep = prepare_circuit_state(layout, bits, mediator_bits, statistics, model, backend, cap)
    psi = evolve(H, psi0, layout.total_time, tol, backend=backend)
    wires = tuple(circuit.wires)
    if set(wires) != set(layout.wires):
        raise GeometryMismatch(f"circuit wires {wires} differ from layout wires {layout.wires}")
    comps = [w for w in layout.wires if w[0] == "c"]
    meds = [w for w in layout.wires if w[0] == "m"]
    value = dict(zip(comps, [0] * len(comps) if bits is None else [int(b) for b in bits]))
    value |= dict(zip(meds, [0] * len(meds) if mediator_bits is None else [int(b) for b in mediator_bits]))
    U = compiler.ideal_unitary(circuit, theta)
    col = sum(value[w] << (len(wires) - 1 - i) for i, w in enumerate(wires))
    ideal = U[:, col]

    keep_map = {u: i for i, u in enumerate(keep)}
    code = _readout_codes(layout, keep_map, len(keep))
    st = H.basis.states
    c = code[st]
    nw = len(layout.wires)
    wire_of = np.where(c >= 0, c // 2, -1)
    ok = (c >= 0).all(axis=1)
    if nw > 1:
        ok &= (np.sort(wire_of, axis=1) == np.arange(nw)).all(axis=1)
    else:
        ok &= wire_of[:, 0] == 0
    # register index in the circuit's wire order
    pos = np.array([wires.index(w) for w in layout.wires])
    reg = np.zeros(len(st), dtype=np.int64)
    for j in range(st.shape[1]):
        w = np.where(ok, wire_of[:, j], 0)
        reg += np.where(ok, (c[:, j] % 2) << (nw - 1 - pos[w]), 0)
    p = np.abs(psi.amplitudes) ** 2
    probs_arr = np.bincount(reg[ok], weights=p[ok], minlength=2 ** nw)
    leakage = float(p[~ok].sum())

    overlaps, ideal_probs = {}, {}
    total = 0j
    for z in range(2 ** nw):
        zb = compiler.register_bits(z, nw)
        zval = dict(zip(wires, zb))
        outs = [compiler.output_packet(layout, w, zval[w])[keep] for w in layout.wires]
        if any(not o.any() for o in outs):
            ov = 0j          # window lies on a component the walk never reaches
        else:
            ov = product_and_symmetrize(outs, statistics, H.basis).overlap(psi)
        key = "".join(map(str, zb))
        overlaps[key] = ov
        ideal_probs[key] = float(abs(ideal[z]) ** 2)
        total += np.conj(ideal[z]) * ov
    probs = {"".join(map(str, compiler.register_bits(z, nw))): float(probs_arr[z])
             for z in range(2 ** nw)}
    return LogicalOutcome(wires=wires, probabilities=probs, leakage=leakage,
                          fidelity=float(abs(total)), ideal_probabilities=ideal_probs,
                          overlaps=overlaps, norm=psi.norm())


# ---------------------------------------------------------------------------
# truncation-bound experiment


@dataclass
class TruncationReport:
    records: list
    passed: bool

    @property
    def min_margin(self) -> float:
        return min(r.predicted["discrepancy"] - r.measured["discrepancy"] for r in self.records)

    @property
    def max_ratio(self) -> float:
        return max(r.measured["discrepancy"] / r.predicted["discrepancy"] for r in self.records)


def hop_distance(mat: np.ndarray, sources) -> np.ndarray:
    """Breadth-first distance in the off-diagonal pattern of ``mat``."""
    n = mat.shape[0]
    pattern = (np.abs(mat) > 0) & ~np.eye(n, dtype=bool)
    nbrs = [np.nonzero(row)[0] for row in pattern]
    dist = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
    q = deque()
    for s in sources:
        dist[s] = 0
        q.append(s)
    while q:
        u = q.popleft()
        for v in nbrs[u]:
            if dist[v] > dist[u] + 1:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def _random_core(rng, n):
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n)}
    for _ in range(int(rng.integers(0, n))):
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((a, b))
    return edges


def _core_with_rails(rng, n_core, n_rails, cut, tail):
    """Random connected core with rails of ``cut + tail`` vertices; returns
    (graph, mask of core + first ``cut`` vertices of every rail)."""
    edges = _random_core(rng, n_core)
    V = n_core
    inside = list(range(n_core))
    for _ in range(n_rails):
        prev = int(rng.integers(0, n_core))
        for x in range(cut + tail):
            edges.add((prev, V))
            if x < cut:
                inside.append(V)
            prev = V
            V += 1
    mask = np.zeros(V, dtype=bool)
    mask[inside] = True
    return graph_core.Graph(V, tuple(edges)), mask


def _walk_instance(rng, N0, T):
    """One particle; K is the core plus a prefix of each rail, placed so the
    walk gets within N0 of the cut for some draws and not for others."""
    n_core = int(rng.integers(4, 11))
    cut = N0 + int(round(2 * T * rng.uniform(0.4, 1.4))) + 2
    n_rails = int(rng.integers(2, 5))
    tail = int(rng.integers(5, 40))
    n_rails = max(1, min(n_rails, (400 - n_core) // (cut + tail)))
    g, inside = _core_with_rails(rng, n_core, n_rails, cut, tail)
    H = g.adjacency()
    phi = np.zeros(g.vertex_count, dtype=complex)
    if rng.random() < 0.5:
        # short packet on a rail, next to the core, moving in either direction
        ln = int(rng.integers(2, 6))
        r0 = n_core
        k = rng.uniform(0.2, math.pi - 0.2)
        x = np.arange(ln)
        phi[r0 + x] = np.exp(1j * k * x)
    else:
        phi[:n_core] = rng.normal(size=n_core) + 1j * rng.normal(size=n_core)
    return H, inside, phi / np.linalg.norm(phi), "walk"


def _pair_instance(rng, N0, T):
    """Two bosons with onsite interaction, both starting on the core; K keeps
    configurations with both particles inside the core and rail prefixes."""
    n_core = int(rng.integers(3, 6))
    cut = N0 + int(round(2 * T * rng.uniform(0.4, 1.4))) + 1
    tail = 2
    n_rails = 2 if n_core + 2 * (cut + tail) <= 27 else 1
    cut = min(cut, 27 - n_core - tail)
    g, sub = _core_with_rails(rng, n_core, n_rails, cut, tail)
    model = InteractionModel.onsite(float(rng.uniform(-4, 4)))
    Hs = build_hamiltonian(g, 2, model, "boson")
    inside = sub[Hs.basis.states].all(axis=1)
    a = np.zeros(g.vertex_count, dtype=complex)
    b = np.zeros(g.vertex_count, dtype=complex)
    a[:n_core] = rng.normal(size=n_core) + 1j * rng.normal(size=n_core)
    b[:n_core] = rng.normal(size=n_core) + 1j * rng.normal(size=n_core)
    phi = product_and_symmetrize([a, b], "boson", Hs.basis).amplitudes
    return Hs.matrix.toarray(), inside, phi, "pair"


def truncation_trial(rng, trial_seed: int, coarse: bool = False, grid: int = 4001) -> ExperimentRecord:
    """One randomized check of the truncation bound against dense exponentials.

    ``gamma(t)`` is the part of ``e^{-iWt} Phi`` at hop distance >= N0 (or
    further, when ``coarse``) from the complement of K, so that
    ``(1 - P) H^r gamma = 0`` for r < N0 holds by construction.  ``delta`` is
    the grid maximum of ||eps|| plus ||W|| h / 2, which covers the gaps since
    d||eps||/dt <= ||W||.  Every grid time must satisfy measured <= bound.
    """
    t0 = time.perf_counter()
    pair = rng.random() < 0.4
    if pair:
        N0, T = int(rng.integers(2, 7)), float(rng.uniform(0.3, 2.5))
        H, inside, phi, kind = _pair_instance(rng, N0, T)
    else:
        N0, T = int(rng.integers(3, 17)), float(rng.uniform(1.0, 8.0))
        H, inside, phi, kind = _walk_instance(rng, N0, T)
    n = H.shape[0]
    P = inside.astype(float)
    Ht = H * np.outer(P, P)
    use_tilde = bool(rng.random() < 0.5)
    W = Ht if use_tilde else H
    h_norm = float(np.max(np.abs(np.linalg.eigvalsh(H))))
    w_norm = float(np.max(np.abs(np.linalg.eigvalsh(W))))
    extra = int(rng.integers(1, N0 + 1)) if coarse else 0
    dist = hop_distance(H, np.nonzero(~inside)[0])
    gamma_mask = dist >= N0 + extra
    ts = np.linspace(0.0, T, grid)

    def propagate(M):
        w, Q = np.linalg.eigh(M)
        c = Q.conj().T @ phi
        return (np.exp(-1j * np.outer(ts, w)) * c) @ Q.T

    full = propagate(H)
    trunc = propagate(Ht)
    evolved = trunc if use_tilde else full
    eps = np.linalg.norm(evolved[:, ~gamma_mask], axis=1)
    delta = float(eps.max() + w_norm * (ts[1] - ts[0]) / 2)
    measured = np.linalg.norm(full - trunc, axis=1)
    bounds = np.array([truncation_bound(h_norm, t, N0, delta) for t in ts])
    worst = int(np.argmax(measured / bounds))
    return ExperimentRecord(
        "truncation",
        {"instance": kind, "dimension": n, "N0": N0, "T": T, "W": "PHP" if use_tilde else "H",
         "coarse_extra": extra, "delta": delta, "h_norm": h_norm, "t_worst": float(ts[worst]),
         "bound_at_T": float(bounds[-1]), "all_grid_ok": bool((measured <= bounds).all())},
        {"discrepancy": float(measured[worst])},
        {"discrepancy": float(bounds[worst])},
        seconds=time.perf_counter() - t0, seed=trial_seed)


def verify_truncation_experiment(seed: int = 0, trials: int = 25, coarse: bool = False) -> TruncationReport:
    """Seeded randomized trials of the truncation bound; passes iff all pass."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    records = []
    for i in range(trials):
        trial_seed = seed * 1000 + i
        records.append(truncation_trial(np.random.default_rng(trial_seed), trial_seed, coarse))
    return TruncationReport(records, all(r.params["all_grid_ok"] for r in records))


# ---------------------------------------------------------------------------
# state dumps


def write_state(path, psi: StateVector, header: dict):
    """Magic, uint64 header length, JSON header, little-endian f64 re/im pairs."""
    head = dict(header)
    head.update({"schema_version": SCHEMA_VERSION, "dimension": int(len(psi.amplitudes)),
                 "dtype": "<f8", "layout": "interleaved re/im"})
    if psi.basis is not None:
        head.update({"basis": {"vertices": psi.basis.V, "particles": psi.basis.m,
                               "statistics": psi.basis.statistics, "order": "lexicographic"}})
    blob = json.dumps(head, sort_keys=True).encode()
    data = np.empty(2 * len(psi.amplitudes), dtype="<f8")
    data[0::2] = psi.amplitudes.real
    data[1::2] = psi.amplitudes.imag
    with open(path, "wb") as f:
        f.write(STATE_MAGIC)
        f.write(struct.pack("<Q", len(blob)))
        f.write(blob)
        f.write(data.tobytes())


def read_state(path) -> tuple[dict, np.ndarray]:
    with open(path, "rb") as f:
        if f.read(len(STATE_MAGIC)) != STATE_MAGIC:
            raise ValueError(f"{path} is not an mpqw state dump")
        (n,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(n).decode())
        data = np.frombuffer(f.read(), dtype="<f8")
    if len(data) != 2 * header["dimension"]:
        raise ValueError("state dump truncated")
    return header, data[0::2] + 1j * data[1::2]


# ---------------------------------------------------------------------------
# command line


class CheckFailed(Exception):
    pass


def _model(args) -> InteractionModel | None:
    if args.model == "none":
        return None
    if args.U is None:
        raise ValueError("--U is required with --model onsite or nn")
    if args.model == "onsite":
        return InteractionModel.onsite(args.U)
    return InteractionModel.nearest_neighbor(args.U)


def _emit(text: str, out):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _emit_records(records, args):
    text = records_to_csv(records, args.timing) if args.format == "csv" else records_to_json(records, args.timing)
    _emit(text, args.out)


def _cplx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _load_graph(path):
    with open(path) as f:
        d = json.load(f)
    if d.get("format") == "mpqw-layout":
        return compiler.CompiledLayout.from_dict(d).graph
    return graph_core.graph_from_dict(d)


def cmd_smatrix(args):
    g = graph_core.build_gadget(args.gadget) if args.gadget else _load_graph(args.graph)
    if not isinstance(g, graph_core.Gadget):
        raise ValueError("the graph file has no terminals")
    sol = scattering.s_matrix(g, args.momentum, args.method)
    split = args.split if args.split is not None else len(g.inputs)
    out = {"schema_version": SCHEMA_VERSION, "k": sol.k, "energy": sol.energy,
           "method": sol.method, "condition": sol.condition, "confined": sol.confined,
           "S": [[_cplx(z) for z in row] for row in sol.S]}
    if 0 < split < sol.S.shape[0]:
        bf = scattering.check_block_form(sol, split)
        out["block_form"] = {"split": split, "perfect_transmission": bf.is_perfect_transmission,
                             "reflection_norm": bf.reflection_norm,
                             "U": [[_cplx(z) for z in row] for row in bf.U]}
    _emit(json.dumps(out, indent=1), args.out)


def cmd_theta(args):
    model = _model(args)
    if model is None:
        raise ValueError("theta needs an interacting model")
    sol = two_particle.solve_two_particle(model, args.p1, args.p2)
    out = {"schema_version": SCHEMA_VERSION, "model": model.kind, "U": model.U,
           "p1": args.p1, "p2": args.p2, "R": _cplx(sol.R), "T": _cplx(sol.T),
           "theta_plus": sol.theta_plus, "theta_minus": sol.theta_minus,
           "exp_i_theta_plus": _cplx(sol.T + sol.R), "exp_i_theta_minus": _cplx(sol.T - sol.R)}
    if model.kind == "onsite":
        out["closed_form_exp_i_theta_plus"] = _cplx(two_particle.bose_hubbard_theta(model.U, args.p1, args.p2))
    _emit(json.dumps(out, indent=1), args.out)


def _theta_arg(args) -> float:
    if args.theta is not None:
        return args.theta
    model = _model(args)
    if model is None:
        return -math.pi / 2
    return two_particle.cd_phase(model, args.stats)


def cmd_compile(args):
    with open(args.circuit) as f:
        circ = compiler.CircuitIR.from_json(f.read())
    variant = "planar" if args.planar else "standard"
    layout = compiler.compile_circuit(circ, args.L, _theta_arg(args), variant)
    text = layout.to_json()
    if args.out:
        _emit(text, args.out)
    g1, g2 = layout.plan.counts()
    rep = graph_core.validate(layout.graph, check_planarity=args.planar)
    summary = {"vertices": layout.graph.vertex_count, "edges": len(layout.graph.edges),
               "blocks_I": g1, "blocks_II": g2, "total_time": layout.total_time,
               "max_degree": rep.max_degree, "is_planar": rep.is_planar if args.planar else None}
    sys.stdout.write(json.dumps(summary) + "\n" if args.out else "")


def _check_monotone(records, key):
    vals = [r.measured[key] for r in records]
    return all(b <= a for a, b in zip(vals, vals[1:]))


def cmd_gate_scan(args):
    recs = run_gate_scan(args.gate, args.L, args.k, tol=args.tol)
    _emit_records(recs, args)
    if args.require_monotone and not _check_monotone(recs, "error_norm"):
        raise CheckFailed("error_norm is not non-increasing in L")
    if args.min_fidelity is not None and recs[-1].measured["fidelity"] < args.min_fidelity:
        raise CheckFailed(f"fidelity {recs[-1].measured['fidelity']:.4f} < {args.min_fidelity}")


def cmd_cd_scan(args):
    model = _model(args)
    if model is None:
        raise ValueError("cd-scan needs an interacting model")
    recs = run_cd_scan(model, args.stats, args.L, args.tol)
    _emit_records(recs, args)
    if args.max_phase_error is not None and recs[-1].errors["phase"] > args.max_phase_error:
        raise CheckFailed(f"phase error {recs[-1].errors['phase']:.4f} > {args.max_phase_error}")


def _load_layout(path) -> compiler.CompiledLayout:
    with open(path) as f:
        return compiler.CompiledLayout.from_json(f.read())


def _bits(s):
    return None if s is None else [int(ch) for ch in s]


def cmd_run(args):
    layout = _load_layout(args.layout)
    circ = None
    if args.circuit:
        with open(args.circuit) as f:
            circ = compiler.decompose_to_native(compiler.CircuitIR.from_json(f.read()),
                                                _theta_arg(args), layout.plan.variant)
    out = run_circuit_sim(layout, _model(args), args.stats, args.tol, circuit=circ,
                          bits=_bits(args.bits), mediator_bits=_bits(args.mediator_bits),
                          theta=args.theta)
    _emit(json.dumps(out.to_dict(), indent=1, sort_keys=True), args.out)
    if args.min_fidelity is not None and out.fidelity < args.min_fidelity:
        raise CheckFailed(f"fidelity {out.fidelity:.4f} < {args.min_fidelity}")


def cmd_verify_truncation(args):
    rep = verify_truncation_experiment(args.seed, args.trials, args.coarse)
    _emit_records(rep.records, args)
    sys.stderr.write(f"truncation: {sum(r.params['all_grid_ok'] for r in rep.records)}/"
                     f"{len(rep.records)} trials within bound; max measured/bound = {rep.max_ratio:.3e}\n")
    if not rep.passed:
        raise CheckFailed("truncation bound violated")


def cmd_export_dot(args):
    if args.gadget:
        g = graph_core.build_gadget(args.gadget, dict(args.param or []))
    elif args.layout:
        g = _load_layout(args.layout).graph
    else:
        g = _load_graph(args.graph)
    _emit(graph_core.to_dot(g), args.out)


def cmd_evolve(args):
    layout = _load_layout(args.layout)
    model = _model(args)
    H, psi0, keep = prepare_circuit_state(layout, _bits(args.bits), _bits(args.mediator_bits),
                                          args.stats, model)
    t = layout.total_time if args.time is None else args.time
    psi, info = evolve(H, psi0, t, args.tol, return_info=True)
    write_state(args.out, psi, {"time": t, "tol": args.tol, "terms": info["terms"],
                                "truncation_bound": info["bound"], "graph_vertices": list(keep),
                                "model": None if model is None else [model.kind, model.U]})
    sys.stdout.write(json.dumps({"dimension": H.dimension, "time": t, "terms": info["terms"],
                                 "norm": psi.norm()}) + "\n")


def _param_pair(s):
    k, _, v = s.partition("=")
    if not v:
        raise argparse.ArgumentTypeError("expected key=value")
    return k, int(v)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpqw", description="Multi-particle quantum walk tools")
    sub = p.add_subparsers(dest="command", required=True)

    def model_opts(sp, default_model="onsite"):
        sp.add_argument("--model", choices=("onsite", "nn", "none"), default=default_model)
        sp.add_argument("--U", type=float, default=None)
        sp.add_argument("--stats", choices=("boson", "fermion", "dist"), default="boson")

    def out_opts(sp, records=False):
        sp.add_argument("--out", default=None)
        if records:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")
            sp.add_argument("--timing", action="store_true", help="add wall-clock seconds")

    sp = sub.add_parser("smatrix", help="S-matrix of a gadget at one momentum")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph")
    src.add_argument("--gadget", choices=[n for n in graph_core.GADGET_NAMES
                                          if n not in ("path", "cd_block", "planar_entangler")])
    sp.add_argument("--momentum", type=float, required=True)
    sp.add_argument("--method", choices=("gamma", "q"), default="gamma")
    sp.add_argument("--split", type=int, default=None)
    out_opts(sp)
    sp.set_defaults(func=cmd_smatrix)

    sp = sub.add_parser("theta", help="two-particle R, T and exchange phases")
    model_opts(sp)
    sp.add_argument("--p1", type=float, required=True)
    sp.add_argument("--p2", type=float, required=True)
    out_opts(sp)
    sp.set_defaults(func=cmd_theta)

    sp = sub.add_parser("compile", help="compile a circuit JSON into a layout JSON")
    sp.add_argument("--circuit", required=True)
    sp.add_argument("--L", type=int, required=True)
    sp.add_argument("--planar", action="store_true")
    sp.add_argument("--theta", type=float, default=None)
    model_opts(sp, "none")
    out_opts(sp)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("gate-scan", help="single-qubit transport scan over L")
    sp.add_argument("--gate", required=True)
    sp.add_argument("--L", type=int, nargs="+", required=True)
    sp.add_argument("--k", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--require-monotone", action="store_true")
    sp.add_argument("--min-fidelity", type=float, default=None)
    out_opts(sp, records=True)
    sp.set_defaults(func=cmd_gate_scan)

    sp = sub.add_parser("cd-scan", help="controlled-phase block scan over L")
    model_opts(sp)
    sp.add_argument("--L", type=int, nargs="+", required=True)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--max-phase-error", type=float, default=None)
    out_opts(sp, records=True)
    sp.set_defaults(func=cmd_cd_scan)

    sp = sub.add_parser("run", help="simulate a compiled layout end to end")
    sp.add_argument("--layout", required=True)
    sp.add_argument("--circuit", default=None)
    sp.add_argument("--bits", default=None)
    sp.add_argument("--mediator-bits", default=None)
    sp.add_argument("--theta", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--min-fidelity", type=float, default=None)
    model_opts(sp)
    out_opts(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("verify-truncation", help="randomized truncation-bound trials")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=25)
    sp.add_argument("--coarse", action="store_true")
    out_opts(sp, records=True)
    sp.set_defaults(func=cmd_verify_truncation)

    sp = sub.add_parser("export-dot", help="Graphviz DOT of a gadget, graph or layout")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph")
    src.add_argument("--layout")
    src.add_argument("--gadget")
    sp.add_argument("--param", type=_param_pair, action="append", help="gadget parameter key=value")
    out_opts(sp)
    sp.set_defaults(func=cmd_export_dot)

    sp = sub.add_parser("evolve", help="evolve an encoded input and dump the state")
    sp.add_argument("--layout", required=True)
    sp.add_argument("--time", type=float, default=None)
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--bits", default=None)
    sp.add_argument("--mediator-bits", default=None)
    sp.add_argument("--out", required=True)
    model_opts(sp)
    sp.set_defaults(func=cmd_evolve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.func(args)
    except CheckFailed as e:
        sys.stderr.write(f"check failed: {e}\n")
        return 1
    except (MPQWError, ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
