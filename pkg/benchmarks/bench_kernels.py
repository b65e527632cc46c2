"""Compare the compiled kernels with the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import timeit

import numpy as np

from mpqw import kernels
from mpqw import graph_core as gc
from mpqw.dynamics import StateVector, build_hamiltonian, enumerate_basis, evolve
from mpqw.two_particle import InteractionModel


def line_with_gadget(L):
    """Phase gadget on rails of length L: a sparse, walk-like test graph."""
    return gc.rails_graph(gc.build_gadget("phase_gate"), L)


def bench(label, fn, repeat):
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    return label, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--L", type=int, default=60)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "compiled":
        print("compiled extension unavailable; only the fallback is timed")
    g = line_with_gadget(args.L)
    model = InteractionModel.onsite(2 + math.sqrt(2))
    basis = enumerate_basis(g.vertex_count, 2, "boson")
    nbrs = g.neighbors()
    ptr = np.zeros(g.vertex_count + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(x) for x in nbrs])
    idx = np.array([v for x in nbrs for v in x], dtype=np.int64)
    H = build_hamiltonian(g, 2, model, "boson", basis=basis)
    psi = np.zeros(H.dimension, complex)
    psi[0] = 1
    print(f"graph: {g.vertex_count} vertices, two-boson dimension {basis.dimension}")
    backends = ["python"] + (["compiled"] if kernels.BACKEND == "compiled" else [])
    rows = []
    for b in backends:
        k = kernels.get(b)
        rows.append((b,) + bench("rank_states", lambda: k.rank_states(
            basis.states, basis.code, basis.V, basis.binom), args.repeat))
        rows.append((b,) + bench("hop_entries", lambda: k.hop_entries(
            basis.states, ptr, idx, basis.code, basis.V, basis.binom), args.repeat))
        rows.append((b,) + bench("build_hamiltonian", lambda: build_hamiltonian(
            g, 2, model, "boson", basis=basis, backend=b), args.repeat))
        rows.append((b,) + bench("evolve t=20", lambda: evolve(
            H, StateVector(basis, psi), 20.0, 1e-10, backend=b), args.repeat))
    times = {(b, lab): t for b, lab, t in rows}
    print(f"{'kernel':<20}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}")
    for lab in dict.fromkeys(lab for _, lab, _ in rows):
        tp = times[("python", lab)]
        tc = times.get(("compiled", lab))
        extra = f"{tc:>14.4f}{tp / tc:>10.1f}" if tc else f"{'-':>14}{'-':>10}"
        print(f"{lab:<20}{tp:>12.4f}{extra}")


if __name__ == "__main__":
    main()
