import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpqw import graph_core as gc
from mpqw import scattering as sc
from mpqw.errors import InvalidMomentum, SingularAtMomentum

K4, K2 = -math.pi / 4, -math.pi / 2
W4 = cmath.exp(-1j * math.pi / 4)


def block(name, k, split=2):
    return sc.check_block_form(sc.s_matrix(gc.build_gadget(name), k), split)


def test_partition_path3():
    g = gc.Gadget(gc.Graph(3, ((0, 1), (1, 2))), (0,), (2,))
    blk = sc.partition_adjacency(g)
    assert np.array_equal(blk.A, np.zeros((2, 2)))
    assert np.array_equal(blk.B.ravel(), [1, 1])
    assert np.array_equal(blk.D, [[0]])


def test_partition_identity_edge():
    blk = sc.partition_adjacency(gc.build_gadget("identity_edge"))
    assert np.array_equal(blk.A, [[0, 1], [1, 0]])
    assert blk.B.size == 0 and blk.D.size == 0


def test_partition_switch_sizes():
    blk = sc.partition_adjacency(gc.build_gadget("momentum_switch"))
    assert blk.n_terminals == 3 and blk.n_interior == 10
    H = np.block([[blk.A, blk.B.conj().T], [blk.B, blk.D]])
    assert np.array_equal(H, H.T)
    assert H.sum() == 2 * len(gc.MOMENTUM_SWITCH_EDGES)


def test_phase_gate_matrix():
    r = block("phase_gate", K4)
    assert r.is_perfect_transmission
    assert np.abs(r.U - np.diag([W4, 1])).max() < 1e-9


def test_basis_change_matrix():
    r = block("basis_change", K4)
    assert r.is_perfect_transmission
    assert np.abs(r.U + 1j / math.sqrt(2) * np.array([[1, -1j], [-1j, 1]])).max() < 1e-9


def test_hadamard_matrices():
    had = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    r = block("hadamard_k2", K2)
    assert r.is_perfect_transmission
    assert np.abs(r.U + cmath.exp(1j * math.pi / 4) * had).max() < 1e-9
    r = block("hadamard_planar", K2)
    assert r.is_perfect_transmission
    assert np.abs(r.U - cmath.exp(-3j * math.pi / 4) * had).max() < 1e-9


def test_switch_matrices():
    g = gc.build_gadget("momentum_switch")
    S4 = np.array([[0, 0, W4], [0, -1, 0], [W4, 0, 0]])
    S2 = np.array([[1, 0, 0], [0, 0, -1], [0, -1, 0]])
    assert np.abs(sc.s_matrix(g, K4).S - S4).max() < 1e-9
    assert np.abs(sc.s_matrix(g, K2).S - S2).max() < 1e-9


def test_identity_edge_transmits_with_phase():
    # the edge joins the rails into one line; an incoming e^{-ikx} continues as e^{-ik} e^{ikx}
    g = gc.build_gadget("identity_edge")
    for k in np.linspace(-3.0, -0.1, 9):
        S = sc.s_matrix(g, k).S
        assert abs(S[0, 0]) < 1e-12
        assert abs(S[1, 0] - cmath.exp(-1j * k)) < 1e-12


def test_identity_edge_state_amplitudes():
    k = -0.7
    sol = sc.s_matrix(gc.build_gadget("identity_edge"), k)
    amp = sc.scattering_state_amplitudes(sol, 0, 2)["rails"]
    x = np.arange(1, 3)
    assert np.allclose(amp[0], np.exp(-1j * k * x))
    assert np.allclose(amp[1], cmath.exp(-1j * k) * np.exp(1j * k * x))


def test_phase_gate_outgoing_factor():
    sol = sc.s_matrix(gc.build_gadget("phase_gate"), K4)
    amp = sc.scattering_state_amplitudes(sol, 0, 5)["rails"]
    x = np.arange(1, 6)
    assert np.allclose(amp[2], W4 * np.exp(1j * K4 * x), atol=1e-9)
    assert np.allclose(amp[3], 0, atol=1e-9)


@pytest.mark.parametrize("name", ["phase_gate", "basis_change", "hadamard_k2",
                                  "momentum_switch", "hadamard_planar"])
def test_eigen_residual_library(name):
    g = gc.build_gadget(name)
    for k in (K4, K2, -1.1, -2.3):
        try:
            sol = sc.s_matrix(g, k)
        except SingularAtMomentum:
            continue
        for j in range(len(g.terminals)):
            assert sc.eigen_residual(g, sol, j) < 1e-10


def _random_gadget(rng, n, n_term):
    while True:
        p = rng.uniform(0.25, 0.6)
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        G = gc.Graph(n, tuple(edges))
        if len(gc.components_containing(G, [0])) == n:
            terms = rng.permutation(n)[:n_term]
            half = n_term // 2
            return gc.Gadget(G, tuple(terms[:half]), tuple(terms[half:]))


def _random_sample(count=100, momenta=20, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(rng.integers(2, 13))
        g = _random_gadget(rng, n, int(rng.integers(2, min(n, 6) + 1)))
        yield g, rng.uniform(-math.pi + 1e-3, -1e-3, size=momenta)


def test_unitarity_reciprocity_and_method_agreement():
    worst_u = worst_r = worst_m = 0.0
    solved = compared = 0
    for g, ks in _random_sample():
        for k in ks:
            try:
                a = sc.s_matrix(g, k, "gamma")
            except SingularAtMomentum:
                continue
            S = a.S
            worst_u = max(worst_u, np.abs(S.conj().T @ S - np.eye(len(S))).max())
            worst_r = max(worst_r, np.abs(S - S.T).max())
            solved += 1
            try:
                b = sc.s_matrix(g, k, "q_form")
            except SingularAtMomentum:
                continue
            if a.confined:
                continue
            worst_m = max(worst_m, np.abs(S - b.S).max())
            compared += 1
    assert solved > 1500 and compared > 1000
    assert worst_u < 1e-9
    assert worst_r < 1e-9
    assert worst_m < 1e-9


def test_hermitian_weighted_matrix():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    H = H + H.conj().T
    blk = sc.blocks_from_matrix(H, 3)
    for k in (-0.4, -1.3, -2.7):
        S = sc.s_matrix(blk, k).S
        assert np.abs(S.conj().T @ S - np.eye(3)).max() < 1e-9
        assert np.abs(S - sc.s_matrix(blk, k, "q_form").S).max() < 1e-9


def test_product_rule():
    a, b = gc.build_gadget("phase_gate"), gc.build_gadget("basis_change")
    ua, ub = block("phase_gate", K4).U, block("basis_change", K4).U
    r = sc.check_block_form(sc.s_matrix(gc.concatenate(a, b), K4), 2)
    assert r.is_perfect_transmission
    # each gluing shares one terminal, which adds two lattice steps of phase
    assert np.abs(r.U - cmath.exp(2j * K4) * ub @ ua).max() < 1e-8


def test_phase_gate_eighth_power():
    g = gc.build_gadget("phase_gate")
    c = g
    for _ in range(7):
        c = gc.concatenate(c, g)
    U = sc.check_block_form(sc.s_matrix(c, K4), 2).U
    phase = U[0, 0] / abs(U[0, 0])
    assert np.abs(U - phase * np.eye(2)).max() < 1e-8
    # (U_phase)^8 is the identity, seven gluings contribute e^{14ik}
    assert abs(phase - cmath.exp(14j * K4)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from(["phase_gate", "basis_change"]), min_size=1, max_size=4))
def test_product_rule_chains(names):
    gad = gc.build_gadget(names[0])
    U = block(names[0], K4).U
    for n in names[1:]:
        gad = gc.concatenate(gad, gc.build_gadget(n))
        U = cmath.exp(2j * K4) * block(n, K4).U @ U
    r = sc.check_block_form(sc.s_matrix(gad, K4), 2)
    assert r.is_perfect_transmission
    assert np.abs(r.U - U).max() < 1e-8


def test_interior_amplitudes_bounded_over_sweep():
    for name in ("phase_gate", "basis_change", "hadamard_k2", "momentum_switch"):
        g = gc.build_gadget(name)
        peak = 0.0
        for k in np.linspace(-math.pi + 0.05, -0.05, 60):
            try:
                peak = max(peak, np.abs(sc.s_matrix(g, k).Psi).max())
            except SingularAtMomentum:
                continue
        assert peak < 1e3


def test_block_form_detects_reflection():
    r = block("momentum_switch", K4, split=1)
    assert not r.is_perfect_transmission
    assert r.reflection_norm > 0.5
    with pytest.raises(ValueError):
        sc.check_block_form(sc.s_matrix(gc.build_gadget("phase_gate"), K4), 0)


def test_invalid_momentum_and_method():
    g = gc.build_gadget("phase_gate")
    for k in (0.0, 0.3, -math.pi, 1.0):
        with pytest.raises(InvalidMomentum):
            sc.s_matrix(g, k)
    with pytest.raises(ValueError):
        sc.s_matrix(g, K4, method="other")
    with pytest.raises(IndexError):
        sc.scattering_state_amplitudes(sc.s_matrix(g, K4), 4, 3)


def test_switch_confined_state_is_flagged():
    # the switch has an interior-confined eigenvector at energy 0
    sol = sc.s_matrix(gc.build_gadget("momentum_switch"), K2)
    assert sol.confined
    with pytest.raises(SingularAtMomentum):
        sc.s_matrix(gc.build_gadget("momentum_switch"), K2, method="q_form")
