import itertools
import math

import numpy as np
import pytest
from scipy.sparse.csgraph import shortest_path
from hypothesis import given, settings, strategies as st

from mpqw import dynamics as dy
from mpqw import graph_core as gc
from mpqw import scattering as sc
from mpqw import two_particle as tp
from mpqw.errors import (DimensionTooLarge, GeometryMismatch, SupportOutOfRange,
                         ToleranceUnachievable, ZeroState)


def line(n):
    return gc.Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def random_graph(rng, n, p=0.35):
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return gc.Graph(n, tuple(edges))


@pytest.mark.parametrize("V, m, stat, dim", [
    (3, 2, "boson", 6), (3, 2, "fermion", 3), (4, 3, "distinguishable", 64),
    (5, 3, "boson", 35), (6, 3, "fermion", 20), (7, 1, "boson", 7),
])
def test_basis_dimensions(V, m, stat, dim):
    b = dy.enumerate_basis(V, m, stat)
    assert b.dimension == dim == dy.basis_dimension(V, m, stat)


@pytest.mark.parametrize("stat", ["boson", "fermion", "distinguishable"])
def test_basis_index_is_bijection(stat):
    for V, m in ((6, 2), (5, 3), (4, 4)):
        if stat == "fermion" and m > V:
            continue
        b = dy.enumerate_basis(V, m, stat)
        assert np.array_equal(b.index(b.states), np.arange(b.dimension))
        rows = [tuple(r) for r in b.states]
        assert rows == sorted(rows) and len(set(rows)) == b.dimension


def test_basis_cap_and_bad_statistics():
    with pytest.raises(DimensionTooLarge):
        dy.enumerate_basis(100, 3, "boson", cap=1000)
    with pytest.raises(ValueError):
        dy.enumerate_basis(4, 2, "anyon")


def test_single_particle_is_adjacency():
    G = gc.rails_graph(gc.build_gadget("phase_gate"), 5)
    H = dy.build_hamiltonian(G, 1, tp.InteractionModel.onsite(3.0), "boson")
    assert np.array_equal(H.matrix.toarray(), G.adjacency())


def test_bose_hubbard_two_sites():
    U = 1.7
    H = dy.build_hamiltonian(line(2), 2, tp.InteractionModel.onsite(U), "boson")
    r2 = math.sqrt(2)
    expected = np.array([[U, r2, 0], [r2, 0, r2], [0, r2, U]])
    assert np.abs(H.matrix.toarray() - expected).max() < 1e-15


def test_fermions_path3_nearest_neighbor():
    U = -2.5
    H = dy.build_hamiltonian(line(3), 2, tp.InteractionModel.nearest_neighbor(U), "fermion")
    # basis (0,1), (0,2), (1,2): only the first and last are adjacent pairs
    assert np.allclose(np.diag(H.matrix.toarray()), [U, 0, U])


def _distinguishable_two(G, model):
    A = G.adjacency()
    I = np.eye(G.vertex_count)
    H = np.kron(A, I) + np.kron(I, A)
    dist = shortest_path(A, unweighted=True)
    diag = np.array([model.V(int(dist[a, b])) if np.isfinite(dist[a, b]) else 0.0
                     for a in range(G.vertex_count) for b in range(G.vertex_count)])
    return H + np.diag(diag)


def _sector_isometry(V, statistics):
    # columns: (|ab> +- |ba>)/sqrt2 for a < b, and |aa> for bosons
    cols = []
    sign = 1 if statistics == "boson" else -1
    for a, b in itertools.combinations_with_replacement(range(V), 2):
        v = np.zeros(V * V)
        if a == b:
            if statistics == "fermion":
                continue
            v[a * V + a] = 1
        else:
            v[a * V + b] = 1 / math.sqrt(2)
            v[b * V + a] = sign / math.sqrt(2)
        cols.append(v)
    return np.array(cols).T


@pytest.mark.parametrize("statistics", ["boson", "fermion"])
def test_statistics_equivalence(statistics):
    rng = np.random.default_rng(5)
    for trial in range(12):
        V = int(rng.integers(3, 13))
        G = random_graph(rng, V)
        model = [tp.InteractionModel.onsite(rng.normal()),
                 tp.InteractionModel.nearest_neighbor(rng.normal()),
                 tp.InteractionModel.general(list(rng.normal(size=3)))][trial % 3]
        P = _sector_isometry(V, statistics)
        ref = P.T @ _distinguishable_two(G, model) @ P
        H = dy.build_hamiltonian(G, 2, model, statistics).matrix.toarray()
        assert np.abs(H - ref).max() < 1e-12


def test_distinguishable_matches_kron_sum():
    rng = np.random.default_rng(9)
    G = random_graph(rng, 7)
    model = tp.InteractionModel.nearest_neighbor(0.7)
    H = dy.build_hamiltonian(G, 2, model, "distinguishable").matrix.toarray()
    assert np.abs(H - _distinguishable_two(G, model)).max() < 1e-14


@pytest.mark.parametrize("stat", ["boson", "fermion", "distinguishable"])
def test_hamiltonian_hermitian_and_bounded(stat):
    rng = np.random.default_rng(2)
    G = random_graph(rng, 9)
    H = dy.build_hamiltonian(G, 3, tp.InteractionModel.onsite(2.0), stat)
    M = H.matrix.toarray()
    assert np.max(np.abs(M - M.conj().T)) == 0
    w = np.linalg.eigvalsh(M)
    lo, hi = H.spectrum_bounds
    assert lo <= w.min() + 1e-12 and w.max() <= hi + 1e-12
    assert H.matrix.indptr.dtype == np.int32


def test_sector_preservation():
    rng = np.random.default_rng(4)
    V = 30
    G = random_graph(rng, V, 0.12)
    model = tp.InteractionModel.onsite(1.3)
    Hd = dy.build_hamiltonian(G, 2, model, "distinguishable")
    phis = [rng.normal(size=V) + 1j * rng.normal(size=V) for _ in range(2)]
    psi = dy.product_and_symmetrize(phis, "boson")
    P = _sector_isometry(V, "boson")
    full = P @ psi.amplitudes
    out = dy.evolve(Hd, full, 2.5, tol=1e-12).amplitudes
    outside = out - P @ (P.T @ out)
    assert np.linalg.norm(outside) < 1e-10


def test_wave_packet_examples():
    rail = {("r", x): x - 1 for x in range(1, 11)}
    one = dy.wave_packet(dy.WavePacketSpec("r", 0, 1, -math.pi / 4), rail, 10)
    assert one.amplitudes[0] == pytest.approx(np.exp(1j * math.pi / 4))
    assert abs(abs(one.amplitudes[0]) - 1) < 1e-15
    four = dy.wave_packet(dy.WavePacketSpec("r", 2, 4, -math.pi / 4), rail, 10)
    x = np.arange(3, 7)
    assert np.allclose(four.amplitudes[2:6], 0.5 * np.exp(1j * math.pi * x / 4))
    assert not four.amplitudes[[0, 1, 6, 7, 8, 9]].any()
    assert four.norm() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(SupportOutOfRange):
        dy.wave_packet(dy.WavePacketSpec("r", 8, 4, -math.pi / 4), rail, 10)
    with pytest.raises(ValueError):
        dy.WavePacketSpec("r", 0, 0, 0.1)


def test_product_and_symmetrize_examples():
    V = 5
    a, b = np.eye(V)[1], np.eye(V)[3]
    psi = dy.product_and_symmetrize([a, b], "boson")
    idx = psi.basis.index([1, 3])
    assert abs(psi.amplitudes[idx] - 1) < 1e-15
    # in the occupation basis (|13> + |31>)/sqrt2 is the single state |1,3>
    assert np.count_nonzero(psi.amplitudes) == 1
    with pytest.raises(ZeroState):
        dy.product_and_symmetrize([a, a], "fermion")
    double = dy.product_and_symmetrize([a, a], "boson")
    assert abs(double.amplitudes[double.basis.index([1, 1])] - 1) < 1e-15
    dist = dy.product_and_symmetrize([a, b], "distinguishable")
    assert dist.amplitudes[dist.basis.index([1, 3])] == 1
    assert dist.amplitudes[dist.basis.index([3, 1])] == 0


def test_fermion_sign_convention():
    V = 4
    a = np.array([1, 2, 0, 0], dtype=complex)
    b = np.array([0, 1, 0, 3], dtype=complex)
    psi = dy.product_and_symmetrize([a, b], "fermion")
    P = _sector_isometry(V, "fermion")
    direct = np.kron(a, b) - np.kron(b, a)
    direct /= np.linalg.norm(direct)
    assert np.allclose(P @ psi.amplitudes, direct)


def test_evolve_two_vertex_path():
    H = dy.build_hamiltonian(line(2), 1, None, "boson")
    out = dy.evolve(H, np.array([1, 0], dtype=complex), math.pi / 2)
    assert abs(abs(out.amplitudes[1]) - 1) < 1e-10
    t = 0.37
    out = dy.evolve(H, np.array([1, 0], dtype=complex), t)
    assert np.allclose(out.amplitudes, [math.cos(t), -1j * math.sin(t)], atol=1e-10)


def test_evolve_zero_time_and_errors():
    H = dy.build_hamiltonian(line(4), 1, None, "boson")
    v = np.array([0.6, 0, 0.8j, 0])
    assert np.array_equal(dy.evolve(H, v, 0.0).amplitudes, v)
    with pytest.raises(ValueError):
        dy.evolve(H, v, -1.0)
    with pytest.raises(ValueError):
        dy.evolve(H, v, 1.0, tol=1e-16)
    with pytest.raises(ToleranceUnachievable):
        dy.evolve(H, v, 1e4, max_terms=100)


def test_evolve_matches_dense_and_conserves_norm():
    rng = np.random.default_rng(8)
    for trial in range(10):
        V = int(rng.integers(4, 14))
        G = random_graph(rng, V, 0.4)
        stat = ["boson", "fermion", "distinguishable"][trial % 3]
        H = dy.build_hamiltonian(G, 2, tp.InteractionModel.onsite(rng.normal() * 3), stat)
        v = rng.normal(size=H.dimension) + 1j * rng.normal(size=H.dimension)
        v /= np.linalg.norm(v)
        for t in (0.3, 4.0):
            tol = 1e-10
            out = dy.evolve(H, v, t, tol=tol).amplitudes
            assert np.linalg.norm(out - dy.dense_evolve(H, v, t)) <= tol
            assert abs(np.linalg.norm(out) - 1) <= 10 * tol


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 50.0), st.sampled_from([1e-6, 1e-9, 1e-12]))
def test_chebyshev_tail_bound_is_certified(x, tol):
    # sum of the dropped coefficients bounds the error on the rescaled spectrum
    coef, tail = dy.chebyshev_terms(x, tol, 10_000)
    assert tail <= tol
    y = np.linspace(-1, 1, 201)
    T = np.cos(np.outer(np.arange(len(coef)), np.arccos(y)))
    approx = coef @ T
    assert np.max(np.abs(approx - np.exp(-1j * x * y))) <= tol + 1e-13


def test_evolve_info_reports_terms():
    H = dy.build_hamiltonian(line(10), 1, None, "boson")
    v = np.eye(10)[0].astype(complex)
    _, info = dy.evolve(H, v, 3.0, return_info=True)
    assert info["terms"] > 0 and info["bound"] <= 5e-11


def test_predicted_single_alpha_at_zero_is_packet():
    g = gc.build_gadget("phase_gate")
    K, M, L = 30, 5, 12
    G = gc.rails_graph(g, K)
    idx = G.label_index()
    sol = sc.s_matrix(g, -math.pi / 4)
    spec = dy.WavePacketSpec(0, M, L, -math.pi / 4)
    packet = dy.wave_packet(spec, idx, G.vertex_count)
    alpha = dy.predicted_single_alpha(sol.S, spec, 0.0, idx, G.vertex_count)
    assert np.abs(alpha.amplitudes - packet.amplitudes).max() < 1e-15


def test_predicted_single_alpha_after_scattering():
    g = gc.build_gadget("phase_gate")
    K, M, L = 60, 5, 12
    G = gc.rails_graph(g, K)
    idx = G.label_index()
    sol = sc.s_matrix(g, -math.pi / 4)
    spec = dy.WavePacketSpec(0, M, L, -math.pi / 4)
    alpha = dy.predicted_single_alpha(sol.S, spec, 30.0, idx, G.vertex_count).amplitudes
    rail = lambda q: np.array([alpha[idx[(q, x)]] for x in range(1, K + 1)])
    assert not rail(0).any() and not rail(1).any() and not rail(3).any()
    out = rail(2)
    nz = np.nonzero(out)[0]
    assert len(nz) == L
    x = nz + 1
    ratio = out[nz] / (np.exp(1j * -math.pi / 4 * x) / math.sqrt(L))
    # a single global phase times S_20 = e^{-i pi/4}
    assert np.allclose(ratio / ratio[0], 1)
    assert abs(abs(ratio[0]) - abs(sol.S[2, 0])) < 1e-12


def _collision_setup(L, M, statistics="boson", model=None):
    half = 2 * (M + L) + L // 2
    n = 2 * half + 1
    pos = {x: x + half for x in range(-half, half + 1)}
    rail = {("line", x): v for x, v in pos.items()}
    specs = dy.collision_specs(M, L)
    model = model or tp.InteractionModel.onsite(2 + math.sqrt(2))
    H = dy.build_hamiltonian(line(n), 2, model, statistics)
    packets = [dy.wave_packet(s, rail, n) for s in specs]
    psi0 = dy.product_and_symmetrize(packets, statistics, H.basis)
    return H, psi0, specs, pos, model


@pytest.mark.parametrize("statistics", ["boson", "fermion"])
def test_predicted_two_alpha_at_zero(statistics):
    H, psi0, specs, pos, _ = _collision_setup(8, 3, statistics)
    alpha = dy.predicted_two_alpha(specs, 0.7, 0.0, statistics, pos, H.basis)
    assert np.abs(alpha.amplitudes - psi0.amplitudes).max() < 1e-14


def test_predicted_two_alpha_after_collision_carries_phase():
    H, _, specs, pos, _ = _collision_setup(12, 3)
    t = 3 * dy.collision_time(3, 12)
    a = dy.predicted_two_alpha(specs, 1.1, t, "boson", pos, H.basis).amplitudes
    b = dy.predicted_two_alpha(specs, 0.0, t, "boson", pos, H.basis).amplitudes
    assert np.abs(a - np.exp(1.1j) * b).max() < 1e-14


def test_predicted_two_alpha_geometry_checks():
    H, _, specs, pos, _ = _collision_setup(8, 3)
    bad = (specs[0], dy.WavePacketSpec("line", 3, 8, math.pi / 3, sign=1))
    with pytest.raises(GeometryMismatch):
        dy.predicted_two_alpha(bad, 0.0, 1.0, "boson", pos, H.basis)
    with pytest.raises(GeometryMismatch):
        dy.predicted_two_alpha(specs, 0.0, 1.0, "distinguishable", pos, H.basis)


def test_two_alpha_norm_is_one_plus_order_inverse_length():
    devs = []
    for L in (16, 32, 64):
        M = L // 4
        half = 2 * (M + L) + L
        pos = {x: x + half for x in range(-half, half + 1)}
        B = dy.enumerate_basis(2 * half + 1, 2, "boson")
        specs = dy.collision_specs(M, L)
        t0 = dy.collision_time(M, L)
        dev = max(abs(dy.predicted_two_alpha(specs, -math.pi / 2, t, "boson", pos, B).norm() ** 2 - 1)
                  for t in np.linspace(0, 2 * t0, 41))
        devs.append(dev)
        assert dev * L <= 0.5
    assert devs[0] > devs[1] > devs[2]


def test_collision_on_line_approaches_predicted_phase():
    # onsite bosons on a line: the simulated pair approaches the prediction as L grows
    errors, phases = [], []
    for L in (16, 32, 64):
        M = L // 4
        H, psi0, specs, pos, model = _collision_setup(L, M)
        t = dy.collision_time(M, L)
        psi = dy.evolve(H, psi0, t).amplitudes
        theta = tp.cd_phase(model, "boson")
        alpha = dy.predicted_two_alpha(specs, theta, t, "boson", pos, H.basis).amplitudes
        free = dy.predicted_two_alpha(specs, 0.0, t, "boson", pos, H.basis).amplitudes
        errors.append(np.linalg.norm(alpha - psi))
        phases.append(abs(np.angle(np.vdot(free, psi)) - theta))
    assert errors[0] > errors[1] > errors[2]
    assert phases[0] > phases[1] > phases[2]
    assert phases[2] < 0.1


def test_collision_time_definition():
    for M, L in ((0, 1), (3, 8), (5, 20)):
        t = dy.collision_time(M, L)
        target = 2 * M + 2 * L + 1
        assert 2 * (math.floor(t / math.sqrt(2)) + math.floor(t)) >= target
        assert 2 * (math.floor((t - 1e-9) / math.sqrt(2)) + math.floor(t - 1e-9)) < target


def test_truncation_bound_examples():
    for N0 in (1, 4, 10):
        assert dy.truncation_bound(3.0, 0.0, N0, 0.0) == pytest.approx(2 * 2.0 ** -N0, rel=1e-15)
        assert dy.truncation_bound(2.0, N0 / 2.0, N0, 0.0) == pytest.approx(
            (4 * math.e + 2) * 2.0 ** -N0, rel=1e-15)
    with pytest.raises(ValueError):
        dy.truncation_bound(1.0, 1.0, 0, 0.0)
    with pytest.raises(ValueError):
        dy.truncation_bound(1.0, -1.0, 3, 0.0)
