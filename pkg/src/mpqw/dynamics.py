"""Many-body quantum walk Hamiltonians, wave packets and time evolution.

Occupation-basis derivation
---------------------------
For bosons the first-quantized Hamiltonian is restricted to the symmetric
subspace.  A normalized symmetric state with occupations ``n`` is
``|n> = sqrt(prod n_v! / m!) * sum over distinct orderings``.  Moving one
particle from ``i`` to a neighbour ``j`` connects ``|n>`` to ``|n'>``
(``n'_i = n_i - 1``, ``n'_j = n_j + 1``) with amplitude
``sqrt(n_i (n_j + 1))``, i.e. the matrix element of ``a_j^dagger a_i``.
For fermions the antisymmetric restriction gives ``c_j^dagger c_i`` whose
sign is ``(-1)`` to the number of particles strictly between ``i`` and
``j`` in the ordered tuple.  The interaction is a sum over particle pairs
of ``V(dist)``, which reproduces ``(U/2) n_v (n_v - 1)`` onsite and
``U n_i n_j`` on edges.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import jv, gammaln

from . import kernels
from .errors import (DimensionTooLarge, GeometryMismatch, SupportOutOfRange,
                     ToleranceUnachievable, ZeroState)
from .graph_core import Graph
from .two_particle import InteractionModel

DEFAULT_CAP = 20_000_000
STATISTICS = ("boson", "fermion", "distinguishable")
_CODES = {"distinguishable": kernels.DIST, "dist": kernels.DIST,
          "boson": kernels.BOSON, "fermion": kernels.FERMION}


def _stat(statistics: str) -> str:
    if statistics == "dist":
        return "distinguishable"
    if statistics not in STATISTICS:
        raise ValueError(f"unknown statistics {statistics!r}")
    return statistics


def basis_dimension(V: int, m: int, statistics: str) -> int:
    statistics = _stat(statistics)
    if statistics == "distinguishable":
        return V ** m
    if statistics == "boson":
        return math.comb(V + m - 1, m)
    return math.comb(V, m)


def _binom_table(N: int, m: int) -> np.ndarray:
    t = np.zeros((N + 2, m + 1), dtype=np.int64)
    for n in range(N + 2):
        for r in range(m + 1):
            t[n, r] = math.comb(n, r) if n >= 0 else 0
    return t


@dataclass(frozen=True)
class ConfigurationBasis:
    """Enumerated m-particle configurations on V sites, in lexicographic order.

    ``states[a]`` is the tuple of particle positions: sorted with repetition
    for bosons, strictly increasing for fermions, unrestricted for
    distinguishable particles.
    """

    V: int
    m: int
    statistics: str
    states: np.ndarray = field(repr=False)
    binom: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.states.shape[0]

    @property
    def code(self) -> int:
        return _CODES[self.statistics]

    def index(self, config) -> int | np.ndarray:
        """Ordinal of a configuration (or array of configurations) in the basis."""
        arr = np.atleast_2d(np.asarray(config, dtype=np.int64))
        if self.statistics != "distinguishable":
            arr = np.sort(arr, axis=1)
        r = kernels.get().rank_states(arr, self.code, self.V, self.binom)
        return int(r[0]) if np.ndim(config) == 1 else r

    def occupations(self) -> np.ndarray:
        """Occupation numbers, shape (dimension, V)."""
        occ = np.zeros((self.dimension, self.V), dtype=np.int64)
        for w in range(self.m):
            np.add.at(occ, (np.arange(self.dimension), self.states[:, w]), 1)
        return occ

    def weights(self) -> np.ndarray:
        """Normalization sqrt(prod n_v!) of each occupation state."""
        if self.statistics != "boson":
            return np.ones(self.dimension)
        w = np.zeros(self.dimension)
        states = self.states
        for a in range(self.m):
            run = np.ones(self.dimension)
            for b in range(a):
                run += states[:, b] == states[:, a]
            w += np.log(run)
        return np.exp(w / 2)


def enumerate_basis(V: int, m: int, statistics: str, cap: int = DEFAULT_CAP) -> ConfigurationBasis:
    """Deterministic lexicographic basis; raises DimensionTooLarge above ``cap``."""
    statistics = _stat(statistics)
    if V < 1 or m < 1:
        raise ValueError("need V >= 1 and m >= 1")
    dim = basis_dimension(V, m, statistics)
    if dim > cap:
        raise DimensionTooLarge(dim, cap)
    if statistics == "distinguishable":
        grids = np.indices((V,) * m).reshape(m, -1).T
        states = np.ascontiguousarray(grids, dtype=np.int64)
    elif m == 1:
        states = np.arange(V, dtype=np.int64)[:, None]
    elif m == 2:
        k = 0 if statistics == "boson" else 1
        a, b = np.triu_indices(V, k)
        states = np.stack([a, b], axis=1).astype(np.int64)
    else:
        it = (itertools.combinations_with_replacement(range(V), m) if statistics == "boson"
              else itertools.combinations(range(V), m))
        states = np.array(list(it), dtype=np.int64).reshape(-1, m)
    N = V + m - 1 if statistics == "boson" else V
    return ConfigurationBasis(V, m, statistics, states, _binom_table(N, m))


@dataclass(frozen=True)
class SparseHamiltonian:
    """Real symmetric CSR matrix with spectral bounds.

    ``spectrum_bounds`` is a Gershgorin interval containing every eigenvalue;
    ``norm_bound`` = max |endpoint|.
    """

    matrix: sp.csr_matrix
    basis: ConfigurationBasis | None
    spectrum_bounds: tuple

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def norm_bound(self) -> float:
        return float(max(abs(self.spectrum_bounds[0]), abs(self.spectrum_bounds[1])))

    def hermiticity_defect(self) -> float:
        d = (self.matrix - self.matrix.conj().T)
        return float(abs(d).max()) if d.nnz else 0.0


def gershgorin_bounds(mat: sp.spmatrix) -> tuple[float, float]:
    mat = sp.csr_matrix(mat)
    diag = mat.diagonal().real
    radius = np.asarray(abs(mat).sum(axis=1)).ravel() - np.abs(diag)
    if mat.shape[0] == 0:
        return (0.0, 0.0)
    return float(np.min(diag - radius)), float(np.max(diag + radius))


def wrap_matrix(mat, basis=None) -> SparseHamiltonian:
    """SparseHamiltonian from any Hermitian matrix (dense or sparse)."""
    m = sp.csr_matrix(mat)
    if not np.iscomplexobj(m.data) or np.all(m.data.imag == 0):
        m = sp.csr_matrix(m.real.astype(np.float64))
    m.sort_indices()
    return SparseHamiltonian(m, basis, gershgorin_bounds(m))


def _distance_lookup(graph: Graph, C: int):
    """Sparse matrix holding dist+1 for vertex pairs at distance 1..C."""
    A = graph.adjacency_sparse().astype(bool).tocsr()
    n = graph.vertex_count
    seen = sp.identity(n, dtype=bool, format="csr")
    frontier = seen
    out = sp.csr_matrix((n, n), dtype=np.int64)
    for r in range(1, C + 1):
        nxt = (frontier @ A).astype(bool)
        nxt = nxt - nxt.multiply(seen)
        nxt.eliminate_zeros()
        out = out + nxt.astype(np.int64) * (r + 1)
        seen = (seen + nxt).astype(bool)
        frontier = nxt
    return out.tocsr()


def interaction_diagonal(basis: ConfigurationBasis, graph: Graph, model: InteractionModel | None):
    """Sum over particle pairs of V(graph distance)."""
    diag = np.zeros(basis.dimension)
    if model is None or basis.m < 2:
        return diag
    C = model.range
    table = _distance_lookup(graph, C) if C > 0 else None
    prof = np.array([model.V(r) for r in range(C + 1)])
    st = basis.states
    for a in range(basis.m):
        for b in range(a + 1, basis.m):
            x, y = st[:, a], st[:, b]
            same = x == y
            diag += np.where(same, prof[0], 0.0)
            if C > 0:
                d = np.asarray(table[x, y]).ravel()
                hit = d > 0
                diag[hit] += prof[d[hit] - 1]
    return diag


def build_hamiltonian(graph: Graph, m: int, model: InteractionModel | None,
                      statistics: str, cap: int = DEFAULT_CAP, backend=None,
                      basis: ConfigurationBasis | None = None) -> SparseHamiltonian:
    """Many-body walk Hamiltonian in the configuration basis.

    For ``m = 1`` the result is the adjacency matrix.  ``model=None`` gives
    free particles.
    """
    statistics = _stat(statistics)
    if basis is None:
        basis = enumerate_basis(graph.vertex_count, m, statistics, cap)
    nbrs = graph.neighbors()
    ptr = np.zeros(graph.vertex_count + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(x) for x in nbrs])
    idx = np.array([v for x in nbrs for v in x], dtype=np.int64)
    k = kernels.get(backend)
    rows, cols, vals = k.hop_entries(basis.states, ptr, idx, basis.code, basis.V, basis.binom)
    diag = interaction_diagonal(basis, graph, model)
    nz = np.nonzero(diag)[0]
    rows = np.concatenate([rows, nz])
    cols = np.concatenate([cols, nz])
    vals = np.concatenate([vals, diag[nz]])
    dim = basis.dimension
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    mat.sum_duplicates()
    mat.sort_indices()
    mat.indptr = mat.indptr.astype(np.int32)
    mat.indices = mat.indices.astype(np.int32)
    return SparseHamiltonian(mat, basis, gershgorin_bounds(mat))


# ---------------------------------------------------------------------------
# states


@dataclass
class StateVector:
    basis: ConfigurationBasis | None
    amplitudes: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def copy(self) -> "StateVector":
        return StateVector(self.basis, self.amplitudes.copy())


@dataclass(frozen=True)
class WavePacketSpec:
    """Square packet of ``length`` sites at positions offset+1 .. offset+length.

    Amplitude ``length^{-1/2} exp(sign * i * momentum * x)`` on rail
    ``rail``.  ``sign = -1`` is the incoming convention used on gadget rails
    whose coordinate grows away from the gadget.
    """

    rail: object
    offset: int
    length: int
    momentum: float
    sign: int = -1

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("packet length must be >= 1")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def positions(self) -> np.ndarray:
        return np.arange(self.offset + 1, self.offset + self.length + 1)

    def values(self) -> np.ndarray:
        x = self.positions()
        return np.exp(self.sign * 1j * self.momentum * x) / np.sqrt(self.length)


def wave_packet(spec: WavePacketSpec, rail_map, n_vertices: int) -> StateVector:
    """Single-particle packet; ``rail_map[(rail, x)]`` gives the vertex."""
    amp = np.zeros(n_vertices, dtype=complex)
    for x, val in zip(spec.positions(), spec.values()):
        key = (spec.rail, int(x))
        if key not in rail_map:
            raise SupportOutOfRange(f"position {key} is not on the rail")
        amp[rail_map[key]] = val
    return StateVector(None, amp)


def _perm_sign(p):
    sign, seen = 1, list(p)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def product_and_symmetrize(packets, statistics: str, basis: ConfigurationBasis | None = None,
                           cap: int = DEFAULT_CAP) -> StateVector:
    """Normalized (anti)symmetrized product of single-particle states.

    The occupation amplitude of configuration ``s`` is
    ``sqrt(m!/prod n!) * (1/m!) * perm_or_det[phi_u(s_w)]`` before the final
    normalization.
    """
    statistics = _stat(statistics)
    phis = [p.amplitudes if isinstance(p, StateVector) else np.asarray(p) for p in packets]
    m, V = len(phis), len(phis[0])
    if basis is None:
        basis = enumerate_basis(V, m, statistics, cap)
    st = basis.states
    if statistics == "distinguishable":
        amp = np.ones(basis.dimension, dtype=complex)
        for w in range(m):
            amp *= phis[w][st[:, w]]
    else:
        amp = np.zeros(basis.dimension, dtype=complex)
        for perm in itertools.permutations(range(m)):
            term = np.ones(basis.dimension, dtype=complex)
            for w in range(m):
                term *= phis[perm[w]][st[:, w]]
            amp += term if statistics == "boson" else _perm_sign(perm) * term
        amp *= math.sqrt(math.factorial(m)) / math.factorial(m) / basis.weights()
    nrm = np.linalg.norm(amp)
    if nrm < 1e-12:
        raise ZeroState("(anti)symmetrized product vanishes")
    return StateVector(basis, amp / nrm)


# ---------------------------------------------------------------------------
# propagation


def chebyshev_terms(x: float, tol: float, max_terms: int) -> tuple[np.ndarray, float]:
    """Coefficients c_k of e^{-i x y} = sum c_k T_k(y) on [-1, 1] and the tail bound.

    ``c_0 = J_0(x)``, ``c_k = 2 (-i)^k J_k(x)``.  The discarded tail is
    bounded by summing |c_k| numerically up to an order beyond which
    |J_k(x)| <= (x/2)^k / k! decays geometrically with ratio <= 1/2, plus
    twice that analytic term.
    """
    far = max(int(math.ceil(x)), 1)
    log_tol = math.log(tol * 1e-4)
    while far * math.log(max(x / 2, 1e-300)) - gammaln(far + 1) > log_tol or x / (2 * (far + 1)) > 0.5:
        far += max(8, far // 16)
        if far > max_terms + 10_000:
            raise ToleranceUnachievable(
                f"Chebyshev expansion needs more than {max_terms} terms (x = {x:.3e})")
    orders = np.arange(far + 1)
    J = jv(orders, x)
    mag = 2 * np.abs(J)
    mag[0] = abs(J[0])
    analytic = 4 * math.exp((far + 1) * math.log(max(x / 2, 1e-300)) - gammaln(far + 2)) if x > 0 else 0.0
    tail = np.cumsum(mag[::-1])[::-1]               # tail[k] = sum_{j >= k} |c_j|
    tail = np.append(tail, 0.0) + analytic
    ok = np.nonzero(tail[1:] <= tol)[0]
    K = int(ok[0]) if len(ok) else far
    if K > max_terms:
        raise ToleranceUnachievable(f"needs {K} Chebyshev terms, cap is {max_terms}")
    coef = (2 * (-1j) ** (orders[:K + 1] % 4) * J[:K + 1]).astype(complex)
    coef[0] = J[0]
    return coef, float(tail[K + 1])


def evolve(H: SparseHamiltonian, psi: StateVector | np.ndarray, t: float, tol: float = 1e-10,
           max_terms: int = 5_000_000, backend=None, return_info: bool = False):
    """e^{-iHt} psi by a Chebyshev expansion on the Gershgorin interval.

    The truncation error is bounded a priori by the Bessel tail
    (``||T_k|| <= 1`` on the rescaled spectrum), kept below ``tol / 2``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if not 1e-14 < tol < 1e-2:
        raise ValueError("tol must lie in (1e-14, 1e-2)")
    vec = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
    vec = np.ascontiguousarray(vec, dtype=complex)
    basis = psi.basis if isinstance(psi, StateVector) else H.basis
    if t == 0:
        out = StateVector(basis, vec.copy())
        return (out, {"terms": 0, "bound": 0.0}) if return_info else out
    lo, hi = H.spectrum_bounds
    half = max((hi - lo) / 2, 1e-12)
    centre = (hi + lo) / 2
    coef, bound = chebyshev_terms(half * t, tol / 2, max_terms)
    mat = H.matrix
    k = kernels.get(backend)
    real = not np.iscomplexobj(mat.data)
    if not real and k is not kernels.get("python"):
        k = kernels.get("python")
    data = mat.data if real else mat.data
    indptr = mat.indptr.astype(np.int32, copy=False)
    indices = mat.indices.astype(np.int32, copy=False)
    prev = vec.copy()
    acc = coef[0] * prev
    if len(coef) > 1:
        cur = np.zeros_like(vec)
        # T_1 v = (H - c) v / a
        k.cheb_step(indptr, indices, data, prev, cur, acc, 1.0 / half, -centre / half, coef[1])
        for c in coef[2:]:
            # prev <- 2 (H - c)/a cur - prev, then swap roles
            k.cheb_step(indptr, indices, data, cur, prev, acc, 2.0 / half, -2.0 * centre / half, c)
            prev, cur = cur, prev
    acc *= np.exp(-1j * centre * t)
    out = StateVector(basis, acc)
    if return_info:
        return out, {"terms": len(coef), "bound": bound}
    return out


def dense_evolve(H, psi, t: float) -> np.ndarray:
    """Reference e^{-iHt} psi by dense eigendecomposition."""
    mat = H.matrix.toarray() if isinstance(H, SparseHamiltonian) else np.asarray(H)
    vec = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
    w, U = np.linalg.eigh(mat)
    return U @ (np.exp(-1j * w * t) * (U.conj().T @ vec))


# ---------------------------------------------------------------------------
# analytic predictions


def _window(l, M, L):
    return (l >= M + 1) & (l <= M + L)


def predicted_rail_amplitudes(S: np.ndarray, j: int, M: int, L: int, k: float, t: float,
                              rail_extent: int) -> np.ndarray:
    """Square-window prediction on rails x = 1..rail_extent, shape (N, extent).

    Incoming term on rail j: e^{-ikx} R(x - floor(2t sin k)); outgoing on
    rail q: S_qj e^{ikx} R(-x - floor(2t sin k)); overall factor
    L^{-1/2} e^{-2it cos k}.
    """
    x = np.arange(1, rail_extent + 1)
    shift = math.floor(2 * t * math.sin(k))
    pref = np.exp(-2j * t * math.cos(k)) / math.sqrt(L)
    out = np.outer(S[:, j], np.exp(1j * k * x) * _window(-x - shift, M, L))
    out[j] += np.exp(-1j * k * x) * _window(x - shift, M, L)
    return pref * out


def predicted_single_alpha(S: np.ndarray, spec: WavePacketSpec, t: float, rail_map,
                           n_vertices: int) -> StateVector:
    """Single-particle prediction laid out on a truncated graph.

    ``spec.rail`` is the entry terminal index, ``spec.offset`` is M;
    ``rail_map[(q, x)]`` gives vertices.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    extent = max(x for (_, x) in rail_map if isinstance(x, (int, np.integer)))
    amp = predicted_rail_amplitudes(np.asarray(S), int(spec.rail), spec.offset, spec.length,
                                    spec.momentum, t, extent)
    out = np.zeros(n_vertices, dtype=complex)
    for (q, x), v in rail_map.items():
        if isinstance(q, (int, np.integer)) and 0 <= q < amp.shape[0] and 1 <= x <= extent:
            out[v] = amp[q, x - 1]
    return StateVector(None, out)


def collision_specs(M: int, L: int):
    """The two counter-propagating packets: momentum -pi/2 on [-M-L, -M-1]
    and pi/4 on [M+1, M+L], both with amplitude e^{+ikx}."""
    return (WavePacketSpec("line", -M - L - 1, L, -math.pi / 2, sign=1),
            WavePacketSpec("line", M, L, math.pi / 4, sign=1))


def collision_time(M: int, L: int) -> float:
    """Smallest t with 2(floor(t/sqrt2) + floor(t)) >= 2M + 2L + 1."""
    target = 2 * M + 2 * L + 1
    cands = sorted({float(n) for n in range(target + 2)} |
                   {n * math.sqrt(2) for n in range(target + 2)})
    for t in cands:
        if 2 * (math.floor(t / math.sqrt(2)) + math.floor(t)) >= target:
            return t
    raise RuntimeError("unreachable")


def _two_window(u, v, t, M, L):
    a = u - 2 * math.floor(t)
    b = v + 2 * math.floor(t / math.sqrt(2))
    return (a >= -M - L) & (a <= -M - 1) & (b >= M + 1) & (b <= M + L)


def predicted_two_alpha(specs, theta: float, t: float, statistics: str,
                        position_map, basis: ConfigurationBasis) -> StateVector:
    """Two-particle collision prediction in an occupation basis.

    ``position_map[x]`` gives the vertex of line position x; the amplitude
    for x <= y is
        (sqrt2 L)^{-1} e^{-sqrt2 i t} [e^{-i pi x/2} e^{i pi y/4} F(x,y,t)
                                       +- e^{i theta} e^{i pi x/4} e^{-i pi y/2} F(y,x,t)].
    """
    statistics = _stat(statistics)
    if statistics == "distinguishable":
        raise GeometryMismatch("collision prediction needs identical particles")
    left, right = specs
    L = left.length
    M = right.offset
    ok = (right.length == L and abs(left.momentum + math.pi / 2) < 1e-12
          and abs(right.momentum - math.pi / 4) < 1e-12 and left.offset == -M - L - 1
          and left.sign == 1 and right.sign == 1 and M >= 0)
    if not ok:
        raise GeometryMismatch("packets must be -pi/2 on [-M-L, -M-1] and pi/4 on [M+1, M+L]")
    sgn = 1 if statistics == "boson" else -1
    inv = {v: x for x, v in position_map.items()}
    pos = np.array([inv.get(v, np.nan) for v in range(basis.V)], dtype=float)
    a_v, b_v = basis.states[:, 0], basis.states[:, 1]
    xa, ya = pos[a_v], pos[b_v]
    swap = xa > ya
    x = np.where(swap, ya, xa)
    y = np.where(swap, xa, ya)
    valid = ~np.isnan(x) & ~np.isnan(y)
    x = np.where(valid, x, 0).astype(np.int64)
    y = np.where(valid, y, 0).astype(np.int64)
    pref = np.exp(-math.sqrt(2) * 1j * t) / (math.sqrt(2) * L)
    a = pref * (np.exp(-1j * math.pi * x / 2 + 1j * math.pi * y / 4) * _two_window(x, y, t, M, L)
                + sgn * np.exp(1j * theta) * np.exp(1j * math.pi * x / 4 - 1j * math.pi * y / 2)
                * _two_window(y, x, t, M, L))
    amp = np.where(x == y, a, math.sqrt(2) * a) * valid
    return StateVector(basis, amp.astype(complex))


def truncation_bound(h_norm: float, t: float, N0: int, delta: float) -> float:
    """(4 e ||H|| t / N0 + 2) (delta + 2^{-N0} (1 + delta))."""
    if N0 < 1 or delta < 0 or t < 0:
        raise ValueError("need N0 >= 1, delta >= 0, t >= 0")
    return (4 * math.e * h_norm * t / N0 + 2) * (delta + 2.0 ** (-N0) * (1 + delta))
