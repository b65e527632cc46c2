"""Single-particle scattering off a gadget with semi-infinite rails.

With terminals ordered first, the gadget Hamiltonian is partitioned as
``[[A, B^dagger], [B, D]]``.  At momentum ``k`` (``z = e^{ik}``) the rail
amplitudes of the scattering state entering on terminal ``j`` are
``e^{-ikx} delta_qj + e^{ikx} S_qj`` with the terminal itself at ``x = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidMomentum, SingularAtMomentum
from .graph_core import Gadget, rails_graph

COND_LIMIT = 1e12


@dataclass(frozen=True)
class AdjacencyBlocks:
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    order: tuple

    @property
    def n_terminals(self) -> int:
        return self.A.shape[0]

    @property
    def n_interior(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class ScatteringSolution:
    k: float
    S: np.ndarray
    Psi: np.ndarray
    energy: float
    condition: float
    method: str = "gamma"
    confined: bool = False


@dataclass(frozen=True)
class BlockFormResult:
    is_perfect_transmission: bool
    U: np.ndarray | None
    reflection_norm: float


def partition_adjacency(g: Gadget) -> AdjacencyBlocks:
    """Adjacency matrix reordered terminals-first and split into A, B, D."""
    terms = list(g.terminals)
    tset = set(terms)
    order = terms + [v for v in range(g.graph.vertex_count) if v not in tset]
    H = g.graph.adjacency()[np.ix_(order, order)]
    N = len(terms)
    return AdjacencyBlocks(H[:N, :N], H[N:, :N], H[N:, N:], tuple(order))


def blocks_from_matrix(H: np.ndarray, n_terminals: int) -> AdjacencyBlocks:
    """Partition an arbitrary Hermitian gadget matrix whose first rows are terminals."""
    H = np.asarray(H)
    if not np.allclose(H, H.conj().T, atol=1e-14):
        raise ValueError("gadget matrix must be Hermitian")
    N = n_terminals
    return AdjacencyBlocks(H[:N, :N], H[N:, :N], H[N:, N:], tuple(range(H.shape[0])))


def _check_k(k):
    if not -np.pi < k < 0:
        raise InvalidMomentum(f"momentum must lie in (-pi, 0), got {k!r}")


def _gamma(blk: AdjacencyBlocks, z: complex) -> np.ndarray:
    N, m = blk.n_terminals, blk.n_interior
    g = np.empty((N + m, N + m), dtype=complex)
    g[:N, :N] = z * blk.A - np.eye(N)
    g[:N, N:] = z * blk.B.conj().T
    g[N:, :N] = z * blk.B
    g[N:, N:] = z * blk.D - (z * z + 1) * np.eye(m)
    return g


def _solve_confined(gz, rhs, N, k, cond):
    """Solve a singular gamma system whose null space avoids the terminals.

    Bound states confined to the gadget interior make gamma(z) singular
    without affecting S: their amplitudes vanish on every terminal, so the
    terminal block of any solution is unique.  The minimum-norm solution is
    returned after checking consistency; otherwise SingularAtMomentum.
    """
    _, sv, vh = np.linalg.svd(gz)
    null = vh[sv < sv[0] * 1e-12].conj().T
    if null.size and np.max(np.abs(null[:N])) > 1e-8:
        raise SingularAtMomentum(k, cond)
    X = np.linalg.lstsq(gz, rhs, rcond=1e-12)[0]
    if np.max(np.abs(gz @ X - rhs)) > 1e-9:
        raise SingularAtMomentum(k, cond)
    return X


def s_matrix(g, k: float, method: str = "gamma") -> ScatteringSolution:
    """S-matrix and interior amplitudes at momentum ``k`` in (-pi, 0).

    Parameters
    ----------
    g : Gadget or AdjacencyBlocks
    k : float
    method : {"gamma", "q_form"}
        ``gamma`` solves ``gamma(z) X = -gamma(1/z)[:, :N]`` on the whole
        gadget; ``q_form`` first eliminates the interior,
        ``S = -Q(z)^{-1} Q(1/z)`` with ``Q(z) = 1 - z(A + B^dagger (z + 1/z - D)^{-1} B)``.

    Raises
    ------
    SingularAtMomentum
        if the matrix to invert has condition number above 1e12.  For
        ``gamma`` this is raised only when the singular directions touch the
        terminals; interior-confined bound states are projected out and the
        solution is flagged ``confined``.
    """
    _check_k(k)
    blk = g if isinstance(g, AdjacencyBlocks) else partition_adjacency(g)
    N, m = blk.n_terminals, blk.n_interior
    z = np.exp(1j * k)
    confined = False
    if method == "gamma":
        gz = _gamma(blk, z)
        rhs = -_gamma(blk, 1 / z)[:, :N]
        cond = np.linalg.cond(gz)
        if np.isfinite(cond) and cond <= COND_LIMIT:
            X = np.linalg.solve(gz, rhs)
        else:
            X = _solve_confined(gz, rhs, N, k, cond)
            confined = True
        S, Psi = X[:N], z * X[N:]
    elif method in ("q_form", "q"):
        E = z + 1 / z
        Bh = blk.B.conj().T
        cond = 1.0
        if m:
            inner = E * np.eye(m) - blk.D
            cond = np.linalg.cond(inner)
            if not np.isfinite(cond) or cond > COND_LIMIT:
                raise SingularAtMomentum(k, cond)
            G = np.linalg.solve(inner, blk.B)
            eff = blk.A + Bh @ G
        else:
            G = np.zeros((0, N), dtype=complex)
            eff = blk.A.astype(complex)
        Qz = np.eye(N) - z * eff
        Qzi = np.eye(N) - eff / z
        c2 = np.linalg.cond(Qz)
        if not np.isfinite(c2) or c2 > COND_LIMIT:
            raise SingularAtMomentum(k, c2)
        cond = max(cond, c2)
        S = -np.linalg.solve(Qz, Qzi)
        Psi = G @ (np.eye(N) / z + z * S)
        method = "q_form"
    else:
        raise ValueError(f"unknown method {method!r}")
    return ScatteringSolution(k=float(k), S=S, Psi=Psi, energy=float(2 * np.cos(k)),
                              condition=float(cond), method=method, confined=confined)


def scattering_state_amplitudes(sol: ScatteringSolution, j: int, rail_extent: int) -> dict:
    """Amplitudes of the scattering state entering on terminal ``j`` (0-based).

    Returns
    -------
    dict
        ``rails``: array (N, rail_extent), row q holds positions x = 1..extent;
        ``interior``: the interior amplitudes ``Psi[:, j]``.
    """
    N = sol.S.shape[0]
    if not 0 <= j < N:
        raise IndexError(f"terminal index {j} outside 0..{N - 1}")
    if rail_extent < 1:
        raise ValueError("rail_extent must be >= 1")
    x = np.arange(1, rail_extent + 1)
    rails = np.outer(sol.S[:, j], np.exp(1j * sol.k * x))
    rails[j] += np.exp(-1j * sol.k * x)
    return {"rails": rails, "interior": sol.Psi[:, j].copy()}


def eigen_residual(g: Gadget, sol: ScatteringSolution, j: int, rail_extent: int = 6) -> float:
    """Max |(H - 2 cos k) psi| over all vertices except the rail ends.

    The scattering state is laid out on the truncated graph G(rail_extent);
    the rail ends are excluded because truncation cuts their neighbours.
    """
    amp = scattering_state_amplitudes(sol, j, rail_extent)
    G = rails_graph(g, rail_extent)
    blk = partition_adjacency(g)
    psi = np.zeros(G.vertex_count, dtype=complex)
    for pos, v in enumerate(blk.order[blk.n_terminals:]):
        psi[v] = amp["interior"][pos]
    ends = []
    for v, (q, x) in G.labels.items():
        if isinstance(q, int) and isinstance(x, int):
            psi[v] = amp["rails"][q, x - 1]
            if x == rail_extent:
                ends.append(v)
    r = G.adjacency_sparse() @ psi - sol.energy * psi
    r[ends] = 0
    return float(np.max(np.abs(r)))


def check_block_form(sol: ScatteringSolution, split: int, tol: float = 1e-8) -> BlockFormResult:
    """Classify ``S = [[R, U'], [U, R']]`` as perfectly transmitting.

    Perfect transmission means both diagonal blocks vanish (max-norm < tol);
    ``U`` is the lower-left block (inputs -> outputs).
    """
    N = sol.S.shape[0]
    if not 0 < split < N:
        raise ValueError(f"split must lie in 1..{N - 1}")
    S = sol.S
    refl = max(np.max(np.abs(S[:split, :split])), np.max(np.abs(S[split:, split:])))
    ok = bool(refl < tol)
    return BlockFormResult(is_perfect_transmission=ok, U=S[split:, :split].copy(),
                           reflection_norm=float(refl))
