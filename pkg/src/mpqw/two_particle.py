"""Two-particle scattering on the infinite path with a finite-range interaction.

In centre-of-mass and relative coordinates the two-particle eigenproblem at
total momentum ``p1`` reduces to a single particle on the relative coordinate
``r`` with hopping ``2 cos(p1/2)`` and potential ``V(|r|)``, at energy
``4 cos(p1/2) cos(p2)``.  The relative wavefunction is

    e^{-i p2 r} + R e^{i p2 r}   (r <= -C)
    f(r)                         (|r| < C)
    T e^{-i p2 r}                (r >= C)

and the phases ``e^{i theta_pm} = T +- R`` drive the controlled-phase gate.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSystem, InvalidMomentum, NotFound, PhaseNotRealizable

MAX_RANGE = 8


@dataclass(frozen=True)
class InteractionModel:
    """Translation-invariant pair interaction V(r), r = graph distance.

    Use the constructors ``onsite``, ``nearest_neighbor`` and ``general``.
    """

    kind: str
    U: float
    profile: tuple = field(default=())

    def __post_init__(self):
        if self.kind == "onsite":
            object.__setattr__(self, "profile", (float(self.U),))
        elif self.kind == "nearest_neighbor":
            object.__setattr__(self, "profile", (0.0, float(self.U)))
        elif self.kind == "general":
            prof = tuple(float(v) for v in self.profile)
            if not prof:
                raise ValueError("general interaction needs a profile V(0..C)")
            object.__setattr__(self, "profile", prof)
        else:
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.range > MAX_RANGE:
            raise ValueError(f"interaction range {self.range} exceeds {MAX_RANGE}")

    @classmethod
    def onsite(cls, U):
        return cls("onsite", float(U))

    @classmethod
    def nearest_neighbor(cls, U):
        return cls("nearest_neighbor", float(U))

    @classmethod
    def general(cls, profile):
        return cls("general", float(profile[0]), tuple(profile))

    @property
    def range(self) -> int:
        return len(self.profile) - 1

    def V(self, r: int) -> float:
        r = abs(int(r))
        return self.profile[r] if r < len(self.profile) else 0.0


@dataclass(frozen=True)
class TwoParticleScattering:
    p1: float
    p2: float
    R: complex
    T: complex
    f: np.ndarray
    theta_plus: float
    theta_minus: float
    model: InteractionModel

    def amplitude(self, r: int) -> complex:
        """Relative wavefunction at integer r."""
        C = self.model.range
        if r <= -C:
            return cmath.exp(-1j * self.p2 * r) + self.R * cmath.exp(1j * self.p2 * r)
        if r >= C:
            return self.T * cmath.exp(-1j * self.p2 * r)
        return complex(self.f[r + C - 1])


def momenta_from_pair(k1: float, k2: float) -> tuple[float, float]:
    """(p1, p2) = (-k1 - k2, (k2 - k1)/2)."""
    return -k1 - k2, (k2 - k1) / 2


def pair_from_momenta(p1: float, p2: float) -> tuple[float, float]:
    return -p1 / 2 - p2, -p1 / 2 + p2


def _check(p1, p2):
    if not (-math.pi < p1 < math.pi and 0 < p2 < math.pi):
        raise InvalidMomentum(f"need p1 in (-pi, pi) and p2 in (0, pi), got ({p1}, {p2})")
    if abs(math.cos(p1 / 2)) < 1e-12:
        raise InvalidMomentum("cos(p1/2) = 0: effective hopping vanishes")


def solve_two_particle(model: InteractionModel, p1: float, p2: float) -> TwoParticleScattering:
    """Solve for R, T and the interior amplitudes.

    Unknowns are psi(r) for r in [-C-1, C+1] plus R and T.  Rows: the
    effective eigenvalue equation at r = -C..C, and four plane-wave boundary
    rows fixing psi(-C-1), psi(-C), psi(C), psi(C+1).  For C = 0 the two
    middle boundary rows tie psi(0) to both asymptotic forms, which is the
    continuity condition T = 1 + R.
    """
    _check(p1, p2)
    C = model.range
    J = 2 * math.cos(p1 / 2)
    E = 2 * J * math.cos(p2)
    n_psi = 2 * C + 3
    iR, iT = n_psi, n_psi + 1
    A = np.zeros((n_psi + 2, n_psi + 2), dtype=complex)
    b = np.zeros(n_psi + 2, dtype=complex)

    def col(r):
        return r + C + 1

    row = 0
    for r in range(-C, C + 1):
        A[row, col(r - 1)] += J
        A[row, col(r + 1)] += J
        A[row, col(r)] += model.V(r) - E
        row += 1
    for r in (-C - 1, -C):
        A[row, col(r)] = 1
        A[row, iR] = -cmath.exp(1j * p2 * r)
        b[row] = cmath.exp(-1j * p2 * r)
        row += 1
    for r in (C, C + 1):
        A[row, col(r)] = 1
        A[row, iT] = -cmath.exp(-1j * p2 * r)
        row += 1
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > 1e12:
        raise DegenerateSystem(f"two-particle system singular (condition {cond:.3e})")
    x = np.linalg.solve(A, b)
    R, T = complex(x[iR]), complex(x[iT])
    f = x[col(-C + 1):col(C)] if C > 0 else np.zeros(0, dtype=complex)
    return TwoParticleScattering(p1=p1, p2=p2, R=R, T=T, f=np.array(f),
                                 theta_plus=cmath.phase(T + R), theta_minus=cmath.phase(T - R),
                                 model=model)


def relative_residual(sol: TwoParticleScattering, extra: int = 5) -> float:
    """Max residual of the effective eigenvalue equation on r in [-C-extra, C+extra]."""
    C = sol.model.range
    J = 2 * math.cos(sol.p1 / 2)
    E = 2 * J * math.cos(sol.p2)
    worst = 0.0
    for r in range(-C - extra, C + extra + 1):
        lhs = J * (sol.amplitude(r - 1) + sol.amplitude(r + 1)) + sol.model.V(r) * sol.amplitude(r)
        worst = max(worst, abs(lhs - E * sol.amplitude(r)))
    return worst


def bose_hubbard_theta(U: float, p1: float, p2: float) -> complex:
    """Closed-form e^{i theta_+} for the onsite model.

    R = -U / (U - 4i cos(p1/2) sin p2), T = 1 + R, so
    e^{i theta_+} = -(U + 4i c s) / (U - 4i c s).
    """
    _check(p1, p2)
    a = 4 * math.cos(p1 / 2) * math.sin(p2)
    den = U - 1j * a
    if abs(den) < 1e-300:
        raise ZeroDivisionError("closed form undefined at U = 0 with sin p2 = 0")
    return -(U + 1j * a) / den


def exchange_phase(model: InteractionModel, statistics: str, p1: float, p2: float):
    """Phase picked up by the pair.

    Returns
    -------
    complex
        ``e^{i theta_+}`` for bosons, ``e^{i theta_-}`` for fermions.
    dict
        For distinguishable particles: ``{"R", "T", "reflectionless"}``; a
        single phase exists only when R vanishes.
    """
    sol = solve_two_particle(model, p1, p2)
    if statistics == "boson":
        return sol.T + sol.R
    if statistics == "fermion":
        return sol.T - sol.R
    if statistics in ("distinguishable", "dist"):
        return {"R": sol.R, "T": sol.T, "reflectionless": abs(sol.R) < 1e-8}
    raise ValueError(f"unknown statistics {statistics!r}")


def cd_repeat_count(theta: float, target: float, tol: float = 1e-9, max_a: int = 1000) -> int:
    """Smallest a <= max_a with |e^{i a theta} - e^{i target}| <= tol."""
    if tol <= 0 or max_a < 1:
        raise ValueError("need tol > 0 and max_a >= 1")
    goal = cmath.exp(1j * target)
    for a in range(1, max_a + 1):
        if abs(cmath.exp(1j * a * theta) - goal) <= tol:
            return a
    raise NotFound(f"no a <= {max_a} brings e^(i a {theta}) within {tol} of e^(i {target})")


# momenta of the mediator (-pi/2) and computational (pi/4) packets on the vertical path
COLLISION_P1, COLLISION_P2 = momenta_from_pair(-math.pi / 2, math.pi / 4)


def cd_phase(model: InteractionModel, statistics: str) -> float:
    """Phase theta of the CD gate for a model at the collision momenta.

    Distinguishable particles only give a phase when the collision is
    reflectionless; otherwise PhaseNotRealizable is raised.
    """
    ph = exchange_phase(model, statistics, COLLISION_P1, COLLISION_P2)
    if isinstance(ph, dict):
        if not ph["reflectionless"]:
            raise PhaseNotRealizable(
                f"distinguishable collision reflects (|R| = {abs(ph['R']):.3e}); no single phase")
        ph = ph["T"]
    return cmath.phase(ph)
