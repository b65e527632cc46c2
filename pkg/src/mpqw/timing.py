"""Integer path-length and timing arithmetic for the gate blocks.

All lengths are computed in exact integer arithmetic; square roots only
appear through ``math.isqrt`` comparisons so that the ceilings are exact for
any ``L``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

from .errors import InvalidMomentum

K_COMPUTATIONAL = -math.pi / 4
K_MEDIATOR = -math.pi / 2


def _ceil_sqrt(n: int) -> int:
    """Smallest integer r with r*r >= n (n >= 0)."""
    if n <= 0:
        return 0
    return math.isqrt(n - 1) + 1


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


def momentum_kind(k: float) -> str:
    """Classify a momentum as ``"computational"`` (-pi/4) or ``"mediator"`` (-pi/2)."""
    if abs(k - K_COMPUTATIONAL) < 1e-12:
        return "computational"
    if abs(k - K_MEDIATOR) < 1e-12:
        return "mediator"
    raise InvalidMomentum(f"only -pi/4 and -pi/2 are used by the layout, got {k!r}")


def speed(k: float) -> float:
    """Group speed |2 sin k| of a packet on a path."""
    return abs(2.0 * math.sin(k))


def packet_offset(k: float, L: int) -> int:
    """Distance M(k) between a packet and the gadget at the start of a block.

    M(-pi/2) = L and M(-pi/4) = ceil((3*sqrt(2) - 2) L / 4).  The second is the
    smallest m with 4m + 2L >= 3*sqrt(2)*L, i.e. (4m + 2L)^2 >= 18 L^2.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    if momentum_kind(k) == "mediator":
        return L
    return _ceil_div(_ceil_sqrt(18 * L * L) - 2 * L, 4)


def block_rail_length(k: float, L: int) -> int:
    """Vertices on each input (and output) path of a single-qubit block: 2M(k) + L."""
    return 2 * packet_offset(k, L) + L


def switch_edges(k: float) -> int:
    """Effective number of edges a packet crosses inside a momentum switch.

    At -pi/4 the switch transmits like a 4-vertex path, at -pi/2 like a
    5-vertex path.
    """
    return 3 if momentum_kind(k) == "computational" else 4


def single_qubit_duration(L: int) -> float:
    return 1.5 * L


@dataclass(frozen=True)
class CDLengths:
    """Path lengths of the controlled-phase block for packet length L."""

    L: int
    d1: int
    d2: int
    Z: int
    X: int
    W: int
    m_comp: int
    m_med: int

    @property
    def comp_rail(self) -> int:
        """Vertices on each computational rail (straight or through the switches)."""
        return 2 * self.W + self.Z + 4

    @property
    def med_rail(self) -> int:
        return 2 * self.X + self.Z + 6

    @property
    def duration(self) -> float:
        return (5 * self.L + 2 * self.d1) / math.sqrt(2)

    @property
    def comp_readout_offset(self) -> int:
        return 2 * self.W + self.Z + 4 - self.m_comp - self.L

    @property
    def med_readout_offset(self) -> int:
        return 2 * self.X + self.Z + 6 - self.m_med - self.L

    def as_dict(self) -> dict:
        return asdict(self)


def cd_lengths(L: int) -> CDLengths:
    """Distances Z, X, W of the controlled-phase block.

    Z = 4L, d1 = M(-pi/4), d2 = ceil((5L + 2 d1)/sqrt(2) - 5L/2),
    X = d2 + L + M(-pi/2), W = d1 + L + M(-pi/4).
    """
    m_comp = packet_offset(K_COMPUTATIONAL, L)
    m_med = packet_offset(K_MEDIATOR, L)
    d1 = m_comp
    a = 5 * L + 2 * d1
    # d2 = smallest m with 2m + 5L >= sqrt(2) * a
    d2 = _ceil_div(_ceil_sqrt(2 * a * a) - 5 * L, 2)
    return CDLengths(L=L, d1=d1, d2=d2, Z=4 * L, X=d2 + L + m_med, W=d1 + L + m_comp,
                     m_comp=m_comp, m_med=m_med)


def two_qubit_duration(L: int) -> float:
    return cd_lengths(L).duration


def total_time(n_single: int, n_two: int, L: int) -> float:
    return n_single * single_qubit_duration(L) + n_two * two_qubit_duration(L)


def pass_through_length(k: float, L: int, duration: float) -> int:
    """Straight rail length carrying a packet from offset M to offset M in ``duration``."""
    m = packet_offset(k, L)
    return int(round(speed(k) * duration)) + 2 * m + L


@dataclass(frozen=True)
class PlanarEntanglerLengths:
    """Path lengths of the four-switch planar entangler.

    The top qubit's 1-rail and the bottom qubit's 0-rail run through the
    switches.  ``a_*`` are input path lengths, ``o_*`` output path lengths,
    ``h_top`` is the horizontal between the two upper switches (travelled by
    the bottom particle) and ``h_bottom`` the horizontal between the two lower
    switches (travelled by the top particle).  ``Z`` is the length of each of
    the two vertical paths.  ``E_*`` are the effective rail lengths.
    """

    L: int
    k_top: float
    k_bottom: float
    Z: int
    a_top: int
    a_bottom: int
    h_top: int
    h_bottom: int
    o_top: int
    o_bottom: int
    E_top: int
    E_bottom: int
    duration: float

    def as_dict(self) -> dict:
        return asdict(self)


def planar_entangler_lengths(L: int, k_top: float, k_bottom: float,
                             min_horizontal: int = 2) -> PlanarEntanglerLengths:
    """Choose the planar entangler distances so that both particles cross the
    midpoints of both vertical paths at the same times.

    The slower particle gets the short horizontal; the faster particle's
    horizontal is stretched so the two arrive at the second vertical together.
    Input and output paths are at least 2M(k) + L so blocks can be glued.
    """
    if momentum_kind(k_top) == momentum_kind(k_bottom):
        raise InvalidMomentum("planar entangler needs one computational and one mediator particle")
    Z = 4 * L
    parts = {}
    for name, k in (("top", k_top), ("bottom", k_bottom)):
        m = packet_offset(k, L)
        parts[name] = dict(k=k, v=speed(k), e=switch_edges(k), m=m,
                           c=m + (L + 1) / 2.0, rail=2 * m + L)
    half = (Z - 1) / 2.0

    # first crossing: both at the midpoint of the first vertical at t1
    t1 = max((p["rail"] + p["e"] + half - p["c"]) / p["v"] for p in parts.values())
    a = {n: int(round(p["v"] * t1 + p["c"] - p["e"] - half)) for n, p in parts.items()}

    # second crossing: travelled distance Z + h + 2e - 2 between the midpoints
    slow, fast = sorted(parts, key=lambda n: parts[n]["v"])
    span = {slow: Z + min_horizontal + 2 * parts[slow]["e"] - 2}
    h = {slow: min_horizontal}
    h[fast] = int(round(parts[fast]["v"] / parts[slow]["v"] * span[slow]
                        - Z - 2 * parts[fast]["e"] + 2))
    t2 = t1 + span[slow] / parts[slow]["v"]

    # exit: window at distance M from the right end at t3
    def rest(p, o):
        return half + p["e"] + o - p["m"] - (L + 1) / 2.0

    t3 = t2 + max(rest(p, p["rail"]) / p["v"] for p in parts.values())
    o = {n: int(round(p["v"] * (t3 - t2) - half - p["e"] + p["m"] + (L + 1) / 2.0))
         for n, p in parts.items()}
    E = {n: a[n] + o[n] + h[n] + 2 * Z + 4 * parts[n]["e"] - 4 for n in parts}
    # the bottom particle travels the upper horizontal and vice versa
    return PlanarEntanglerLengths(
        L=L, k_top=k_top, k_bottom=k_bottom, Z=Z,
        a_top=a["top"], a_bottom=a["bottom"],
        h_top=h["bottom"], h_bottom=h["top"],
        o_top=o["top"], o_bottom=o["bottom"],
        E_top=E["top"], E_bottom=E["bottom"], duration=t3)
