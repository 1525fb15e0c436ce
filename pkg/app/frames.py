"""Reference frames, coordinate transforms and instantaneous power.

Amplitude-invariant Clarke convention throughout: a balanced set of peak
amplitude A maps to an alpha-beta vector of norm A. The 3/2 factor of the
three-phase power therefore lives in instantaneous_pq only.
"""

import math
from typing import NamedTuple

from app.models import PerUnitBase

SQRT3 = math.sqrt(3.0)
TWO_THIRDS = 2.0 / 3.0

__all__ = [
    "AlphaBeta",
    "DQ",
    "PerUnitBase",
    "ThreePhase",
    "abc_to_dq",
    "clarke",
    "dq_to_abc",
    "instantaneous_pq",
    "inverse_clarke",
    "inverse_park",
    "park",
    "per_unit_pq",
    "wrap_angle",
]


class ThreePhase(NamedTuple):
    a: float
    b: float
    c: float


class AlphaBeta(NamedTuple):
    alpha: float
    beta: float

    @property
    def norm(self) -> float:
        return math.hypot(self.alpha, self.beta)

    def __add__(self, other: "AlphaBeta") -> "AlphaBeta":  # type: ignore[override]
        return AlphaBeta(self.alpha + other.alpha, self.beta + other.beta)

    def __sub__(self, other: "AlphaBeta") -> "AlphaBeta":
        return AlphaBeta(self.alpha - other.alpha, self.beta - other.beta)

    def scale(self, k: float) -> "AlphaBeta":
        return AlphaBeta(k * self.alpha, k * self.beta)

    @classmethod
    def from_complex(cls, z: complex) -> "AlphaBeta":
        return cls(z.real, z.imag)

    def to_complex(self) -> complex:
        return complex(self.alpha, self.beta)


class DQ(NamedTuple):
    d: float
    q: float
    theta: float = 0.0

    @property
    def norm(self) -> float:
        return math.hypot(self.d, self.q)


ZERO_AB = AlphaBeta(0.0, 0.0)


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(theta, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


def clarke(x: ThreePhase) -> AlphaBeta:
    """abc -> alpha-beta; the zero sequence is discarded (three-wire plant)."""
    alpha = TWO_THIRDS * (x.a - 0.5 * x.b - 0.5 * x.c)
    beta = TWO_THIRDS * (0.5 * SQRT3) * (x.b - x.c)
    return AlphaBeta(alpha, beta)


def inverse_clarke(x: AlphaBeta) -> ThreePhase:
    a = x.alpha
    b = -0.5 * x.alpha + 0.5 * SQRT3 * x.beta
    c = -0.5 * x.alpha - 0.5 * SQRT3 * x.beta
    return ThreePhase(a, b, c)


def park(x: AlphaBeta, theta: float) -> DQ:
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    d = x.alpha * cos_t + x.beta * sin_t
    q = -x.alpha * sin_t + x.beta * cos_t
    return DQ(d, q, theta)


def inverse_park(x: DQ, theta: float) -> AlphaBeta:
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    return AlphaBeta(x.d * cos_t - x.q * sin_t, x.d * sin_t + x.q * cos_t)


def abc_to_dq(x: ThreePhase, theta: float) -> DQ:
    return park(clarke(x), theta)


def dq_to_abc(x: DQ, theta: float) -> ThreePhase:
    return inverse_clarke(inverse_park(x, theta))


def instantaneous_pq(v: AlphaBeta, i: AlphaBeta) -> tuple[float, float]:
    """Three-phase instantaneous power from amplitude-invariant alpha-beta signals.

    Positive P flows from the converter toward the grid; positive Q is an
    inductive (over-excited) injection.
    """
    p = 1.5 * (v.alpha * i.alpha + v.beta * i.beta)
    q = 1.5 * (v.beta * i.alpha - v.alpha * i.beta)
    return p, q


def per_unit_pq(v: AlphaBeta, i: AlphaBeta) -> tuple[float, float]:
    """Power in pu of s_base for v, i in pu: on the base i = 2S/(3V) the 3/2 cancels."""
    p, q = instantaneous_pq(v, i)
    return p * TWO_THIRDS, q * TWO_THIRDS
