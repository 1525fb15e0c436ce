"""Discrete-time control primitives: PI, PR, rate limiter, sequence separation."""

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple, Optional

from app.frames import ZERO_AB, AlphaBeta


@dataclass(frozen=True, slots=True)
class PiState:
    integrator: float = 0.0
    lower: Optional[float] = None
    upper: Optional[float] = None
    last_error: Optional[float] = None


def pi_step(s: PiState, error: float, k_p: float, k_i: float, dt: float) -> tuple[PiState, float]:
    """PI with trapezoidal accumulation and conditional-integration anti-windup."""
    previous = error if s.last_error is None else s.last_error
    integrator = s.integrator + k_i * 0.5 * (error + previous) * dt
    out = k_p * error + integrator

    if s.upper is not None and out > s.upper:
        if error > 0.0:
            integrator = s.integrator
        out = min(k_p * error + integrator, s.upper)
    elif s.lower is not None and out < s.lower:
        if error < 0.0:
            integrator = s.integrator
        out = max(k_p * error + integrator, s.lower)

    return replace(s, integrator=integrator, last_error=error), out


@dataclass(frozen=True, slots=True)
class PrState:
    k_p: float
    k_r: float
    omega_0: float
    s1: float = 0.0
    s2: float = 0.0


@lru_cache(maxsize=32)
def resonator_coefficients(k_r: float, omega_0: float, dt: float) -> tuple[float, float]:
    """(b0, a1) of k_r*s/(s^2 + w0^2) under the bilinear map prewarped at w0.

    The section is b0*(1 - z^-2) / (1 + a1*z^-1 + z^-2); its poles sit on the
    unit circle at angle w0*dt.
    """
    b0 = k_r * math.sin(omega_0 * dt) / (2.0 * omega_0)
    a1 = -2.0 * math.cos(omega_0 * dt)
    return b0, a1


def pr_step(s: PrState, error: float, dt: float) -> tuple[PrState, float]:
    b0, a1 = resonator_coefficients(s.k_r, s.omega_0, dt)
    resonant = b0 * error + s.s1
    s1 = s.s2 - a1 * resonant
    s2 = -b0 * error - resonant
    return replace(s, s1=s1, s2=s2), s.k_p * error + resonant


def pr_free_oscillation(s: PrState, y_now: float, y_prev: float) -> PrState:
    """Load the resonator so that, with zero error, it keeps producing y_now, y_next, ...

    y_prev is the resonant output one control period earlier.
    """
    return replace(s, s1=y_now, s2=-y_prev)


@dataclass(frozen=True, slots=True)
class RateLimiterState:
    value: float
    up_slope: float
    down_slope: float


def rate_limit_step(s: RateLimiterState, target: float, dt: float) -> tuple[RateLimiterState, float]:
    rise = s.up_slope * dt
    fall = s.down_slope * dt
    delta = target - s.value
    if delta > rise:
        value = s.value + rise
    elif delta < -fall:
        value = s.value - fall
    else:
        value = target
    return replace(s, value=value), value


@dataclass(frozen=True, slots=True)
class SequenceSeparatorState:
    length: int
    history: tuple[AlphaBeta, ...] = ()
    v_plus: AlphaBeta = ZERO_AB
    v_minus: AlphaBeta = ZERO_AB

    @classmethod
    def for_rate(cls, f_s: float, f_0: float) -> "SequenceSeparatorState":
        return cls(length=round(f_s / (4.0 * f_0)))

    @property
    def settled(self) -> bool:
        return len(self.history) >= self.length


class SequenceComponents(NamedTuple):
    v_plus: AlphaBeta
    v_minus: AlphaBeta
    mag_plus: float
    mag_minus: float
    settled: bool


def sequence_separate(s: SequenceSeparatorState, v: AlphaBeta) -> tuple[SequenceSeparatorState, SequenceComponents]:
    """Quarter-period delayed signal cancellation.

    With d = v(t - T0/4) rotated by +90 deg (alpha, beta) -> (-beta, alpha):
    v+ = (v + jd)/2 and v- = (v - jd)/2. Until the delay line has filled the
    input is reported as all positive sequence and flagged not settled.
    """
    if s.settled:
        delayed = s.history[0]
        jd_alpha = -delayed.beta
        jd_beta = delayed.alpha
        v_plus = AlphaBeta(0.5 * (v.alpha + jd_alpha), 0.5 * (v.beta + jd_beta))
        v_minus = AlphaBeta(0.5 * (v.alpha - jd_alpha), 0.5 * (v.beta - jd_beta))
        history = s.history[1:] + (v,)
        settled = True
    else:
        v_plus = v
        v_minus = ZERO_AB
        history = s.history + (v,)
        settled = False

    state = replace(s, history=history, v_plus=v_plus, v_minus=v_minus)
    return state, SequenceComponents(v_plus, v_minus, v_plus.norm, v_minus.norm, settled)
