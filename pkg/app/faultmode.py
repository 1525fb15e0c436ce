"""Fault detection, grid-code reference rescaling and dynamic virtual damping.

All powers are per-unit of the converter rating, so s_n is normally 1.
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import NamedTuple

from app.blocks import RateLimiterState, rate_limit_step
from app.models import FaultModeParams

logger = logging.getLogger(__name__)

# Accumulated timers are compared with this slack so that n * dt reaches n * dt.
TIMER_TOLERANCE = 1e-9


class Mode(IntEnum):
    NORMAL = 0
    FAULT = 1


@dataclass(frozen=True, slots=True)
class FaultModeState:
    r_dyn: RateLimiterState
    sf: bool = False
    fm: Mode = Mode.NORMAL
    debounce_timer: float = 0.0
    recovery_timer: float = 0.0
    latch: bool = False
    td_timer: float = 0.0
    stall_warned: bool = False

    @classmethod
    def initial(cls, r_v: float, params: FaultModeParams) -> "FaultModeState":
        x = params.damping_x
        return cls(
            r_dyn=RateLimiterState(
                value=r_v,
                up_slope=params.prl_slope,
                down_slope=x * r_v / params.nrl_ramp_time,
            )
        )


class DetectorOutput(NamedTuple):
    sf: bool
    fm: Mode
    fault_entered: bool
    voltage_restored: bool
    fault_cleared: bool


def fault_detector_step(
    s: FaultModeState,
    v_pu: float,
    p_droop: float,
    p_fm: float,
    dt: float,
    params: FaultModeParams,
    s_n: float = 1.0,
) -> tuple[FaultModeState, DetectorOutput]:
    """Debounced under-voltage detector with the two-condition recovery.

    A timer starts at zero on the first sample of a condition and grows by dt
    per further sample, so a sag first seen at t0 puts the mode in Fault at
    t0 + debounce.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    sf = v_pu < params.v_threshold
    fm = s.fm
    entered = restored = cleared = False
    debounce_timer = s.debounce_timer
    recovery_timer = s.recovery_timer
    stall_warned = s.stall_warned

    if sf:
        debounce_timer = debounce_timer + dt if s.sf else 0.0
        recovery_timer = 0.0
        if fm is Mode.NORMAL and debounce_timer >= params.debounce - TIMER_TOLERANCE:
            fm = Mode.FAULT
            entered = True
            stall_warned = False
    else:
        debounce_timer = 0.0
        if fm is Mode.FAULT:
            restored = s.sf
            recovery_timer = 0.0 if s.sf else recovery_timer + dt
            if recovery_timer >= params.recovery_hold - TIMER_TOLERANCE:
                p_diff = abs(p_droop - p_fm)
                if p_diff <= params.p_diff_threshold * s_n:
                    fm = Mode.NORMAL
                    cleared = True
                elif not stall_warned:
                    logger.warning(
                        "Fault mode held %.0f ms after voltage recovery: |P_diff| = %.3f pu exceeds %.3f pu",
                        recovery_timer * 1e3,
                        p_diff,
                        params.p_diff_threshold * s_n,
                    )
                    stall_warned = True

    state = replace(
        s,
        sf=sf,
        fm=fm,
        debounce_timer=debounce_timer,
        recovery_timer=recovery_timer,
        stall_warned=stall_warned,
    )
    return state, DetectorOutput(sf, fm, entered, restored, cleared)


def apparent_power_new(v_plus: float, v_minus: float, s_n: float) -> float:
    """Permissible apparent power under a sag; balanced faults give v_pu * s_n."""
    return max(0.0, v_plus - v_minus) * s_n


def grid_code_q_ref(v_pu: float, s_new: float, droop_q: float) -> float:
    if v_pu > 0.9:
        return droop_q
    if v_pu > 0.5:
        return 2.0 * s_new * (1.0 - v_pu)
    return s_new


def fault_active_power_ref(s_new: float, q_ref: float) -> tuple[float, float]:
    """Active power left over once q_ref is served: (p_ref, clamped q_ref)."""
    if q_ref >= s_new:
        return 0.0, s_new
    return math.sqrt(s_new * s_new - q_ref * q_ref), q_ref


def fault_references(
    v_plus: float, v_minus: float, droop_refs: tuple[float, float], s_n: float = 1.0
) -> tuple[float, float]:
    """Grid-code (P*, Q*) for the present sag.

    P* never asks for more active power than the outer droop loop, and keeps
    its sign; the droop references are what the converter returns to.
    """
    p_droop, q_droop = droop_refs
    s_new = apparent_power_new(v_plus, v_minus, s_n)
    q_ref = grid_code_q_ref(v_plus, s_new, q_droop)
    headroom = math.sqrt(max(s_new * s_new - q_ref * q_ref, 0.0))
    if q_ref >= 0.0:
        headroom, q_ref = fault_active_power_ref(s_new, q_ref)
    elif abs(q_ref) > s_new:
        q_ref = -s_new
    p_ref = math.copysign(min(abs(p_droop), headroom), p_droop)
    return p_ref, q_ref


def select_references(
    fm: Mode, droop_refs: tuple[float, float], fault_refs: tuple[float, float]
) -> tuple[float, float]:
    return fault_refs if fm is Mode.FAULT else droop_refs


def dynamic_damping_step(
    s: FaultModeState, triggered: bool, r_v: float, dt: float, params: FaultModeParams
) -> tuple[FaultModeState, float]:
    """Latched boost of the virtual resistance to r_v(1 + x), held for t_d, then ramped back.

    The rise is limited by prl_slope and the fall by x*r_v/nrl_ramp_time.
    A new trigger re-arms the latch and restarts the hold.
    """
    latch = s.latch
    td_timer = s.td_timer
    if triggered:
        latch = True
        td_timer = 0.0
    elif latch:
        td_timer += dt

    holding = latch and td_timer < params.t_d - TIMER_TOLERANCE
    target = r_v * (1.0 + params.damping_x) if holding else r_v
    r_dyn, value = rate_limit_step(s.r_dyn, target, dt)
    if value < r_v:
        value = r_v
    elif value > r_v * (1.0 + params.damping_x):
        value = r_v * (1.0 + params.damping_x)
    r_dyn = replace(r_dyn, value=value)

    if latch and not holding and value <= r_v:
        latch = False
        td_timer = 0.0
    return replace(s, r_dyn=r_dyn, latch=latch, td_timer=td_timer), value
