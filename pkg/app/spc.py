"""Synchronous power controller: outer power loops, virtual admittance, limiter, current control."""

import cmath
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

from app.blocks import PiState, PrState, pi_step, pr_free_oscillation, pr_step
from app.frames import AlphaBeta, per_unit_pq, wrap_angle
from app.models import PerUnitBase, SpcParams
from app.plant import OperatingPoint, PlantMeasurements


class PlcGains(NamedTuple):
    k_pp: float
    k_ip: float
    omega_n: float


class RpcGains(NamedTuple):
    g_q: float
    k_pq: float
    k_iq: float


def plc_gains(h: float, zeta: float, s_n: float, p_max: float, omega_0: float) -> PlcGains:
    """Gains that give the power loop the inertia H and damping ratio zeta.

    K_ip = w0/(2 H S_n), K_pp = zeta*sqrt(2 w0/(H S_n P_max)); closed against
    P = P_max*delta the loop has w_N^2 = K_ip*P_max and 2*zeta*w_N = K_pp*P_max.
    """
    if min(h, zeta, s_n, p_max, omega_0) <= 0:
        raise ValueError("plc_gains inputs must all be positive")
    k_ip = omega_0 / (2.0 * h * s_n)
    k_pp = zeta * math.sqrt(2.0 * omega_0 / (h * s_n * p_max))
    omega_n = math.sqrt(k_ip * p_max)
    if not math.isclose(2.0 * zeta * omega_n, k_pp * p_max, rel_tol=1e-9):
        raise ArithmeticError("PLC gain identity violated")
    return PlcGains(k_pp, k_ip, omega_n)


def default_p_max(e_en: float, l_eq: float, omega_0: float) -> float:
    """Linearized transfer gain (3/2) E V_g / X at E = V_g = e_en, X = w0 L_eq, in W/rad."""
    return 1.5 * e_en * e_en / (omega_0 * l_eq)


def rpc_gains(zeta: float, omega_n: float, e_en: float, l_eq: float, base: PerUnitBase) -> RpcGains:
    """Per-unit RPC gains from the Q = 3/2 (E^2 - E V_g cos d)/X linearization at E = V_g = e_en."""
    g_q_si = 1.5 * e_en / (base.omega_0 * l_eq)  # var per V
    g_q = g_q_si * base.v_base / base.s_base
    return RpcGains(g_q, 2.0 * zeta * omega_n / g_q, omega_n * omega_n / g_q)


@dataclass(frozen=True, slots=True)
class SpcGains:
    """SpcParams resolved to the per-unit control path."""

    omega_0: float
    d_p: float
    d_q: float
    k_pp: float
    k_ip: float
    k_pq: float
    k_iq: float
    r_v: float
    l_v: float
    k_p_cc: float
    k_r_cc: float
    e_en: float
    e_max: float
    i_lim: float

    @classmethod
    def from_params(cls, params: SpcParams, base: PerUnitBase) -> "SpcGains":
        s_base = base.s_base
        k_pp, k_ip = params.k_pp, params.k_ip
        if params.derive_plc_gains:
            p_max = params.p_max or default_p_max(params.e_en, params.l_eq, base.omega_0)
            k_pp, k_ip, _ = plc_gains(params.h, params.zeta, s_base, p_max, base.omega_0)
        rpc = rpc_gains(params.rpc_zeta, params.rpc_omega_n, params.e_en, params.l_eq, base)
        e_en = base.voltage_to_pu(params.e_en)
        return cls(
            omega_0=base.omega_0,
            d_p=params.d_p / s_base,
            d_q=params.d_q * base.v_base / s_base,
            k_pp=k_pp * s_base,
            k_ip=k_ip * s_base,
            k_pq=rpc.k_pq,
            k_iq=rpc.k_iq,
            r_v=params.r_v,
            l_v=params.l_v,
            k_p_cc=params.k_p_cc / base.z_base,
            k_r_cc=params.k_r_cc / base.z_base,
            e_en=e_en,
            e_max=params.e_max_ratio * e_en,
            i_lim=params.i_lim,
        )


@dataclass(frozen=True, slots=True)
class SpcState:
    plc: PiState
    theta: float
    omega: float
    rpc: PiState
    e_mag: float
    adm_i: AlphaBeta
    adm_u: AlphaBeta
    cc_alpha: PrState
    cc_beta: PrState
    limiter_active: bool = False

    @classmethod
    def initial(cls, gains: SpcGains, theta: float = 0.0) -> "SpcState":
        zero = AlphaBeta(0.0, 0.0)
        return cls(
            plc=PiState(),
            theta=wrap_angle(theta),
            omega=gains.omega_0,
            rpc=PiState(),
            e_mag=gains.e_en,
            adm_i=zero,
            adm_u=zero,
            cc_alpha=PrState(gains.k_p_cc, gains.k_r_cc, gains.omega_0),
            cc_beta=PrState(gains.k_p_cc, gains.k_r_cc, gains.omega_0),
        )


class SpcTelemetry(NamedTuple):
    p: float
    q: float
    omega: float
    e_mag: float
    theta: float
    i_ref: AlphaBeta
    i_ref_lim: AlphaBeta
    limiter_active: bool


def droop_references(
    p_s: float,
    q_s: float,
    omega_star: float,
    omega: float,
    v_star: float,
    v_pcc_mag: float,
    d_p: float,
    d_q: float,
) -> tuple[float, float]:
    p_ref = p_s + (omega_star - omega) * d_p
    q_ref = q_s + (v_star - v_pcc_mag) * d_q
    return p_ref, q_ref


def plc_step(s: SpcState, p_ref: float, p_meas: float, gains: SpcGains, dt: float) -> tuple[SpcState, float, float]:
    """PI on the power error sets the virtual frequency; the angle integrates it."""
    plc, delta_omega = pi_step(s.plc, p_ref - p_meas, gains.k_pp, gains.k_ip, dt)
    omega = gains.omega_0 + delta_omega
    theta = wrap_angle(s.theta + omega * dt)
    return replace(s, plc=plc, omega=omega, theta=theta), omega, theta


def rpc_step(s: SpcState, q_ref: float, q_meas: float, gains: SpcGains, dt: float) -> tuple[SpcState, float]:
    """PI on the reactive power error sets the EMF slew rate; E stays within [0, e_max]."""
    error = q_ref - q_meas
    rpc, rate = pi_step(s.rpc, error, gains.k_pq, gains.k_iq, dt)
    e_mag = s.e_mag + rate * dt
    if e_mag > gains.e_max:
        e_mag = gains.e_max
        if error > 0.0:
            rpc = replace(rpc, integrator=s.rpc.integrator)
    elif e_mag < 0.0:
        e_mag = 0.0
        if error < 0.0:
            rpc = replace(rpc, integrator=s.rpc.integrator)
    return replace(s, rpc=rpc, e_mag=e_mag), e_mag


def virtual_admittance_step(
    s: SpcState, e: AlphaBeta, v_pcc: AlphaBeta, r_v_dyn: float, l_v: float, dt: float, omega_0: float
) -> tuple[SpcState, AlphaBeta]:
    """i_ref = (e - v)/(r_v_dyn + s*l_v/w0), trapezoidal; r_v_dyn is taken fresh every call."""
    inductance = l_v / omega_0
    denom = 2.0 * inductance + r_v_dyn * dt
    a = (2.0 * inductance - r_v_dyn * dt) / denom
    b = dt / denom
    u = AlphaBeta(e.alpha - v_pcc.alpha, e.beta - v_pcc.beta)
    i_ref = AlphaBeta(
        a * s.adm_i.alpha + b * (u.alpha + s.adm_u.alpha),
        a * s.adm_i.beta + b * (u.beta + s.adm_u.beta),
    )
    return replace(s, adm_i=i_ref, adm_u=u), i_ref


def circular_limit(i_ref: AlphaBeta, i_lim: float) -> AlphaBeta:
    magnitude = math.hypot(i_ref.alpha, i_ref.beta)
    if magnitude > i_lim:
        k = i_lim / magnitude
        return AlphaBeta(i_ref.alpha * k, i_ref.beta * k)
    return i_ref


def spc_control_step(
    s: SpcState,
    meas: PlantMeasurements,
    refs: tuple[float, float],
    r_v_dyn: float,
    gains: SpcGains,
    dt: float,
) -> tuple[SpcState, AlphaBeta, SpcTelemetry]:
    """One control period: P&Q -> PLC/RPC -> EMF -> admittance -> limiter -> PR -> voltage command."""
    p, q = per_unit_pq(meas.v_pcc, meas.i_g)
    if not (math.isfinite(p) and math.isfinite(q)):
        raise FloatingPointError(f"non-finite measurement at t={meas.t:.6f} s")

    theta = s.theta
    s, omega, _ = plc_step(s, refs[0], p, gains, dt)
    s, e_mag = rpc_step(s, refs[1], q, gains, dt)
    e = AlphaBeta(e_mag * math.cos(theta), e_mag * math.sin(theta))

    s, i_ref = virtual_admittance_step(s, e, meas.v_pcc, r_v_dyn, gains.l_v, dt, gains.omega_0)
    i_ref_lim = circular_limit(i_ref, gains.i_lim)
    limiter_active = i_ref_lim is not i_ref

    cc_alpha, u_alpha = pr_step(s.cc_alpha, i_ref_lim.alpha - meas.i_c.alpha, dt)
    cc_beta, u_beta = pr_step(s.cc_beta, i_ref_lim.beta - meas.i_c.beta, dt)
    v_conv = AlphaBeta(meas.v_cf.alpha + u_alpha, meas.v_cf.beta + u_beta)

    s = replace(s, cc_alpha=cc_alpha, cc_beta=cc_beta, limiter_active=limiter_active)
    telemetry = SpcTelemetry(p, q, omega, e_mag, theta, i_ref, i_ref_lim, limiter_active)
    return s, v_conv, telemetry


def state_for_operating_point(point: OperatingPoint, gains: SpcGains, dt: float, t: float = 0.0) -> SpcState:
    """Controller memory consistent with a phasor steady state sampled at t.

    The EMF is placed so the admittance delivers i_c; the resonators are loaded
    with the free oscillation that bridges the capacitor-voltage feedforward to
    the converter voltage, including the half-period lag of the held output.
    """
    w0 = gains.omega_0
    e_phasor = point.v_pcc + complex(gains.r_v, gains.l_v) * point.i_c
    rot_now = cmath.exp(1j * w0 * t)
    rot_prev = cmath.exp(1j * w0 * (t - dt))

    half = 0.5 * w0 * dt
    held = point.v_conv * cmath.exp(1j * half) * (half / math.sin(half))
    resonant = held - point.v_cf
    y_now = resonant * rot_now
    y_prev = resonant * rot_prev

    s = SpcState.initial(gains, theta=cmath.phase(e_phasor * rot_now))
    return replace(
        s,
        e_mag=abs(e_phasor),
        adm_i=AlphaBeta.from_complex(point.i_c * rot_prev),
        adm_u=AlphaBeta.from_complex((e_phasor - point.v_pcc) * rot_prev),
        cc_alpha=pr_free_oscillation(s.cc_alpha, y_now.real, y_prev.real),
        cc_beta=pr_free_oscillation(s.cc_beta, y_now.imag, y_prev.imag),
    )
