"""Average-value converter, LCL filter, line and Thevenin grid with a symmetrical fault.

Per-unit on the converter rating; time in seconds. Inductances and the
capacitance are given as per-unit reactance/susceptance at omega_0, so the
state equations carry a 1/omega_0 factor. Each alpha/beta axis obeys

    L_cf/w0 di_c/dt  = v_conv - v_cf - r i_c
    C_f/w0  dv_cf/dt = i_c - i_g
    (L_gf + L_grid)/w0 di_g/dt = v_cf - e_grid - r i_g

integrated with the trapezoidal rule.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from app.frames import AlphaBeta
from app.models import NOMINAL_OMEGA, FaultSchedule, PlantParams

logger = logging.getLogger(__name__)


class NonFiniteStateError(ArithmeticError):
    """The plant state left the finite range."""

    def __init__(self, t: float, state: np.ndarray):
        super().__init__(f"non-finite plant state at t={t:.6f} s: {state.tolist()}")
        self.t = t
        self.state = state


@dataclass(frozen=True, slots=True)
class PlantState:
    # rows: i_c, v_cf, i_g; columns: alpha, beta
    x: np.ndarray
    t: float = 0.0

    @classmethod
    def zero(cls, t: float = 0.0) -> "PlantState":
        return cls(np.zeros((3, 2)), t)

    @classmethod
    def from_signals(cls, i_c: AlphaBeta, v_cf: AlphaBeta, i_g: AlphaBeta, t: float = 0.0) -> "PlantState":
        return cls(np.array([i_c, v_cf, i_g], dtype=float), t)

    @property
    def i_c(self) -> AlphaBeta:
        return AlphaBeta(float(self.x[0, 0]), float(self.x[0, 1]))

    @property
    def v_cf(self) -> AlphaBeta:
        return AlphaBeta(float(self.x[1, 0]), float(self.x[1, 1]))

    @property
    def i_g(self) -> AlphaBeta:
        return AlphaBeta(float(self.x[2, 0]), float(self.x[2, 1]))


class PlantMeasurements(NamedTuple):
    v_pcc: AlphaBeta
    v_cf: AlphaBeta
    i_c: AlphaBeta
    i_g: AlphaBeta
    t: float


class OperatingPoint(NamedTuple):
    """Phasors (peak, pu) of a sinusoidal steady state at omega_0."""

    v_pcc: complex
    i_g: complex
    v_cf: complex
    i_c: complex
    v_conv: complex


def scr_to_impedance(scr: float) -> float:
    """Purely reactive Thevenin impedance of a grid with the given short-circuit ratio."""
    if not scr > 1.0:
        raise ValueError(f"scr must exceed 1 (grid stronger than the converter rating), got {scr}")
    return 1.0 / scr


def line_impedance(params: PlantParams) -> float:
    if params.z_l is None:
        raise ValueError("plant.z_l is unresolved; set scr or plant.z_l")
    return params.z_l


def source_mode(t: float, schedule: Optional[FaultSchedule], params: PlantParams) -> tuple[float, float]:
    """(Thevenin magnitude, Thevenin reactance) valid at time t."""
    if schedule is not None and schedule.active(t):
        return schedule.retained_voltage, schedule.fault_impedance
    return params.grid_v, line_impedance(params)


def _rotating(magnitude: float, angle: float) -> AlphaBeta:
    return AlphaBeta(magnitude * math.cos(angle), magnitude * math.sin(angle))


def thevenin_source(
    t: float, schedule: Optional[FaultSchedule], params: PlantParams, omega_0: float = NOMINAL_OMEGA
) -> tuple[AlphaBeta, float]:
    """Grid EMF and impedance at t. The angle omega_0*t runs through fault transitions."""
    magnitude, z_grid = source_mode(t, schedule, params)
    return _rotating(magnitude, omega_0 * t), z_grid


@lru_cache(maxsize=64)
def _discretize(
    dt: float, l_cf: float, l_gf: float, c_f: float, r: float, l_grid: float, omega_0: float
) -> tuple[np.ndarray, np.ndarray]:
    energy = np.diag([l_cf, c_f, l_gf + l_grid]) / omega_0
    coupling = np.array(
        [
            [-r, -1.0, 0.0],
            [1.0, 0.0, -1.0],
            [0.0, 1.0, -r],
        ]
    )
    inputs = np.array(
        [
            [1.0, 0.0],
            [0.0, 0.0],
            [0.0, -1.0],
        ]
    )
    a = np.linalg.solve(energy, coupling)
    b = np.linalg.solve(energy, inputs)
    eye = np.eye(3)
    lhs = eye - 0.5 * dt * a
    m = np.linalg.solve(lhs, eye + 0.5 * dt * a)
    n = np.linalg.solve(lhs, 0.5 * dt * b)
    m.flags.writeable = False
    n.flags.writeable = False
    return m, n


def measure(
    state: PlantState, schedule: Optional[FaultSchedule], params: PlantParams, omega_0: float = NOMINAL_OMEGA
) -> PlantMeasurements:
    """Sample the plant at state.t; the PCC voltage is reconstructed algebraically."""
    e_grid, z_grid = thevenin_source(state.t, schedule, params, omega_0)
    v_cf = state.v_cf
    i_g = state.i_g
    share = z_grid / (params.l_gf + z_grid)
    r = params.r_parasitic
    v_pcc = AlphaBeta(
        e_grid.alpha + share * (v_cf.alpha - e_grid.alpha - r * i_g.alpha),
        e_grid.beta + share * (v_cf.beta - e_grid.beta - r * i_g.beta),
    )
    return PlantMeasurements(v_pcc, v_cf, state.i_c, i_g, state.t)


def plant_step(
    state: PlantState,
    v_conv: AlphaBeta,
    schedule: Optional[FaultSchedule],
    params: PlantParams,
    dt: float,
    omega_0: float = NOMINAL_OMEGA,
) -> tuple[PlantState, PlantMeasurements]:
    """Advance one substep with v_conv held; the source keeps the mode valid at the substep start."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    t0 = state.t
    t1 = t0 + dt
    magnitude, z_grid = source_mode(t0, schedule, params)
    m, n = _discretize(dt, params.l_cf, params.l_gf, params.c_f, params.r_parasitic, z_grid, omega_0)

    e0 = _rotating(magnitude, omega_0 * t0)
    e1 = _rotating(magnitude, omega_0 * t1)
    drive = np.array(
        [
            [2.0 * v_conv.alpha, 2.0 * v_conv.beta],
            [e0.alpha + e1.alpha, e0.beta + e1.beta],
        ]
    )
    x1 = m @ state.x + n @ drive
    if not np.isfinite(x1).all():
        raise NonFiniteStateError(t1, x1)

    new_state = PlantState(x1, t1)
    return new_state, measure(new_state, schedule, params, omega_0)


def stored_energy(state: PlantState, params: PlantParams, z_grid: float, omega_0: float = NOMINAL_OMEGA) -> float:
    """Magnetic plus electric energy (pu*s) summed over both axes."""
    weights = np.array([params.l_cf, params.c_f, params.l_gf + z_grid]) / omega_0
    return 0.5 * float(weights @ (state.x**2).sum(axis=1))


def steady_state_phasors(v_pcc: complex, i_g: complex, params: PlantParams) -> OperatingPoint:
    """Back-substitute the LCL branch from the PCC toward the converter."""
    r = params.r_parasitic
    v_cf = v_pcc + complex(r, params.l_gf) * i_g
    i_c = i_g + 1j * params.c_f * v_cf
    v_conv = v_cf + complex(r, params.l_cf) * i_c
    return OperatingPoint(v_pcc, i_g, v_cf, i_c, v_conv)


def pcc_phasor_for_power(
    s_injected: complex, e_grid: float, z_grid: float, iterations: int = 200, tol: float = 1e-13
) -> complex:
    """PCC voltage phasor delivering s_injected into a Thevenin source behind j*z_grid."""
    v = complex(e_grid, 0.0) if e_grid > 0 else complex(1.0, 0.0)
    for _ in range(iterations):
        i_g = (s_injected / v).conjugate()
        v_next = e_grid + 1j * z_grid * i_g
        if abs(v_next - v) < tol:
            return v_next
        v = v_next
    logger.warning("PCC phasor iteration did not converge (S=%s, z=%.3g)", s_injected, z_grid)
    return v


def state_at(point: OperatingPoint, t: float, omega_0: float = NOMINAL_OMEGA) -> PlantState:
    """Instantaneous plant state of a phasor steady state."""
    rot = complex(math.cos(omega_0 * t), math.sin(omega_0 * t))
    return PlantState.from_signals(
        AlphaBeta.from_complex(point.i_c * rot),
        AlphaBeta.from_complex(point.v_cf * rot),
        AlphaBeta.from_complex(point.i_g * rot),
        t,
    )
