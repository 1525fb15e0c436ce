"""Scenario orchestration: steady-state initialization and the fixed-step simulation loop."""

import cmath
import logging
import time
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from app.blocks import SequenceSeparatorState, sequence_separate
from app.faultmode import (
    FaultModeState,
    Mode,
    dynamic_damping_step,
    fault_detector_step,
    fault_references,
    select_references,
)
from app.frames import AlphaBeta, inverse_clarke, park
from app.models import ScenarioConfig
from app.plant import (
    NonFiniteStateError,
    OperatingPoint,
    PlantState,
    measure,
    pcc_phasor_for_power,
    plant_step,
    state_at,
    steady_state_phasors,
)
from app.spc import SpcGains, droop_references, spc_control_step, state_for_operating_point

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

COLUMNS: tuple[str, ...] = (
    "t",
    "v_pcc_alpha",
    "v_pcc_beta",
    "v_pcc_a",
    "v_pcc_b",
    "v_pcc_c",
    "i_g_alpha",
    "i_g_beta",
    "i_g_d",
    "i_g_q",
    "i_c_alpha",
    "i_c_beta",
    "i_c_d",
    "i_c_q",
    "i_ref_d",
    "i_ref_q",
    "i_ref_lim_d",
    "i_ref_lim_q",
    "i_ref_lim_alpha",
    "i_ref_lim_beta",
    "p",
    "q",
    "p_ref",
    "q_ref",
    "omega",
    "e_mag",
    "theta",
    "r_v_dyn",
    "sf",
    "fm",
    "limiter_active",
    "v_plus",
    "v_minus",
)


class CsvSchemaError(ValueError):
    """A CSV file does not carry the time-series columns in the expected order."""


class TimeSeries:
    """Uniformly sampled simulation record backed by a pandas frame with fixed columns."""

    def __init__(self, frame: pd.DataFrame):
        if tuple(frame.columns) != COLUMNS:
            raise CsvSchemaError(f"expected columns {list(COLUMNS)}, got {list(frame.columns)}")
        self.frame = frame

    @classmethod
    def from_array(cls, rows: np.ndarray) -> "TimeSeries":
        return cls(pd.DataFrame(rows, columns=list(COLUMNS)))

    def __len__(self) -> int:
        return len(self.frame)

    def __getitem__(self, column: str) -> np.ndarray:
        return self.frame[column].to_numpy()

    @property
    def t(self) -> np.ndarray:
        return self["t"]

    def window(self, t0: float, t1: float) -> "TimeSeries":
        t = self.t
        return TimeSeries(self.frame.loc[(t >= t0) & (t <= t1)].reset_index(drop=True))

    def to_csv(self, path: Path) -> None:
        self.frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")

    @classmethod
    def from_csv(cls, path: Path) -> "TimeSeries":
        try:
            frame = pd.read_csv(path, dtype=float)
        except pd.errors.EmptyDataError as exc:
            raise CsvSchemaError(f"{path} is empty") from exc
        except ValueError as exc:
            raise CsvSchemaError(f"{path} holds non-numeric data: {exc}") from exc
        series = cls(frame)
        if len(series) == 0:
            raise CsvSchemaError(f"{path} has a header but no samples")
        return series


class SimulationDiverged(RuntimeError):
    """The plant or controller produced a non-finite value."""

    def __init__(self, partial: TimeSeries, step: int, t: float, cause: str):
        super().__init__(f"simulation diverged at step {step} (t={t:.6f} s): {cause}")
        self.partial = partial
        self.step = step
        self.t = t


def initial_operating_point(cfg: ScenarioConfig, gains: SpcGains, iterations: int = 50) -> OperatingPoint:
    """Phasor steady state that satisfies the droop laws at the setpoints.

    Q depends on |v_pcc| through the voltage droop, so Q is solved by Newton
    iteration; the residual is monotone in Q.
    """
    z_grid = cfg.line_impedance
    e_grid = cfg.plant.grid_v

    def pcc(q: float) -> complex:
        return pcc_phasor_for_power(complex(cfg.p_s, q), e_grid, z_grid)

    def residual(q: float) -> float:
        _, q_ref = droop_references(
            cfg.p_s, cfg.q_s, gains.omega_0, gains.omega_0, gains.e_en, abs(pcc(q)), gains.d_p, gains.d_q
        )
        return q - q_ref

    q = cfg.q_s
    for _ in range(iterations):
        r = residual(q)
        if abs(r) < 1e-12:
            break
        slope = (residual(q + 1e-7) - r) / 1e-7
        q -= r / slope
    else:
        logger.warning("Operating-point reactive power did not converge (residual %.3g pu)", residual(q))

    v_pcc = pcc(q)
    i_g = (complex(cfg.p_s, q) / v_pcc).conjugate()
    return steady_state_phasors(v_pcc, i_g, cfg.plant)


def _prefilled_separator(point: OperatingPoint, cfg: ScenarioConfig, t0: float) -> SequenceSeparatorState:
    sep = SequenceSeparatorState.for_rate(cfg.f_s, cfg.base.f_0)
    dt = cfg.control_dt
    w0 = cfg.base.omega_0
    history = tuple(
        AlphaBeta.from_complex(point.v_pcc * cmath.exp(1j * w0 * (t0 - (sep.length - i) * dt)))
        for i in range(sep.length)
    )
    return SequenceSeparatorState(sep.length, history)


def run_scenario(cfg: ScenarioConfig) -> TimeSeries:
    """Simulate cfg from its steady state; control at f_s, plant at f_s * plant_substeps.

    Per control step: sample, sequence separation, fault detection, reference
    selection, dynamic damping, SPC step, then the plant substeps with the
    converter voltage held.
    """
    gains = SpcGains.from_params(cfg.spc, cfg.base)
    dt = cfg.control_dt
    h = cfg.plant_dt
    w0 = cfg.base.omega_0
    n_steps = int(round(cfg.duration * cfg.f_s))
    decimation = cfg.decimation
    schedule = cfg.fault
    fm_params = cfg.faultmode
    trigger_on_restore = fm_params.damping_trigger == "voltage_restored"

    point = initial_operating_point(cfg, gains)
    plant = state_at(point, 0.0, w0)
    spc = state_for_operating_point(point, gains, dt, 0.0)
    sep = _prefilled_separator(point, cfg, 0.0)
    fm_state = FaultModeState.initial(gains.r_v, fm_params)

    rows = np.empty(((n_steps + decimation - 1) // decimation, len(COLUMNS)))
    n_rows = 0
    logger.info(
        "Running scenario %s: %d control steps, %d plant substeps each", cfg.name, n_steps, cfg.plant_substeps
    )
    started = time.perf_counter()

    k = 0
    t = 0.0
    try:
        for k in range(n_steps):
            t = k * dt
            plant = PlantState(plant.x, t)
            meas = measure(plant, schedule, cfg.plant, w0)

            sep, seq = sequence_separate(sep, meas.v_pcc)
            droop = droop_references(
                cfg.p_s, cfg.q_s, w0, spc.omega, gains.e_en, seq.mag_plus, gains.d_p, gains.d_q
            )
            fault = fault_references(seq.mag_plus, seq.mag_minus, droop)
            fm_state, det = fault_detector_step(fm_state, seq.mag_plus, droop[0], fault[0], dt, fm_params)
            if det.fault_entered:
                logger.info("t=%.4f s: fault mode entered (|v+| = %.3f pu)", t, seq.mag_plus)
            elif det.fault_cleared:
                logger.info("t=%.4f s: back to normal mode", t)
            refs = select_references(det.fm, droop, fault)

            triggered = det.voltage_restored if trigger_on_restore else det.fault_cleared
            fm_state, r_v_dyn = dynamic_damping_step(fm_state, triggered, gains.r_v, dt, fm_params)

            spc, v_conv, tel = spc_control_step(spc, meas, refs, r_v_dyn, gains, dt)

            if k % decimation == 0:
                theta = tel.theta
                v_abc = inverse_clarke(meas.v_pcc)
                i_g_dq = park(meas.i_g, theta)
                i_c_dq = park(meas.i_c, theta)
                i_ref_dq = park(tel.i_ref, theta)
                i_lim_dq = park(tel.i_ref_lim, theta)
                rows[n_rows] = (
                    t,
                    meas.v_pcc.alpha,
                    meas.v_pcc.beta,
                    v_abc.a,
                    v_abc.b,
                    v_abc.c,
                    meas.i_g.alpha,
                    meas.i_g.beta,
                    i_g_dq.d,
                    i_g_dq.q,
                    meas.i_c.alpha,
                    meas.i_c.beta,
                    i_c_dq.d,
                    i_c_dq.q,
                    i_ref_dq.d,
                    i_ref_dq.q,
                    i_lim_dq.d,
                    i_lim_dq.q,
                    tel.i_ref_lim.alpha,
                    tel.i_ref_lim.beta,
                    tel.p,
                    tel.q,
                    refs[0],
                    refs[1],
                    tel.omega,
                    tel.e_mag,
                    theta,
                    r_v_dyn,
                    float(det.sf),
                    float(det.fm is Mode.FAULT),
                    float(tel.limiter_active),
                    seq.mag_plus,
                    seq.mag_minus,
                )
                n_rows += 1

            for _ in range(cfg.plant_substeps):
                plant, _ = plant_step(plant, v_conv, schedule, cfg.plant, h, w0)
    except (NonFiniteStateError, FloatingPointError) as exc:
        partial = TimeSeries.from_array(rows[:n_rows].copy())
        logger.warning("Scenario %s diverged at t=%.6f s", cfg.name, t)
        raise SimulationDiverged(partial, k, t, str(exc)) from exc

    logger.info("Scenario %s finished in %.2f s", cfg.name, time.perf_counter() - started)
    return TimeSeries.from_array(rows[:n_rows])


def fm_transitions(series: TimeSeries) -> list[tuple[float, str]]:
    """(time, "fault" | "normal") for every change of the fault-mode column."""
    fm = series["fm"]
    t = series.t
    changes = np.flatnonzero(np.diff(fm) != 0) + 1
    return [(float(t[i]), "fault" if fm[i] > 0.5 else "normal") for i in changes]


def angle_steps(series: TimeSeries) -> np.ndarray:
    """Per-sample advance of the controller angle, unwrapped."""
    return np.diff(np.unwrap(series["theta"]))


def is_finite(series: TimeSeries, columns: Optional[tuple[str, ...]] = None) -> bool:
    values = series.frame[list(columns or COLUMNS)].to_numpy()
    return bool(np.isfinite(values).all())


def expected_angle_steps(series: TimeSeries, dt: float) -> np.ndarray:
    """omega*dt for each recorded step, for comparison with angle_steps at decimation 1."""
    return series["omega"][:-1] * dt

