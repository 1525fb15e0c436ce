"""Scalar figures of merit extracted from sampled signals and scenario records."""

from typing import Optional

import numpy as np
from sqlmodel import SQLModel

from app.harness import SCHEMA_VERSION, TimeSeries, fm_transitions
from app.models import ScenarioConfig

# Length of the tail averaged as "steady state" at the end of a run or before a fault.
STEADY_WINDOW = 0.1
# Span after clearing over which recovery overshoot is taken.
RECOVERY_WINDOW = 0.5


def _window_mask(t: np.ndarray, window: Optional[tuple[float, float]]) -> np.ndarray:
    if window is None:
        return np.ones_like(t, dtype=bool)
    t0, t1 = window
    return (t >= t0) & (t <= t1)


def overshoot(
    t: np.ndarray,
    signal: np.ndarray,
    reference: float,
    window: Optional[tuple[float, float]] = None,
    scale: Optional[float] = None,
) -> float:
    """Largest excursion past the reference, as a fraction of scale (default |reference|).

    If the window opens away from the reference only travel beyond it counts,
    so a step response reports its overshoot rather than its initial error.
    If it opens on the reference every deviation counts.
    """
    mask = _window_mask(t, window)
    if not mask.any():
        raise ValueError(f"window {window} holds no samples")
    norm = abs(reference) if scale is None else scale
    if norm <= 0:
        raise ValueError("reference is zero; pass an explicit scale")

    y = signal[mask] - reference
    start = y[0]
    if abs(start) <= 1e-12 * max(1.0, abs(reference)):
        excursion = float(np.max(np.abs(y)))
    else:
        excursion = max(0.0, float(np.max(-np.sign(start) * y)))
    return excursion / norm


def settling_time(
    t: np.ndarray,
    signal: np.ndarray,
    reference: float,
    band: float,
    window: Optional[tuple[float, float]] = None,
    scale: Optional[float] = None,
) -> Optional[float]:
    """Time from the window start until the signal stays within +-band*scale of reference.

    None when the signal is still outside the band at the last sample.
    """
    if band <= 0:
        raise ValueError("band must be positive")
    mask = _window_mask(t, window)
    if not mask.any():
        raise ValueError(f"window {window} holds no samples")
    norm = abs(reference) if scale is None else scale
    if norm <= 0:
        raise ValueError("reference is zero; pass an explicit scale")

    tw = t[mask]
    outside = np.flatnonzero(np.abs(signal[mask] - reference) > band * norm)
    if outside.size == 0:
        return 0.0
    last = int(outside[-1])
    if last == tw.size - 1:
        return None
    return float(tw[last + 1] - tw[0])


def peak_current(t: np.ndarray, alpha: np.ndarray, beta: np.ndarray) -> tuple[float, float]:
    if t.size == 0:
        raise ValueError("empty series")
    magnitude = np.hypot(alpha, beta)
    i = int(np.argmax(magnitude))
    return float(magnitude[i]), float(t[i])


class ScenarioSummary(SQLModel, table=False):
    """Headline figures of one run, written as metrics.json."""

    schema_version: int = SCHEMA_VERSION
    scenario: str
    samples: int
    peak_current: float
    peak_current_t: float
    peak_reference_current: float
    limiter_engaged: bool
    p_pre_fault: Optional[float] = None
    p_final: float
    fault_peak_current: Optional[float] = None
    fault_steady_peak_current: Optional[float] = None
    iq_recovery_overshoot: Optional[float] = None
    id_recovery_overshoot: Optional[float] = None
    recovery_settling_time: Optional[float] = None
    fm_entered_at: Optional[float] = None
    fm_cleared_at: Optional[float] = None
    fm_returned: bool = True
    transitions: list[tuple[float, str]] = []


def _mean(series: TimeSeries, column: str, t0: float, t1: float) -> Optional[float]:
    """Mean over [t0, t1), or None when no sample falls inside."""
    t = series.t
    mask = (t >= t0) & (t < t1)
    if not mask.any():
        return None
    return float(np.mean(series[column][mask]))


def _tail_mean(series: TimeSeries, column: str) -> float:
    t = series.t
    return float(np.mean(series[column][t >= t[-1] - STEADY_WINDOW]))


def _peak_in(series: TimeSeries, t0: float, t1: float) -> float:
    window = series.window(t0, t1)
    return peak_current(window.t, window["i_c_alpha"], window["i_c_beta"])[0]


def summarize_scenario(series: TimeSeries, cfg: ScenarioConfig) -> ScenarioSummary:
    """Peak currents, recovery overshoot and settling, mode transitions and steady power."""
    t = series.t
    t_end = float(t[-1])
    peak, peak_t = peak_current(t, series["i_c_alpha"], series["i_c_beta"])
    peak_ref, _ = peak_current(t, series["i_ref_lim_alpha"], series["i_ref_lim_beta"])
    transitions = fm_transitions(series)
    summary = ScenarioSummary(
        scenario=cfg.name,
        samples=len(series),
        peak_current=peak,
        peak_current_t=peak_t,
        peak_reference_current=peak_ref,
        limiter_engaged=bool(series["limiter_active"].max() > 0.5),
        p_final=_tail_mean(series, "p"),
        fm_returned=bool(series["fm"][-1] < 0.5),
        transitions=transitions,
    )

    fault = cfg.fault
    if fault is None:
        return summary

    t_on, t_clear = fault.t_fault_on, fault.t_fault_clear
    summary.p_pre_fault = _mean(series, "p", max(0.0, t_on - STEADY_WINDOW), t_on)
    summary.fault_peak_current = _peak_in(series, t_on, t_clear)
    settle_from = t_on + 2.0 / cfg.base.f_0
    if settle_from < t_clear:
        summary.fault_steady_peak_current = _peak_in(series, settle_from, t_clear)

    recovery = (t_clear, min(t_clear + RECOVERY_WINDOW, t_end))
    for axis in ("q", "d"):
        final = _tail_mean(series, f"i_c_{axis}")
        value = overshoot(t, series[f"i_c_{axis}"], final, recovery, scale=1.0)
        setattr(summary, f"i{axis}_recovery_overshoot", value)

    settle = []
    for axis in ("d", "q"):
        error = series[f"i_c_{axis}"] - series[f"i_ref_lim_{axis}"]
        settle.append(settling_time(t, error, 0.0, 0.05, (t_clear, t_end), scale=1.0))
    summary.recovery_settling_time = None if None in settle else max(s for s in settle if s is not None)

    summary.fm_entered_at = next((tt for tt, mode in transitions if mode == "fault" and tt >= t_on), None)
    summary.fm_cleared_at = next((tt for tt, mode in transitions if mode == "normal" and tt >= t_clear), None)
    return summary
