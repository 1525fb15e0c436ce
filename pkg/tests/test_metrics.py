"""Tests for overshoot, settling time and peak current extraction."""

import json
import math

import numpy as np
import pytest

from app.harness import run_scenario
from app.metrics import overshoot, peak_current, settling_time, summarize_scenario

DT = 1e-4


def second_order_step(zeta: float, omega_n: float, t: np.ndarray) -> np.ndarray:
    omega_d = omega_n * math.sqrt(1.0 - zeta * zeta)
    decay = np.exp(-zeta * omega_n * t)
    return 1.0 - decay * (np.cos(omega_d * t) + zeta / math.sqrt(1.0 - zeta * zeta) * np.sin(omega_d * t))


class TestOvershoot:
    """Test cases for overshoot extraction."""

    def test_constant_signal_has_none(self):
        """Test a signal sitting on its reference has zero overshoot."""
        t = np.arange(0.0, 0.1, DT)
        assert overshoot(t, np.full_like(t, 0.7), 0.7) == 0.0

    def test_second_order_step(self):
        """zeta = 0.5627 overshoots by exp(-pi*zeta/sqrt(1 - zeta^2)), about 11.8 %."""
        t = np.arange(0.0, 1.0, DT)
        y = second_order_step(0.5627, 30.0, t)
        expected = math.exp(-math.pi * 0.5627 / math.sqrt(1.0 - 0.5627**2))
        assert overshoot(t, y, 1.0) == pytest.approx(expected, abs=1e-3)
        assert overshoot(t, y, 1.0) == pytest.approx(0.118, abs=5e-3)

    def test_downward_step_counts_undershoot(self):
        """Test a step down measures overshoot below the final value."""
        t = np.arange(0.0, 1.0, DT)
        y = 1.0 - 0.5 * second_order_step(0.5627, 30.0, t)
        assert overshoot(t, y, 0.5, scale=0.5) == pytest.approx(0.118, abs=5e-3)

    def test_window_starting_on_reference_counts_any_deviation(self):
        """Test a window that starts on the reference counts deviation either way."""
        t = np.arange(0.0, 0.1, DT)
        y = 0.25 * np.sin(2.0 * math.pi * 50.0 * t)
        assert overshoot(t, y, 0.0, scale=1.0) == pytest.approx(0.25, rel=1e-3)

    def test_window_selects_samples(self):
        """Test only samples inside the window are considered."""
        t = np.arange(0.0, 0.2, DT)
        y = np.where(t < 0.1, 5.0, 1.0)
        assert overshoot(t, y, 1.0, window=(0.1, 0.2)) == 0.0

    def test_empty_window_raises(self):
        """Test a window with no samples is an error."""
        t = np.arange(0.0, 0.1, DT)
        with pytest.raises(ValueError, match="no samples"):
            overshoot(t, t, 1.0, window=(0.5, 0.6))

    def test_zero_reference_needs_scale(self):
        """Test a zero final value needs an explicit scale."""
        t = np.arange(0.0, 0.1, DT)
        with pytest.raises(ValueError, match="scale"):
            overshoot(t, t, 0.0)


class TestSettlingTime:
    """Test cases for settling time extraction."""

    def test_already_settled(self):
        """Test a signal inside the band from the start settles at once."""
        t = np.arange(0.0, 0.1, DT)
        assert settling_time(t, np.full_like(t, 1.01), 1.0, 0.02) == 0.0

    def test_first_order_decay(self):
        """exp(-t/tau) enters a 2 % band at ln(50) * tau."""
        tau = 0.02
        t = np.arange(0.0, 0.5, DT)
        result = settling_time(t, np.exp(-t / tau), 0.0, 0.02, scale=1.0)
        assert result is not None
        assert abs(result - math.log(50.0) * tau) <= DT

    def test_measured_from_window_start(self):
        """Test settling time counts from the window start."""
        tau = 0.02
        t = np.arange(0.0, 0.6, DT)
        y = np.where(t < 0.1, 1.0, np.exp(-(t - 0.1) / tau))
        result = settling_time(t, y, 0.0, 0.02, window=(0.1, 0.6), scale=1.0)
        assert result is not None
        assert abs(result - math.log(50.0) * tau) <= 2 * DT

    def test_never_settles(self):
        """Test a signal that never enters the band gives None."""
        t = np.arange(0.0, 0.1, DT)
        assert settling_time(t, t, 0.0, 0.01, scale=0.01) is None

    def test_band_must_be_positive(self):
        """Test a non-positive band is an error."""
        t = np.arange(0.0, 0.1, DT)
        with pytest.raises(ValueError, match="band"):
            settling_time(t, t, 1.0, 0.0)


class TestPeakCurrent:
    """Test cases for peak current extraction."""

    def test_peak_of_rotating_vector(self):
        """Test the peak of a growing rotating vector and its time."""
        t = np.arange(0.0, 0.04, DT)
        amplitude = np.where(t < 0.02, 0.5, 1.1)
        alpha = amplitude * np.cos(2.0 * math.pi * 50.0 * t)
        beta = amplitude * np.sin(2.0 * math.pi * 50.0 * t)
        value, when = peak_current(t, alpha, beta)
        assert value == pytest.approx(1.1)
        assert when >= 0.02

    def test_first_peak_wins(self):
        """Test equal peaks report the earliest time."""
        t = np.array([0.0, 0.1, 0.2])
        value, when = peak_current(t, np.array([0.3, 1.0, 1.0]), np.zeros(3))
        assert (value, when) == (1.0, 0.1)

    def test_empty_series_raises(self):
        """Test an empty series is an error."""
        with pytest.raises(ValueError):
            peak_current(np.array([]), np.array([]), np.array([]))


class TestScenarioSummary:
    """Test cases for the run summary written as metrics.json."""

    def test_fault_at_start_has_no_pre_fault_power(self, make_config):
        """Test a fault from t = 0 leaves the pre-fault power unset and the summary valid JSON."""
        cfg = make_config(duration=0.05, fault={"t_fault_on": 0.0, "t_fault_clear": 0.02})
        summary = summarize_scenario(run_scenario(cfg), cfg)
        assert summary.p_pre_fault is None
        assert math.isfinite(summary.p_final)
        payload = json.dumps(summary.model_dump(), allow_nan=False)
        assert json.loads(payload)["p_pre_fault"] is None

    def test_pre_fault_power_from_steady_window(self, make_config):
        """Test the pre-fault power averages the samples before inception."""
        cfg = make_config(duration=0.08, fault={"t_fault_on": 0.04, "t_fault_clear": 0.06})
        summary = summarize_scenario(run_scenario(cfg), cfg)
        assert summary.p_pre_fault == pytest.approx(cfg.p_s, abs=0.05)
