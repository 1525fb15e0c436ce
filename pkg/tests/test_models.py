"""Tests for scenario document validation."""

import logging

import pytest
from pydantic import ValidationError

from app.models import FaultSchedule, RunManifest, ScenarioConfig, SpcParams, SweepPoint


class TestScenarioConfig:
    """Test cases for ScenarioConfig validation."""

    def test_scr_resolves_line_impedance(self, make_config):
        """Test that the short-circuit ratio sets the line reactance."""
        cfg = make_config(scr=2.0)
        assert cfg.plant.z_l == pytest.approx(0.5)
        assert cfg.line_impedance == pytest.approx(0.5)

    def test_explicit_impedance(self):
        """Test a scenario may give the line impedance instead of scr."""
        cfg = ScenarioConfig.model_validate({"duration": 0.1, "plant": {"z_l": 0.1}})
        assert cfg.scr is None
        assert cfg.line_impedance == 0.1

    def test_conflicting_grid_strength(self, make_config):
        """Test scr and z_l that disagree are rejected."""
        with pytest.raises(ValidationError, match="disagree"):
            make_config(scr=5.0, plant={"z_l": 0.3})

    def test_grid_strength_required(self):
        """Test that one of scr and z_l must be given."""
        with pytest.raises(ValidationError, match="scr or plant.z_l"):
            ScenarioConfig.model_validate({"duration": 0.1})

    @pytest.mark.parametrize("scr", [1.0, 0.8])
    def test_scr_at_or_below_one(self, make_config, scr):
        """Test that grids weaker than the converter rating are rejected."""
        with pytest.raises(ValidationError):
            make_config(scr=scr)

    def test_line_impedance_bounds(self):
        """Test z_l outside its range is rejected."""
        with pytest.raises(ValidationError):
            ScenarioConfig.model_validate({"duration": 0.1, "plant": {"z_l": 0.8}})

    def test_scr_resolving_outside_impedance_bounds(self, make_config):
        """Test an scr whose line impedance exceeds the plant bound is rejected."""
        with pytest.raises(ValidationError, match="outside its bounds"):
            make_config(scr=1.5)
        assert make_config(scr=2.0).plant.z_l == pytest.approx(0.5)

    def test_default_current_loop_gain_margin(self, make_config):
        """Test the default current gain sits well inside the one-sample-delay limit."""
        assert make_config().current_loop_gain_ratio == pytest.approx(0.351, abs=1e-3)

    def test_high_current_loop_gain_warns(self, make_config, caplog):
        """Test a current gain close to the delay limit is accepted with a warning."""
        caplog.set_level(logging.WARNING, logger="app.models")
        cfg = make_config(spc={"k_p_cc": 25.0})
        assert cfg.current_loop_gain_ratio == pytest.approx(0.877, abs=1e-3)
        assert any("k_p_cc" in r.getMessage() for r in caplog.records)

    def test_current_loop_gain_past_limit(self, make_config):
        """Test a current gain beyond L_cf/dt is rejected."""
        with pytest.raises(ValidationError, match="L_cf/dt"):
            make_config(spc={"k_p_cc": 30.0})

    def test_unknown_keys_rejected(self, make_config):
        """Test misspelled keys are errors at every level."""
        with pytest.raises(ValidationError):
            make_config(damping_x=1.0)
        with pytest.raises(ValidationError):
            make_config(faultmode={"x": 1.0})

    def test_step_sizes(self, make_config):
        """Test control and plant steps follow f_s and the substep count."""
        cfg = make_config(f_s=5000.0, plant_substeps=4)
        assert cfg.control_dt == pytest.approx(2e-4)
        assert cfg.plant_dt == pytest.approx(5e-5)

    def test_damping_trigger_choices(self, make_config):
        """Test the damping trigger accepts only the two known events."""
        assert make_config(faultmode={"damping_trigger": "mode_exit"}).faultmode.damping_trigger == "mode_exit"
        with pytest.raises(ValidationError):
            make_config(faultmode={"damping_trigger": "fault_entered"})


class TestFaultSchedule:
    """Test cases for FaultSchedule."""

    def test_clearing_after_inception(self):
        """Test the fault must clear after it starts."""
        with pytest.raises(ValidationError, match="earlier"):
            FaultSchedule(t_fault_on=0.2, t_fault_clear=0.1)

    def test_active_interval_is_half_open(self):
        """Test the fault is active from inception up to, not including, clearing."""
        schedule = FaultSchedule(t_fault_on=0.1, t_fault_clear=0.2)
        assert not schedule.active(0.0999)
        assert schedule.active(0.1)
        assert not schedule.active(0.2)


class TestSpcParams:
    """Test cases for SpcParams."""

    def test_inertia_outside_range_warns(self, caplog):
        """Test an unusual inertia constant is accepted with a warning."""
        caplog.set_level(logging.WARNING, logger="app.models")
        params = SpcParams(h=8.0)
        assert params.h == 8.0
        assert "outside the usual" in caplog.text

    def test_negative_gain_rejected(self):
        """Test gains must be positive."""
        with pytest.raises(ValidationError):
            SpcParams(k_pp=-1.0)


class TestRegistryRows:
    """Test cases for run registry row defaults."""

    def test_creation_times_are_timezone_aware(self):
        """Test new registry rows stamp their creation time in UTC."""
        run = RunManifest(scenario="s", out_dir="out", tool_version="0")
        point = SweepPoint(param="scr", value=2.0, run_dir="out")
        for row in (run, point):
            assert row.created_at.tzinfo is not None
            assert row.created_at.utcoffset().total_seconds() == 0
