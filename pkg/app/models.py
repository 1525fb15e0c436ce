import logging
import math
from datetime import datetime, timezone
from typing import Any, Literal, Optional

from pydantic import ConfigDict, ValidationError, model_validator
from sqlalchemy import JSON, Column
from sqlmodel import Field, SQLModel

logger = logging.getLogger(__name__)

NOMINAL_OMEGA = 2.0 * math.pi * 50.0
# s_base that makes the rated K_ip = 5.86e-3 consistent with K_ip = w0 / (2 H S_n) at H = 2
DEFAULT_S_BASE = NOMINAL_OMEGA / (2.0 * 2.0 * 5.86e-3)
# current-loop gains above this share of L_cf/dt ring against the LCL resonance
CURRENT_LOOP_GAIN_WARN = 0.5


class ConfigSection(SQLModel, table=False):
    """Base for scenario document sections: unknown keys are errors."""

    model_config = ConfigDict(extra="forbid")  # type: ignore[assignment]


# Non-persistent schemas (scenario documents)
class PerUnitBase(ConfigSection):
    s_base: float = Field(default=DEFAULT_S_BASE, gt=0)  # VA
    v_base: float = Field(default=400.0, gt=0)  # phase-peak V
    omega_0: float = Field(default=NOMINAL_OMEGA, gt=0)  # rad/s

    @property
    def i_base(self) -> float:
        return 2.0 * self.s_base / (3.0 * self.v_base)

    @property
    def z_base(self) -> float:
        return self.v_base / self.i_base

    @property
    def f_0(self) -> float:
        return self.omega_0 / (2.0 * math.pi)

    def power_to_pu(self, watts: float) -> float:
        return watts / self.s_base

    def voltage_to_pu(self, volts: float) -> float:
        return volts / self.v_base

    def current_to_pu(self, amps: float) -> float:
        return amps / self.i_base

    def impedance_to_pu(self, ohms: float) -> float:
        return ohms / self.z_base

    def inductance_to_pu(self, henry: float) -> float:
        """Reactance at omega_0 in per-unit."""
        return self.omega_0 * henry / self.z_base


class PlantParams(ConfigSection):
    l_cf: float = Field(default=0.05, gt=0)
    l_gf: float = Field(default=0.06, gt=0)
    c_f: float = Field(default=0.02, gt=0)
    r_parasitic: float = Field(default=0.005, ge=0)
    z_l: Optional[float] = Field(default=None, ge=0.02, le=0.5)
    grid_v: float = Field(default=1.0, ge=0)


class FaultSchedule(ConfigSection):
    t_fault_on: float = Field(ge=0)
    t_fault_clear: float = Field(gt=0)
    retained_voltage: float = Field(default=0.3, ge=0, le=1)
    fault_impedance: float = Field(default=0.04, gt=0)

    @model_validator(mode="after")
    def check_order(self) -> "FaultSchedule":
        if self.t_fault_on >= self.t_fault_clear:
            raise ValueError("t_fault_on must be earlier than t_fault_clear")
        return self

    def active(self, t: float) -> bool:
        return self.t_fault_on <= t < self.t_fault_clear


class SpcParams(ConfigSection):
    """Synchronous power controller settings; gains are SI as usually quoted, converted by SpcGains."""

    d_p: float = Field(default=0.0, ge=0)  # W per rad/s
    d_q: float = Field(default=108.0, ge=0)  # var per V
    r_v: float = Field(default=0.107, gt=0)  # pu
    l_v: float = Field(default=0.375, gt=0)  # pu
    k_p_cc: float = Field(default=10.0, gt=0)  # V/A
    k_r_cc: float = Field(default=2000.0, ge=0)  # V/A/s
    h: float = Field(default=2.0, gt=0)  # s
    zeta: float = Field(default=0.5627, gt=0)
    k_pp: float = Field(default=1.16e-3, gt=0)  # rad/s per W
    k_ip: float = Field(default=5.86e-3, ge=0)  # rad/s^2 per W
    derive_plc_gains: bool = Field(default=False)
    p_max: Optional[float] = Field(default=None, gt=0)  # W/rad
    rpc_zeta: float = Field(default=0.5627, gt=0)
    rpc_omega_n: float = Field(default=25.45, gt=0)  # rad/s
    l_eq: float = Field(default=29.5e-3, gt=0)  # H
    e_en: float = Field(default=400.0, gt=0)  # V
    e_max_ratio: float = Field(default=1.3, gt=1)
    i_lim: float = Field(default=1.2, gt=0)  # pu

    @model_validator(mode="after")
    def check_inertia(self) -> "SpcParams":
        if not 2.0 <= self.h <= 5.0:
            logger.warning("Inertia constant H=%.3g s is outside the usual 2-5 s range", self.h)
        return self


class FaultModeParams(ConfigSection):
    v_threshold: float = Field(default=0.9, gt=0, lt=1)
    debounce: float = Field(default=1e-3, gt=0)
    recovery_hold: float = Field(default=0.15, gt=0)
    p_diff_threshold: float = Field(default=0.05, gt=0)
    damping_x: float = Field(default=1.0, ge=0)
    t_d: float = Field(default=0.05, gt=0)
    prl_slope: float = Field(default=10000.0, gt=0)  # pu/s
    nrl_ramp_time: float = Field(default=0.01, gt=0)
    damping_trigger: Literal["voltage_restored", "mode_exit"] = Field(default="voltage_restored")


class SweepSpec(ConfigSection):
    param: str = Field(min_length=1)
    values: list[float] = Field(min_length=1)


class ScenarioConfig(ConfigSection):
    """Declarative description of one simulation run."""

    name: str = Field(default="scenario", max_length=100)
    duration: float = Field(gt=0)
    scr: Optional[float] = Field(default=None)
    fault: Optional[FaultSchedule] = Field(default=None)
    p_s: float = Field(default=0.0)  # pu
    q_s: float = Field(default=0.0)  # pu
    plant: PlantParams = Field(default_factory=PlantParams)
    spc: SpcParams = Field(default_factory=SpcParams)
    faultmode: FaultModeParams = Field(default_factory=FaultModeParams)
    base: PerUnitBase = Field(default_factory=PerUnitBase)
    f_s: float = Field(default=10_000.0, gt=0)  # control rate, Hz
    plant_substeps: int = Field(default=10, ge=1)
    decimation: int = Field(default=1, ge=1)
    sweep: Optional[SweepSpec] = Field(default=None)

    @model_validator(mode="after")
    def resolve_line_impedance(self) -> "ScenarioConfig":
        from app.plant import scr_to_impedance

        if self.scr is not None:
            z_l = scr_to_impedance(self.scr)
            if self.plant.z_l is not None and not math.isclose(self.plant.z_l, z_l, rel_tol=1e-9):
                raise ValueError(f"scr={self.scr} and plant.z_l={self.plant.z_l} disagree; set only one")
            try:
                self.plant = PlantParams.model_validate({**self.plant.model_dump(), "z_l": z_l})
            except ValidationError as exc:
                raise ValueError(f"scr={self.scr} puts plant.z_l={z_l:.4g} outside its bounds") from exc
        elif self.plant.z_l is None:
            raise ValueError("either scr or plant.z_l is required")
        if self.fault is not None and self.duration <= self.fault.t_fault_clear:
            raise ValueError("duration must extend past fault.t_fault_clear")
        ratio = self.current_loop_gain_ratio
        if ratio >= 1.0:
            raise ValueError(f"spc.k_p_cc is {ratio:.2f} times the L_cf/dt limit; the current loop cannot be stable")
        if ratio > CURRENT_LOOP_GAIN_WARN:
            logger.warning("spc.k_p_cc is %.2f of the L_cf/dt limit; the current loop may ring or diverge", ratio)
        return self

    @property
    def control_dt(self) -> float:
        return 1.0 / self.f_s

    @property
    def plant_dt(self) -> float:
        return self.control_dt / self.plant_substeps

    @property
    def current_loop_gain_ratio(self) -> float:
        """Per-unit proportional current gain over L_cf/dt, the bound for a loop with one sample of delay."""
        k_p = self.spc.k_p_cc / self.base.z_base
        return k_p * self.base.omega_0 * self.control_dt / self.plant.l_cf

    @property
    def line_impedance(self) -> float:
        assert self.plant.z_l is not None
        return self.plant.z_l


# Persistent models (run registry)
class RunManifest(SQLModel, table=True):
    __tablename__ = "run_manifests"  # type: ignore[assignment]

    id: Optional[int] = Field(default=None, primary_key=True)
    scenario: str = Field(max_length=100)
    config_path: str = Field(default="")
    out_dir: str = Field()
    files: list[dict[str, str]] = Field(default_factory=list, sa_column=Column(JSON))
    tool_version: str = Field(max_length=32)
    schema_version: int = Field(default=1)
    wall_clock_s: float = Field(default=0.0)
    diverged: bool = Field(default=False)
    resolved_config: dict[str, Any] = Field(default_factory=dict, sa_column=Column(JSON))
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class SweepPoint(SQLModel, table=True):
    __tablename__ = "sweep_points"  # type: ignore[assignment]

    id: Optional[int] = Field(default=None, primary_key=True)
    run_id: Optional[int] = Field(default=None, foreign_key="run_manifests.id", ondelete="CASCADE")
    param: str = Field(max_length=200)
    value: float = Field()
    run_dir: str = Field()
    peak_current: Optional[float] = Field(default=None)
    iq_recovery_overshoot: Optional[float] = Field(default=None)
    id_recovery_overshoot: Optional[float] = Field(default=None)
    recovery_settling_time: Optional[float] = Field(default=None)
    fm_returned: bool = Field(default=False)
    diverged: bool = Field(default=False)
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))
