from typing import Any, Callable

import pytest

from app.models import PerUnitBase, PlantParams, ScenarioConfig


@pytest.fixture
def base() -> PerUnitBase:
    return PerUnitBase()


@pytest.fixture
def plant_params() -> PlantParams:
    return PlantParams(z_l=0.2)


@pytest.fixture
def make_config() -> Callable[..., ScenarioConfig]:
    """Build a validated scenario from keyword overrides of a short SCR-5 run."""

    def _make(**overrides: Any) -> ScenarioConfig:
        doc: dict[str, Any] = {"name": "test", "duration": 0.05, "scr": 5.0, "p_s": 0.5}
        doc.update(overrides)
        return ScenarioConfig.model_validate(doc)

    return _make


@pytest.fixture
def short_fault_doc() -> dict[str, Any]:
    """A brief fault scenario, small enough for sweep and CLI tests."""
    return {
        "name": "short-fault",
        "duration": 0.25,
        "scr": 5.0,
        "p_s": 0.5,
        "fault": {"t_fault_on": 0.05, "t_fault_clear": 0.1},
    }
