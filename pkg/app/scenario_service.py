"""Service layer for loading scenarios, running them to disk and sweeping parameters."""

import asyncio
import copy
import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, NamedTuple, Optional

import pandas as pd
import yaml

from app import __version__
from app.database import get_session
from app.harness import SCHEMA_VERSION, SimulationDiverged, run_scenario
from app.metrics import ScenarioSummary, summarize_scenario
from app.models import RunManifest, ScenarioConfig, SweepPoint

logger = logging.getLogger(__name__)

BUNDLED_DIR = Path(__file__).parent / "scenarios"
TIMESERIES_FILE = "timeseries.csv"
METRICS_FILE = "metrics.json"
MANIFEST_FILE = "manifest.json"
COMPARISON_FILE = "comparison.csv"

# Fields that pin the same quantity; overriding one drops the other.
_EXCLUSIVE = {"scr": ("plant", "z_l"), "plant.z_l": ("scr",)}


class RunOutcome(NamedTuple):
    out_dir: Path
    manifest: dict[str, Any]
    summary: Optional[ScenarioSummary]
    diverged: bool
    message: str = ""


def sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def resolve_config_path(name_or_path: str) -> Path:
    """A file path, or the name of a bundled scenario."""
    path = Path(name_or_path)
    if path.is_file():
        return path
    bundled = BUNDLED_DIR / f"{name_or_path}.yaml"
    if bundled.is_file():
        return bundled
    raise FileNotFoundError(f"no scenario file or bundled scenario named {name_or_path!r}")


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.yaml"))


def load_document(path: Path) -> dict[str, Any]:
    """Scenario document from YAML, or the resolved config embedded in a run manifest."""
    with path.open(encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    if "resolved_config" in doc:
        doc = doc["resolved_config"]
    return doc


def set_path(doc: dict[str, Any], dotted: str, value: Any) -> dict[str, Any]:
    """Copy of doc with the dotted key set; sibling keys that pin the same quantity are removed."""
    out = copy.deepcopy(doc)
    node = out
    keys = dotted.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value

    exclusive = _EXCLUSIVE.get(dotted)
    if exclusive:
        node = out
        for key in exclusive[:-1]:
            node = node.get(key, {})
        node.pop(exclusive[-1], None)
    return out


def check_param_path(cfg: ScenarioConfig, dotted: str) -> None:
    """Reject paths that do not name a scalar field of the scenario."""
    node: Any = cfg.model_dump()
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ValueError(f"unknown parameter path {dotted!r}")
        node = node[key]
    if isinstance(node, (dict, list)):
        raise ValueError(f"parameter path {dotted!r} does not name a scalar")


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _manifest_row(manifest: dict[str, Any]) -> RunManifest:
    fields = {k: v for k, v in manifest.items() if k not in ("id", "created_at")}
    return RunManifest.model_validate(fields)


def _run_point(doc: dict[str, Any], out_dir: str, config_path: str) -> RunOutcome:
    cfg = ScenarioConfig.model_validate(doc)
    return ScenarioService.run_to_directory(cfg, Path(out_dir), config_path)


class ScenarioService:
    """Runs scenarios into output directories and keeps the run registry."""

    @staticmethod
    def load(name_or_path: str, overrides: Optional[dict[str, Any]] = None) -> tuple[ScenarioConfig, Path]:
        path = resolve_config_path(name_or_path)
        doc = load_document(path)
        for dotted, value in (overrides or {}).items():
            doc = set_path(doc, dotted, value)
        return ScenarioConfig.model_validate(doc), path

    @staticmethod
    def run_to_directory(cfg: ScenarioConfig, out_dir: Path, config_path: str = "") -> RunOutcome:
        """Simulate and write timeseries.csv, metrics.json and manifest.json.

        A diverged run still writes the valid prefix of its record.
        """
        out_dir.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        diverged = False
        message = ""
        summary: Optional[ScenarioSummary] = None
        try:
            series = run_scenario(cfg)
        except SimulationDiverged as exc:
            series = exc.partial
            diverged = True
            message = str(exc)
        wall_clock = time.perf_counter() - started

        csv_path = out_dir / TIMESERIES_FILE
        series.to_csv(csv_path)
        metrics_path = out_dir / METRICS_FILE
        if diverged:
            _write_json(metrics_path, {"schema_version": SCHEMA_VERSION, "diverged": True, "error": message})
        else:
            summary = summarize_scenario(series, cfg)
            _write_json(metrics_path, summary.model_dump(mode="json"))

        manifest = RunManifest(
            scenario=cfg.name,
            config_path=config_path,
            out_dir=str(out_dir),
            files=[{"name": p.name, "sha256": sha256_of(p)} for p in (csv_path, metrics_path)],
            tool_version=__version__,
            schema_version=SCHEMA_VERSION,
            wall_clock_s=round(wall_clock, 3),
            diverged=diverged,
            resolved_config=cfg.model_dump(mode="json"),
        )
        manifest_doc = manifest.model_dump(mode="json", exclude={"id"})
        _write_json(out_dir / MANIFEST_FILE, manifest_doc)
        logger.info("Wrote %s, %s and %s to %s", TIMESERIES_FILE, METRICS_FILE, MANIFEST_FILE, out_dir)
        return RunOutcome(out_dir, manifest_doc, summary, diverged, message)

    @staticmethod
    def record_run(out_root: Path, manifest: dict[str, Any]) -> RunManifest:
        with get_session(out_root) as session:
            row = _manifest_row(manifest)
            session.add(row)
            session.commit()
            session.refresh(row)
            return row

    @staticmethod
    def verify_manifest(run_dir: Path) -> bool:
        """True when every file listed in the run's manifest exists with a matching digest."""
        manifest = json.loads((run_dir / MANIFEST_FILE).read_text(encoding="utf-8"))
        for entry in manifest["files"]:
            path = run_dir / entry["name"]
            if not path.is_file() or sha256_of(path) != entry["sha256"]:
                return False
        return True

    @staticmethod
    async def run_sweep(
        cfg: ScenarioConfig,
        param: str,
        values: list[float],
        out_root: Path,
        config_path: str = "",
        workers: int = 1,
    ) -> pd.DataFrame:
        """One run per value on a process pool, then the registry rows and comparison table."""
        check_param_path(cfg, param)
        base_doc = cfg.model_dump(mode="json")
        base_doc.pop("sweep", None)
        points = []
        for value in values:
            doc = set_path(base_doc, param, value)
            doc["name"] = f"{cfg.name}[{param}={value:g}]"
            ScenarioConfig.model_validate(doc)
            points.append((value, doc, out_root / f"{param}={value:g}"))

        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=max(1, workers)) as pool:
            tasks = [
                loop.run_in_executor(pool, _run_point, doc, str(run_dir), config_path) for _, doc, run_dir in points
            ]
            outcomes: list[RunOutcome] = await asyncio.gather(*tasks)

        records = []
        with get_session(out_root) as session:
            for (value, _, _), outcome in zip(points, outcomes):
                run = _manifest_row(outcome.manifest)
                session.add(run)
                session.flush()
                summary = outcome.summary
                point = SweepPoint(
                    run_id=run.id,
                    param=param,
                    value=value,
                    run_dir=str(outcome.out_dir),
                    peak_current=summary.peak_current if summary else None,
                    iq_recovery_overshoot=summary.iq_recovery_overshoot if summary else None,
                    id_recovery_overshoot=summary.id_recovery_overshoot if summary else None,
                    recovery_settling_time=summary.recovery_settling_time if summary else None,
                    fm_returned=summary.fm_returned if summary else False,
                    diverged=outcome.diverged,
                )
                session.add(point)
                records.append(point.model_dump(exclude={"id", "run_id", "created_at", "run_dir"}))
                logger.info("Sweep point %s=%g done%s", param, value, " (diverged)" if outcome.diverged else "")
            session.commit()

        table = pd.DataFrame.from_records(records)
        table.to_csv(out_root / COMPARISON_FILE, index=False, float_format="%.6g", lineterminator="\n")
        return table


# Global instance
scenario_service = ScenarioService()
