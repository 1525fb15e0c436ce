"""Renders a recorded time series as one SVG file per panel."""

import logging
from pathlib import Path
from typing import NamedTuple

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

from app.harness import TimeSeries  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt and no date so identical input gives identical SVG bytes.
matplotlib.rcParams["svg.hashsalt"] = "spc-fault-ride-through"
SVG_METADATA = {"Date": None}


class Trace(NamedTuple):
    column: str
    label: str
    style: str = "-"


class Panel(NamedTuple):
    name: str
    title: str
    ylabel: str
    traces: tuple[Trace, ...]


PANELS: tuple[Panel, ...] = (
    Panel(
        "currents_dq",
        "Converter current, actual and reference (controller frame)",
        "current (pu)",
        (
            Trace("i_c_d", "i_d"),
            Trace("i_ref_lim_d", "i_d ref", "--"),
            Trace("i_c_q", "i_q"),
            Trace("i_ref_lim_q", "i_q ref", "--"),
        ),
    ),
    Panel(
        "power",
        "Active and reactive power",
        "power (pu)",
        (Trace("p", "P"), Trace("p_ref", "P ref", "--"), Trace("q", "Q"), Trace("q_ref", "Q ref", "--")),
    ),
    Panel("frequency", "Virtual frequency", "omega (rad/s)", (Trace("omega", "omega"),)),
    Panel("emf", "Virtual EMF magnitude", "E (pu)", (Trace("e_mag", "E"),)),
    Panel(
        "voltage",
        "PCC voltage sequence magnitudes",
        "voltage (pu)",
        (Trace("v_plus", "|v+|"), Trace("v_minus", "|v-|")),
    ),
    Panel("damping", "Dynamic virtual resistance", "r_v (pu)", (Trace("r_v_dyn", "r_v,dyn"),)),
    Panel(
        "mode",
        "Fault signal and fault mode",
        "state",
        (Trace("sf", "SF"), Trace("fm", "FM", "--"), Trace("limiter_active", "limiter", ":")),
    ),
)


class PlotService:
    @staticmethod
    def render(series: TimeSeries, out_dir: Path) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        t = series.t
        written = []
        for panel in PANELS:
            fig = Figure(figsize=(8, 3.5))
            ax = fig.subplots()
            for trace in panel.traces:
                ax.plot(t, series[trace.column], trace.style, label=trace.label, linewidth=1.0)
            ax.set_title(panel.title)
            ax.set_xlabel("time (s)")
            ax.set_ylabel(panel.ylabel)
            ax.grid(True, alpha=0.3)
            ax.legend(loc="best", fontsize="small")
            fig.tight_layout()
            path = out_dir / f"{panel.name}.svg"
            fig.savefig(path, format="svg", metadata=SVG_METADATA)
            written.append(path)
        logger.info("Wrote %d plots to %s", len(written), out_dir)
        return written

    @staticmethod
    def render_csv(csv_path: Path, out_dir: Path) -> list[Path]:
        """Plots for a timeseries.csv; CsvSchemaError if it does not match the record layout."""
        return PlotService.render(TimeSeries.from_csv(csv_path), out_dir)


plot_service = PlotService()
