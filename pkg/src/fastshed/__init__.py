"""Fast load shedding for islanded industrial power systems."""

from importlib.resources import files

from .dynamics import GovernorParams, ScriptedEvent, SimScenario, SimTrace, nadir, run_scenario
from .edsa import FlsController, FlsParams, TripCommand, act, detect, tick
from .errors import (
    BlackoutError,
    ConfigError,
    FastShedError,
    InfeasibleMarginError,
    InfeasibleShedError,
    UnsupportedConstructError,
)
from .grid_model import (
    Busbar,
    Bustie,
    EventKind,
    ExternalTie,
    Generator,
    GridConfig,
    Load,
    NetworkSnapshot,
    enumerate_events,
    make_snapshot,
    partition,
    validate_config,
)
from .lse import SheddingMatrix, build_shedding_matrix, compute_pm, select_loads
from .sweep import max_sr_for_margin, sweep_surface

__version__ = "0.1.0"

__all__ = [
    "BlackoutError", "Busbar", "Bustie", "ConfigError", "EventKind", "ExternalTie", "FastShedError",
    "FlsController", "FlsParams", "Generator", "GovernorParams", "GridConfig", "InfeasibleMarginError",
    "InfeasibleShedError", "Load", "NetworkSnapshot", "ScriptedEvent", "SheddingMatrix", "SimScenario",
    "SimTrace", "TripCommand", "UnsupportedConstructError", "act", "build_shedding_matrix", "compute_pm",
    "data_path", "detect", "enumerate_events", "make_snapshot", "max_sr_for_margin", "nadir", "partition",
    "run_scenario", "select_loads", "sweep_surface", "tick", "validate_config",
]


def data_path(name: str):
    """Path of a bundled reference file (``fixture.toml``, ``trip_g2.toml``, ``snapshot.toml``)."""
    return files(__name__).joinpath("data", name)
