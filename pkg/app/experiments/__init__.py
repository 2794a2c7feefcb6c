"""Parameter sweeps over temperature, background field, chemical potential and depth."""

from .orchestrator import SweepOrchestrator
from .runner import GridPoint, PointRunner, expand_grid
from .writer import SweepWriter

__all__ = [
    "GridPoint",
    "PointRunner",
    "SweepOrchestrator",
    "SweepWriter",
    "expand_grid",
]
