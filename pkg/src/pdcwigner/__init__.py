"""Stochastic (Wigner) field simulation of type-II parametric down-conversion."""

__version__ = "0.1.0"

from .modes import ModeGrid, PhaseMatchKernel, Sector, build_mode_grid  # noqa: E402
from .vacuum import VacuumEnsemble, sample_vacuum  # noqa: E402
from .crystal import CrystalParams, OutputEnsemble, build_transform_map, transform  # noqa: E402
from .detection import DetectorConfig  # noqa: E402
from .fields import FieldProbe  # noqa: E402
from .bell import BellSetup, chsh, clauser_horne, coincidence_scan  # noqa: E402

__all__ = [
    "ModeGrid", "PhaseMatchKernel", "Sector", "build_mode_grid", "VacuumEnsemble", "sample_vacuum",
    "CrystalParams", "OutputEnsemble", "build_transform_map", "transform", "DetectorConfig",
    "FieldProbe", "BellSetup", "chsh", "clauser_horne", "coincidence_scan",
]
