"""Gaussian free field circle averages: exact and lattice backends."""

from .exact import FieldSample, sample_exact, sample_values
from .grid import (
    DEFAULT_CALIBRATION,
    GridField,
    Lattice,
    LatticeAverager,
    calibrate_grid,
    calibrate_lattice,
    circle_average_on_grid,
    raw_circle_variance,
    sample_grid,
    sample_lattice,
)
from .nodes import (
    CovarianceMatrix,
    NodeSet,
    build_covariance,
    cov_circle_avg,
    covariance_from_matrix,
    covariance_matrix,
)
from .snapshot import load_snapshot, save_snapshot

__all__ = [
    "CovarianceMatrix", "DEFAULT_CALIBRATION", "FieldSample", "GridField", "Lattice",
    "LatticeAverager", "NodeSet", "build_covariance", "calibrate_grid", "calibrate_lattice",
    "circle_average_on_grid", "cov_circle_avg", "covariance_from_matrix", "covariance_matrix",
    "load_snapshot", "raw_circle_variance", "sample_exact", "sample_grid", "sample_lattice",
    "sample_values", "save_snapshot",
]
