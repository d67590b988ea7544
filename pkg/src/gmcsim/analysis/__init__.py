"""Estimators confronting simulated GMC with its predicted behaviour."""

from .curves import mean_length_oracle, multifractal_interval, quantum_length
from .dimension import DimensionReport, local_dimension
from .fourier import FourierReport, disk_transform, envelope_fit, fourier_decay, transform
from .holder import HolderReport, holder_exponent, line_distance
from .projection import ProjectionField, chord_atom_table, projection_field

__all__ = [
    "DimensionReport", "FourierReport", "HolderReport", "ProjectionField", "chord_atom_table",
    "disk_transform", "envelope_fit", "fourier_decay", "holder_exponent", "line_distance",
    "local_dimension", "mean_length_oracle", "multifractal_interval", "projection_field",
    "quantum_length", "transform",
]
