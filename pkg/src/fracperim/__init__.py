"""Fractional perimeters and isoperimetric constants on finite metric measure spaces."""

from .errors import PreconditionError, SpaceError
from .space import SCHEMA_VERSION, MetricMeasureSpace, PointSet

__version__ = "0.1.0"

__all__ = ["MetricMeasureSpace", "PointSet", "PreconditionError", "SpaceError", "SCHEMA_VERSION"]
