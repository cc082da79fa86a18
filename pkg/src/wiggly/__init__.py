"""Flatness numbers, net hierarchies, spanning trees, and dimension
certificates for finite metric spaces."""

__version__ = "0.1.0"

from .spaces import (
    Ball,
    MetricError,
    MetricSpace,
    PolygonalPath,
    ball_members,
    cover_distance,
    kuratowski_embed,
    load_space,
    subarc_deviation,
    validate_metric,
)

__all__ = [
    "Ball",
    "MetricError",
    "MetricSpace",
    "PolygonalPath",
    "ball_members",
    "cover_distance",
    "kuratowski_embed",
    "load_space",
    "subarc_deviation",
    "validate_metric",
]
