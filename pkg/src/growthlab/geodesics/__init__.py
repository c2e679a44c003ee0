"""Geodesic flow on ellipsoids, the Birkhoff section and the closed-geodesic census."""

from .census import ClosedGeodesic, GeodesicCensus, geodesic_census, reconstruct
from .flow import IntegrationError, TangentState, antipodal_pushforward, geodesic_flow
from .loop import LoopConvergenceError, LoopResult, shortest_noncontractible
from .metric import EllipsoidMetric, EvenPolynomial
from .section import (BirkhoffSection, ChartDomainError, ConjugatePointError, HalfReturnError,
                      ReturnRecord, SectionCurve, SectionPoint, polygon_area_check)

__all__ = [
    "BirkhoffSection", "ChartDomainError", "ClosedGeodesic", "ConjugatePointError", "EllipsoidMetric",
    "EvenPolynomial", "GeodesicCensus", "HalfReturnError", "IntegrationError", "LoopConvergenceError",
    "LoopResult", "ReturnRecord", "SectionCurve", "SectionPoint", "TangentState", "antipodal_pushforward",
    "geodesic_census", "geodesic_flow", "polygon_area_check", "reconstruct", "shortest_noncontractible",
]
