"""Numerical index bounds for harmonic maps and minimal immersions into spheres.

Test variations are gradients of first-eigenspace functions on the target
sphere, restricted to the map.  The package evaluates the second variation of
energy and volume on their span, counts negative directions and checks the
supporting spectral and conformal identities.
"""

from .conformal import FieldFamily, TestFunction, build_family, choose_basepoints
from .flow import FlowSeries, energy_series, flow_point, u_series, volume_series
from .geometry import (
    TOL_ALGEBRAIC,
    TOL_FINITE_DIFF,
    TOL_QUADRATURE,
    DomainGrid,
    SpherePoint,
    TangentVec,
    exp_map,
    geodesic_distance,
    log_map,
    make_grid,
    parallel_transport,
)
from .maps import ZooMap, make_zoo_map, stress_energy, tension_field, total_energy, volume
from .spectral import Eigenbasis, XiKernel, make_eigenbasis, make_xi
from .variation import IndexCertificate, certify_energy_index, certify_volume_index, h_form, q_form

__all__ = [
    "TOL_ALGEBRAIC", "TOL_FINITE_DIFF", "TOL_QUADRATURE",
    "DomainGrid", "SpherePoint", "TangentVec",
    "exp_map", "geodesic_distance", "log_map", "make_grid", "parallel_transport",
    "Eigenbasis", "XiKernel", "make_eigenbasis", "make_xi",
    "FieldFamily", "TestFunction", "build_family", "choose_basepoints",
    "ZooMap", "make_zoo_map", "stress_energy", "tension_field", "total_energy", "volume",
    "IndexCertificate", "certify_energy_index", "certify_volume_index", "h_form", "q_form",
    "FlowSeries", "energy_series", "flow_point", "u_series", "volume_series",
]
