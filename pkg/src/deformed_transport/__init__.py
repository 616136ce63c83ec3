"""Parallel transport and curvature from deformed translation groups.

A Riemannian chart is encoded as a field of deformation maps whose jets
carry an orthonormal frame, the Levi-Civita connection and a third-order
coefficient.  The expansion of the resulting group law yields the
connection and the curvature; the group of parallel transports on top of
it has covariant derivatives as generators.
"""
from .deformed_group import (
    DeformationField,
    DeformationJet,
    GroupElement,
    build_deformation,
    connection_coefficients,
    constant_element,
    deformation_for,
    element_from_function,
    extract_expansion,
    multiply,
)
from .dt_group import (
    DTElement,
    cartan_residual,
    commutator_check,
    dt_action_frame,
    dt_action_vector,
    dt_inverse,
    dt_multiply,
    dt_structure,
    dt_subgroup_closure_check,
    identity_element,
)
from .fields import Chart, ChartField, DomainError, FDPolicy, GeometryError, gradient
from .levi_civita import MetricField, christoffel, frame_field, levi_civita_connection, metricity_residual, riemann
from .manifolds import ConfigError, Manifold, catalog_manifold, load_spec, manifold_from_spec
from .transport import Curve, Segment, holonomy, lambda_matrix, rotation_angle, transport_along_curve
from .verify import run_suite

__version__ = "0.1.0"
