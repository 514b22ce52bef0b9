"""Charts, curvature jets, tensor fields, operators, and identity checks."""

from .catalog import (
    polar_space_form,
    product_cylinder,
    rotation_surface,
    space_form,
    warped_product,
)
from .chart import ChartManifold, GeometryJet
from .drift import (
    DriftData,
    RadialDrift,
    build_f_A,
    fa_quadratic,
    fa_site,
    phi_field_radial,
    warp_h,
    warp_h_prime,
)
from .fields import (
    FieldJet,
    SelfAdjointField,
    SpectralBounds,
    codazzi_residual,
    spectral_bounds,
)
from .identities import (
    IDENTITY_NAMES,
    IdentityRecord,
    identity_suite,
    max_residuals,
    standard_test_function,
)
from .operators import (
    ScalarField,
    ScalarJet,
    directional_derivative,
    l_op,
    l_op_drift,
    lap_A,
    lap_drift,
    lap_plain,
    ric_A,
    ric_modified,
    ric_pair,
)
from .tensors import codazzi_hessian_field, constant_diag_field, identity_field

__all__ = [
    "ChartManifold",
    "GeometryJet",
    "SelfAdjointField",
    "FieldJet",
    "SpectralBounds",
    "ScalarField",
    "ScalarJet",
    "DriftData",
    "RadialDrift",
    "IdentityRecord",
    "IDENTITY_NAMES",
    "space_form",
    "polar_space_form",
    "rotation_surface",
    "product_cylinder",
    "warped_product",
    "identity_field",
    "constant_diag_field",
    "codazzi_hessian_field",
    "codazzi_residual",
    "spectral_bounds",
    "identity_suite",
    "max_residuals",
    "standard_test_function",
    "build_f_A",
    "fa_quadratic",
    "fa_site",
    "phi_field_radial",
    "warp_h",
    "warp_h_prime",
    "lap_plain",
    "lap_A",
    "lap_drift",
    "l_op",
    "l_op_drift",
    "ric_pair",
    "ric_A",
    "ric_modified",
    "directional_derivative",
]
