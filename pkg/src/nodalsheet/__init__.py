"""Nodal-measure simulation lab: stationary Gaussian fields, Kac densities,
and Brownian-sheet limit diagnostics."""

__version__ = "0.1.0"

from .models import CovarianceModel, make_model, spectral_moments
from .sampler import (
    EmbeddingNotPSDError,
    EmbeddingPlan,
    FieldSample,
    GridSpec,
    derive_seed,
    field_from_function,
    plan_embedding,
    read_field,
    sample_field,
    sample_field_pair,
    sample_field_spectral,
    write_field,
)
from .nodal import (
    IncrementGrid,
    XiField,
    center_and_rescale,
    cumulative,
    nodal_cells,
    nodal_length_cells,
    pair_with_test_function,
    rectangle_increment,
    zero_cells_1d,
    zero_count_1d,
    zeros_1d,
)
from .kacrice import (
    DegenerateJointError,
    Gamma2Result,
    KacDensityProfile,
    NonPositiveGamma2Error,
    QuadratureError,
    F2,
    gamma2,
    radial_profile,
    rho1,
    rho2,
    variance_prediction,
)
from .sheet import (
    CurveSpec,
    SheetSample,
    curve_sup_samples,
    normal_cdf,
    normal_cdf_scaled,
    sample_sheet,
    sup_on_curve,
    yeh_H,
    yeh_H_sf,
    yeh_constants,
)
