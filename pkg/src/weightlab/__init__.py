"""weightlab: two-weight experiments on the middle-third Cantor measure
against gap-supported atomic measures.

The package constructs the weight pair, evaluates its fields with certified
truncation bounds, checks the scalar tailed-product and local testing
conditions, and measures the divergence rate of the quadratic square-
function functional on an explicit sibling-supported test family.
"""

from .cantor import (
    Atom,
    AtomicMeasure,
    ExponentConfig,
    Interval,
    TriadicIndex,
    cantor_quadrature,
    gap,
    interval,
    omega_mass,
    restrict,
    sibling,
    sigma_interval_mass,
    sigma_log_weight,
    sigma_total_mass,
    sigma_truncated,
    sigma_weight,
)
from .criteria import (
    GrowthFit,
    ScanResult,
    TestFamily,
    ap_constant,
    ap_tail,
    dual_swap,
    fit_growth,
    quad_lhs_closed,
    quad_lhs_direct,
    quad_rhs_closed,
    quad_rhs_direct,
    selfsim_energy,
    test_family_coeffs,
    testing_norm,
    testing_scan,
    tree_family,
)
from .errors import (
    ConfigError,
    DependencyError,
    InvalidIndexError,
    NoSiblingError,
    NumericalFailureError,
    ResourceLimitError,
    SingularityError,
    TooCloseError,
    WeightlabError,
)
from .plots import emit_svg_loglog, reference_series
from .transform import (
    CertifiedValue,
    ZeroTable,
    cauchy_sum,
    cauchy_sum_many,
    find_zero,
    h_indicator,
    hilbert_omega,
    hilbert_omega_many,
    zero_table,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
