"""Flag curvature of left-invariant Finsler metrics on compact Lie groups.

Structure-constant Lie algebras, Minkowski norms (quadratic, Randers,
implicit navigation, glued), a spray-based flag curvature engine, the
navigation-and-gluing construction of flag-wise positively curved metrics,
and algebraic checks on reductive decompositions.
"""

from .errors import *  # noqa: F401,F403
from .lie_algebra import LieAlgebra, abelian, builtin, from_json, load, su2, su2_plus_r, su2_plus_su2
from .minkowski import (
    GluedNorm,
    NavigationDatum,
    NavigationNorm,
    QuadraticNorm,
    RandersNorm,
    fundamental_tensor,
    navigation_norm,
    solve_navigation,
    strong_convexity_margin,
    zermelo_randers_closed_form,
)
from .invariant_metric import (
    FlagData,
    InvariantMetric,
    biinvariant_sectional_oracle,
    flag_curvature,
    flag_curvatures,
    navigation_correspondence_residual,
    riemann_curvature,
    spray_coefficients,
)
from .construction import (
    assemble_glued_metric,
    build_covering,
    build_regions,
    run_pipeline,
    select_delta,
    select_epsilon,
    verify_delta,
    verify_fp,
)
from .coset_checks import find_transverse, flat_plane_test, reductive_decomposition

__version__ = "0.1.0"
