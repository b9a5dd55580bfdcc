"""Dimensionless-feature construction and units-equivariant regression.

Exact integer linear algebra (Smith normal form) turns a table of feature
units into a lattice of dimensionless monomial features and a family of
unit-restoring decoder monomials; linear and LASSO fits over those features
are exactly equivariant to any change of base units.
"""

from .units import (
    BaseUnitSystem,
    GroupElement,
    Quantity,
    UnitVector,
    UnitMismatch,
    UnknownUnit,
    format_unit,
    parse_unit,
    q_add,
    q_mul,
    q_pow,
    rescale,
    si_system,
)
from .intlinalg import (
    IntMatrix,
    SnfDecomposition,
    nullspace_basis,
    rank,
    smith_normal_form,
    solve_diophantine,
)
from .geometry import ScalarFeature, ScalarizeRules, VectorFeature, scalarize
from .pi import (
    FeatureDef,
    FeatureSpec,
    Monomial,
    apply_decoder,
    decoder_solutions,
    degree,
    dimensionless_basis,
    enumerate_monomials,
    evaluate_monomial,
    reynolds_project,
    sample_dimensional_monomials,
    total_degree,
)
from .regress import (
    Dataset,
    RegressionModel,
    build_design_matrix,
    dimensionless_loss,
    ensemble_predict,
    fit_lasso,
    fit_monomial_model,
    fit_ols,
    load_dataset_csv,
    predict,
    save_dataset_csv,
    state_relative_error,
)

__version__ = "0.1.0"
