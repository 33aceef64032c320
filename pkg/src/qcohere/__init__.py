"""Quasiprobability decomposition of quantum states over classical families."""
from .catalog import CATALOG, CatalogError, build
from .decomposition import (Decomposition, GramSystem, Tolerances, ValidationError, Verdict,
                            build_gram, decompose, residual, solve_nonneg, validate_state)
from .families import (ClassicalFamily, FamilyKind, NonConvergenceError, NotInFamilyError,
                       SearchConfig, StationarySet, factorize_product, separability_eigen_iterate,
                       spin_coherent_state, stationarity_defect, stationary_points)
from .membership import MembershipResult, certify_membership
from .operators import (DimensionError, EigenSystem, HermitianOperator, NotHermitianError,
                        PureState, hermitian_eig, hs_inner, imaginary_part_matrix,
                        real_part_operator, reduced_operator, tensor)

__version__ = "0.1.0"
