from .cohomology import (InducedMap, Subquotient, betti_numbers, cohomology, connecting_hom,
                         homology, inclusion_to_pair, les_check, relative_cohomology, restriction)
from .complex import Cell, ComplexError, StratifiedCellComplex
from .duality import (NonOrientable, NotAManifold, duality_map, fundamental_class,
                      manifold_boundary, poincare_dual)
from .snf import SNFResult, smith_normal_form

__all__ = [
    "Cell", "ComplexError", "InducedMap", "NonOrientable", "NotAManifold", "SNFResult",
    "StratifiedCellComplex", "Subquotient", "betti_numbers", "cohomology", "connecting_hom",
    "duality_map", "fundamental_class", "homology", "inclusion_to_pair", "les_check",
    "manifold_boundary", "poincare_dual", "relative_cohomology", "restriction",
    "smith_normal_form",
]
