"""Concentration of measure on finite metric-measure spaces.

Exact and lower-bound concentration functions, closed-form concentration
bounds, length certificates, observable-distance estimates and
full-group approximation on cylinder spaces.
"""

from .concentration import (BoundSpec, ConcentrationProfile, alpha_auto, alpha_exact, alpha_lower,
                            default_eps_grid, levy_trend, lipschitz_deviation, product_levy_check,
                            theoretical_bound, verify_bound)
from .core import (FiniteMMSpace, diameter, distance_to_set, explicit_space, lipschitz_check, median_of,
                   neighborhood, single_point_space, validate_space)
from .exceptions import CapExceededError, InvariantError, MMConcError, ValidationError
from .fullgroup import (FullGroupElement, approximate_by_bij, d_mu, make_cylinder_space, rn_max,
                        weak_defect)
from .groups import (make_circle, make_cube, make_direct_product, make_hamming_product, make_l1_group,
                     make_scaled, make_semidirect, make_uniform_symmetric, make_weighted_symmetric)
from .length import (LengthCertificate, PartitionChain, SubgroupChainSpec, stabilizer_chain,
                     subgroup_chain_bound, verify_certificate)
from .observable import hausdorff_me1, h1li_estimate, me1, quantize, sample_lipschitz_net

__version__ = "0.1.0"

__all__ = [
    "BoundSpec", "CapExceededError", "ConcentrationProfile", "FiniteMMSpace", "FullGroupElement",
    "InvariantError", "LengthCertificate", "MMConcError", "PartitionChain", "SubgroupChainSpec",
    "ValidationError", "alpha_auto", "alpha_exact", "alpha_lower", "approximate_by_bij", "d_mu",
    "default_eps_grid", "diameter", "distance_to_set", "explicit_space", "h1li_estimate", "hausdorff_me1",
    "levy_trend", "lipschitz_check", "lipschitz_deviation", "make_circle", "make_cube", "make_cylinder_space",
    "make_direct_product", "make_hamming_product", "make_l1_group", "make_scaled", "make_semidirect",
    "make_uniform_symmetric", "make_weighted_symmetric", "me1", "median_of", "neighborhood",
    "product_levy_check", "quantize", "rn_max", "sample_lipschitz_net", "single_point_space",
    "stabilizer_chain", "subgroup_chain_bound", "theoretical_bound", "validate_space", "verify_bound",
    "verify_certificate", "weak_defect",
]
