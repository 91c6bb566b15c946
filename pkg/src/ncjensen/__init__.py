"""Conditionally free products of ucp maps, dilation structure and
noncommutative Jensen inequalities."""
from .ncalg import (AlgebraSpec, DimensionError, IntervalAlgebra, Letter, MatrixAlgebra, MatrixTuple,
                    NCPoly, NCWord, NotReducedError, adjoint, evaluate_poly, evaluate_word, gen,
                    is_selfadjoint, mat_letter, min_membership, poly_letter, reduce_word, word)
from .cp import (ChoiMap, CompressedPointEval, ContainmentError, DilationChain, FiniteRep, OVMeasure,
                 PSDError, Subspace, choi_apply, closure_under, complement_within, compress,
                 is_reducing, measure_apply, minimal_part, naimark_dilate)
from .cfree import (CFreeFunctional, CompletePositivityError, FubiniReport, GnsSpace, MembershipError,
                    PatternReport, barycenter, build_gns, cfree_evaluate, cfree_evaluate_poly,
                    find_fubini_chain, is_free_product_map, pattern_subspaces, verify_fubini_chain)
from .convexity import (ConvexityWitness, JensenReport, NoViolation, check_separate_convexity,
                        jensen_counterexample, jensen_verify, make_conjugated_square,
                        make_symmetrized_product, witness_from_dilation)
from .fock import (SemicircularFamily, TruncatedFock, TruncationRisk, chebyshev_u_quadrature,
                   crosscheck_free_moments, semicircular_inequality_experiment, vacuum_moment)
from .sampling import random_cfree, random_ovmeasure, trial_rng

__version__ = "0.1.0"
