"""Exact bounded similarity of matrices of piecewise rational functions.

Operators are n×n matrices whose entries are rational functions of a real
parameter λ on the cells of a partition of a closed interval.  The package
diagonalizes idempotents by bounded similarities, decides whether a finite
frame of minimal idempotents exists, computes canonical block forms, solves
commutants, conjugates maximal abelian idempotent sets and classifies
similarity through a local K0 invariant.  Every result is exact; the oracle
module cross-checks them numerically.
"""

from .commutant import (
    CommutantModule,
    build_splitting_idempotent,
    conjugate_masi,
    diagonalize_idempotent_in_commutant,
    solve_commutant,
    split_block,
)
from .diagonalization import SimilarityCertificate, diagonalize_frame, diagonalize_idempotent
from .errors import *  # noqa: F401,F403
from .ktheory import K0Class, SimilarityVerdict, k0_equal, k0_of_commutant, similar, strongly_irreducible_blocks
from .opmatrix import OpMatrix
from .oracle import SamplePlan, check_conjugation, numeric_commutant_dim, numeric_jordan_profile
from .scalar_field import GaussianRational, Partition, PiecewiseRational, Poly
from .structure import CanonicalForm, Frame, FrameObstruction, canonical_form, extract_frame, frame_exists, validate_frame

__version__ = "0.1.0"
