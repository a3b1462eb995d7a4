"""Finite-dimensional quantum graphs.

Matrix-subspace arithmetic, operator systems and their multiplier algebras,
classical and quantum true-twin skeletons, Kraus pullbacks/pushforwards, and
decision/verification of TRO (Morita) equivalence.
"""

from .algebras import (
    BlockDecomposition,
    IrreducibilityVerdict,
    OperatorSystem,
    QuantumGraph,
    block_decomposition,
    commutant,
    full_matrix_algebra,
    generated_cstar,
    irreducibility_test,
    multiplier_algebra,
    tensor_system,
    validate_operator_system,
    validate_quantum_graph,
)
from .classical import (
    Graph,
    VertexMap,
    canonical_pullback_channel,
    chromatic_number,
    clique_blowup,
    clique_number,
    complete_graph,
    graph_isomorphism,
    graph_operator_system,
    independence_number,
    path_graph,
    skeleton_graph,
    tro_equivalent_graphs,
    true_twin_classes,
)
from .linalg import (
    MatSubspace,
    Tolerance,
    adjoint_space,
    bimodule_closure,
    contains,
    equals,
    intersect_space,
    orth_complement,
    orthonormalize,
    product_span,
    subspace_defect,
    sum_space,
)
from .morita import (
    KrausMap,
    PullbackVerdict,
    TroSpace,
    apply_dual,
    apply_ucp,
    balance_tro,
    is_cohomomorphism,
    is_faithful,
    is_pullback_homomorphism,
    is_star_homomorphism,
    is_strong_cohomomorphism,
    kraus_space,
    pullback,
    pushforward,
    tro_from_space,
    validate_kraus,
    verify_balanced_equivalence,
    verify_tro_equivalence,
)

from .skeleton import (
    SearchBudget,
    SkeletonFingerprint,
    SkeletonResult,
    TroDecision,
    TroVerdict,
    decide_tro_equivalence,
    quantum_skeleton,
    skeleton_fingerprint,
    slice_independence_check,
    tro_between_amplified_factors,
)

__version__ = "0.1.0"
