"""Verification toolkit for quantum imperative programs.

Parse a quantum while-language, execute it under density-matrix semantics,
compute weakest (liberal) preconditions as Hermitian operators, and check
Hoare triples and proof outlines via the Loewner partial order.
"""

from .linalg import (
    CMatrix,
    DEFAULT_TOL,
    DensityMatrix,
    KrausMap,
    QuantumPredicate,
    apply_kraus,
    dagger,
    eig_hermitian,
    embed_at,
    is_unitary,
    kron,
    load_matrix,
    loewner_leq,
    random_density,
    random_unitary,
    save_matrix,
)
from .lang import (
    Command,
    GateTable,
    MeasTable,
    ParseError,
    Tables,
    VarContext,
    VarDecl,
    normalize,
    parse,
    print_program,
    typecheck,
)
from .semantics import (
    Config,
    EvalOptions,
    TruncationError,
    denote,
    evaluate,
    run_operational,
    run_report,
    step,
    termination_probability,
)
from .hoare import (
    AssertionResult,
    FixpointError,
    HoareOptions,
    HoareTriple,
    OutlineStep,
    ProbAssertion,
    ProofOutline,
    check_outline,
    check_triple,
    eval_assertion,
    parse_assertion,
    wlp,
    wp,
)
from .deutsch import (
    BooleanOracle,
    DJReport,
    build_hadamard,
    build_uf,
    dj_outline,
    dj_program,
    dj_tables,
    dj_target_predicate,
    dj_verify,
    enumerate_oracles,
    oracle_from_spec,
)

__version__ = "0.1.0"
