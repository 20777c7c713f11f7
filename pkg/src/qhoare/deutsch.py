"""Deutsch-Jozsa oracles, programs and verification reports.

Given a boolean function on k bits promised to be constant or balanced,
the quantum routine initializes k+1 qubits, flips the work qubit, applies
a (k+1)-fold Hadamard, the function oracle U_f |x>|b> = |x>|b xor f(x)|
and a k-fold Hadamard on the inputs.  Measuring the inputs yields all
zeros with probability 1 for constant f and probability 0 for balanced f.
This module builds the programs in both dialects, the matching gate
tables, the proof outline deriving the identity precondition for the
all-weight-on-zero postcondition, and a one-call verification report.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import hoare, lang, linalg, semantics
from .lang import ApplyU, Command, InitZero, Tables, VarContext, VarDecl
from .linalg import CMatrix, DensityMatrix, QuantumPredicate

MAX_INPUT_BITS = 6  # dense 2^(k+1) matrices; desk scale

CONSTANT = "constant"
BALANCED = "balanced"
OTHER = "other"


@dataclass(frozen=True)
class BooleanOracle:
    """A boolean function on k input bits, given by its truth table
    (index = input read as a big-endian bit string)."""

    k: int
    table: tuple

    def __post_init__(self):
        if not 1 <= self.k <= MAX_INPUT_BITS:
            raise ValueError(f"input bit count must be in 1..{MAX_INPUT_BITS}")
        table = tuple(int(v) for v in self.table)
        if len(table) != 2**self.k or any(v not in (0, 1) for v in table):
            raise ValueError(f"truth table must hold 2^{self.k} bits")
        object.__setattr__(self, "table", table)

    @property
    def classification(self) -> str:
        ones = sum(self.table)
        if ones in (0, len(self.table)):
            return CONSTANT
        if ones == len(self.table) // 2:
            return BALANCED
        return OTHER


def oracle_from_spec(spec: str, k: int = 2) -> BooleanOracle:
    """Oracle specification strings: 'constant0', 'constant1' or
    'balanced:<bitstring of length 2^k>'."""
    if spec == "constant0":
        return BooleanOracle(k, (0,) * 2**k)
    if spec == "constant1":
        return BooleanOracle(k, (1,) * 2**k)
    if spec.startswith("balanced:"):
        bits = spec[len("balanced:"):]
        if not all(b in "01" for b in bits):
            raise ValueError(f"bad oracle bitstring {bits!r}")
        k_eff = (len(bits)).bit_length() - 1
        if 2**k_eff != len(bits):
            raise ValueError(f"bitstring length {len(bits)} is not a power of two")
        oracle = BooleanOracle(k_eff, tuple(int(b) for b in bits))
        if oracle.classification != BALANCED:
            raise ValueError("bitstring is not balanced")
        return oracle
    raise ValueError(f"unknown oracle specification {spec!r}")


def enumerate_oracles(k: int) -> list:
    """Every constant and balanced oracle on k bits (8 of them for k=2)."""
    n = 2**k
    out = [BooleanOracle(k, (0,) * n), BooleanOracle(k, (1,) * n)]
    for ones in combinations(range(n), n // 2):
        table = tuple(1 if i in ones else 0 for i in range(n))
        out.append(BooleanOracle(k, table))
    return out


# ---------------------------------------------------------------------------
# Circuit matrices


def build_hadamard(k: int) -> CMatrix:
    """The k-fold Hadamard tensor power (entries +-2^(-k/2))."""
    if k < 1:
        raise ValueError("need at least one qubit")
    return linalg.kron_all([linalg.hadamard()] * k)


def build_uf(f: BooleanOracle) -> CMatrix:
    """Permutation matrix of |x>|b> -> |x>|b xor f(x)>."""
    dim = 2 ** (f.k + 1)
    m = np.zeros((dim, dim))
    for x in range(2**f.k):
        for b in range(2):
            m[2 * x + (b ^ f.table[x]), 2 * x + b] = 1.0
    return linalg.as_cmatrix(m)


def dj_tables(f: BooleanOracle) -> Tables:
    """Builtin tables extended with H{k}, H{k+1} and the oracle gate Uf."""
    tables = Tables.builtin()
    tables.gates.add(f"H{f.k}", build_hadamard(f.k))
    tables.gates.add(f"H{f.k + 1}", build_hadamard(f.k + 1))
    tables.gates.add("Uf", build_uf(f))
    return tables


# ---------------------------------------------------------------------------
# Programs


def _input_vars(k: int) -> list:
    return [f"q{i}" for i in range(1, k + 1)]


def dj_program(f: BooleanOracle, dialect: str = lang.CORE) -> tuple:
    """The verification programs: the core form initializes every qubit and
    applies the four unitaries; the qpl form adds allocation of the work
    qubit, its discard, and measurement of the inputs into fresh bits."""
    if f.classification == OTHER:
        raise ValueError("oracle is neither constant nor balanced")
    dialect = lang.normalize_dialect(dialect)
    k = f.k
    qs = _input_vars(k)
    all_vars = tuple(qs) + ("qe",)
    if dialect == lang.CORE:
        ctx = VarContext(tuple(VarDecl(q, "qbit") for q in all_vars))
        stmts = [InitZero(q) for q in all_vars]
        stmts.append(ApplyU(("qe",), "X"))
        stmts.append(ApplyU(all_vars, f"H{k + 1}"))
        stmts.append(ApplyU(all_vars, "Uf"))
        stmts.append(ApplyU(tuple(qs), f"H{k}"))
        return ctx, lang.seq_of(*stmts)
    ctx = VarContext(tuple(VarDecl(q, "qbit") for q in qs))
    stmts = [InitZero(q) for q in qs]
    stmts.append(lang.NewQbit("qe"))
    stmts.append(ApplyU(("qe",), "X"))
    stmts.append(ApplyU(all_vars, f"H{k + 1}"))
    stmts.append(ApplyU(all_vars, "Uf"))
    stmts.append(ApplyU(tuple(qs), f"H{k}"))
    stmts.append(lang.Discard("qe"))
    for i, q in enumerate(qs, start=1):
        stmts.append(lang.NewBit(f"b{i}"))
    for i, q in enumerate(qs, start=1):
        stmts.append(
            lang.MeasureIf(q, lang.AssignBit(f"b{i}", 1), lang.AssignBit(f"b{i}", 0))
        )
    return ctx, lang.seq_of(*stmts)


def dj_target_predicate(k: int) -> QuantumPredicate:
    """All weight concentrated on input qubits being zero: the projector
    |0..0><0..0| on the inputs tensored with identity on the work qubit."""
    proj = linalg.projector(0, 2**k)
    return QuantumPredicate(linalg.kron(proj, linalg.identity(2)))


def dj_outline(f: BooleanOracle) -> hoare.ProofOutline:
    """The forward proof outline {I} prog {T}: one consequence step into the
    backward-computed precondition, one assignment step per qubit and one
    unitary step per gate."""
    ctx, prog = dj_program(f, lang.CORE)
    tables = dj_tables(f)
    stmts = lang.seq_items(prog)
    post = np.asarray(dj_target_predicate(f.k).mat)
    # Walk backward collecting each statement's schema precondition.
    pres: list = [None] * len(stmts)
    cur = post
    for i in range(len(stmts) - 1, -1, -1):
        s = stmts[i]
        if isinstance(s, InitZero):
            cur_in = np.asarray(hoare._init_schema(ctx, s.var, cur))
        else:
            u = np.asarray(semantics._embed_gate(ctx, s.vars, tables.gates.get(s.gate)))
            cur_in = u.conj().T @ cur @ u
        pres[i] = (cur_in, cur)
        cur = cur_in
    steps = [hoare.OutlineStep("Cons", linalg.identity(ctx.dim), pres[0][0])]
    for s, (pre_m, post_m) in zip(stmts, pres):
        rule = "AsgnB" if isinstance(s, InitZero) else "Unit"
        steps.append(hoare.OutlineStep(rule, pre_m, post_m))
    return hoare.ProofOutline(
        ctx=ctx,
        prog=prog,
        pre=linalg.identity(ctx.dim),
        post=post,
        steps=tuple(steps),
    )


# ---------------------------------------------------------------------------
# Verification


@dataclass
class DJReport:
    k: int
    oracle_class: str
    p_all_zero: float
    classification: str


def dj_verify(f: BooleanOracle, tables: Tables | None = None) -> DJReport:
    """Run the core-form program from the all-zeros state and classify the
    oracle by the probability of measuring every input qubit as zero."""
    if f.classification == OTHER:
        raise ValueError("oracle is neither constant nor balanced")
    tables = tables or dj_tables(f)
    ctx, prog = dj_program(f, lang.CORE)
    rho0 = DensityMatrix(linalg.projector(0, ctx.dim))
    final = semantics.evaluate(ctx, prog, rho0, tables=tables)
    assertion = hoare.ProbAssertion(
        tuple((q, 0) for q in _input_vars(f.k)), "=", 1.0
    )
    p = hoare.eval_assertion(assertion, ctx, final).probability
    return DJReport(
        k=f.k,
        oracle_class=f.classification,
        p_all_zero=p,
        classification=CONSTANT if p > 0.5 else BALANCED,
    )
