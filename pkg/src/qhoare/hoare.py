"""Predicate transformers and Hoare-style checking over the Loewner order.

Predicates are Hermitian operators P with 0 <= P <= I; tr(P rho) is the
degree to which a state satisfies P.  A triple {P} c {Q} is valid in total
mode when tr(P rho) <= tr(Q c(rho)) for every state, and in partial mode
when the nonterminating mass tr(rho) - tr(c(rho)) is also credited to the
right-hand side.  Because both sides are linear in rho, validity is
equivalent to P <= wp(c, Q) (resp. wlp) in the Loewner order, which one
Hermitian eigensolve decides; an invalid triple yields the most-violating
pure state as a witness.

The proof-outline checker validates rule applications (Skip, AsgnB, AsgnN,
Unit, Seq, Measure, While, Cons) step by step against their schemas:
axiom preconditions by matrix equality, consequence steps by the Loewner
order, and Measure/While premise triples semantically.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from . import lang, linalg, semantics
from .lang import (
    ApplyU, Command, IfBit, InitZero, MeasureCase, MeasureIf, Seq, Skip,
    Tables, VarContext, While, seq_items,
)
from .linalg import (
    CMatrix, DEFAULT_TOL, DensityMatrix, QuantumPredicate, dual_apply_raw,
)

log = logging.getLogger(__name__)

TOTAL = "total"
PARTIAL = "partial"
_MODE_ALIASES = {"total": TOTAL, "tot": TOTAL, "partial": PARTIAL, "par": PARTIAL}


def normalize_mode(mode: str) -> str:
    try:
        return _MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown mode {mode!r} (expected 'total' or 'partial')")


class FixpointError(Exception):
    """A loop fixpoint iteration did not converge within the cap."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"loop fixpoint did not converge: residual {residual:.3e} "
            f"after {iterations} iterations"
        )
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class HoareOptions:
    fix_eps: float = 1e-9
    fix_max_iters: int = 10000
    tol: float = DEFAULT_TOL
    eval_opts: semantics.EvalOptions = field(default_factory=semantics.EvalOptions)

    def __post_init__(self):
        if self.fix_eps <= 0:
            raise ValueError("fix_eps must be positive")


# ---------------------------------------------------------------------------
# Weakest (liberal) preconditions


def _ctx_after(ctx: VarContext, c: Command) -> VarContext:
    if isinstance(c, Seq):
        return _ctx_after(_ctx_after(ctx, c.first), c.second)
    if isinstance(c, (MeasureCase,)):
        return _ctx_after(ctx, c.branches[0])
    if isinstance(c, (IfBit, MeasureIf)):
        return _ctx_after(ctx, c.then)
    if isinstance(c, lang.NewBit):
        return ctx.prepend(lang.VarDecl(c.var, "bit"))
    if isinstance(c, lang.NewQbit):
        return ctx.prepend(lang.VarDecl(c.var, "qbit"))
    if isinstance(c, lang.Discard):
        return ctx.remove(c.var)
    return ctx


class _Transformer:
    def __init__(self, opts: HoareOptions, tables: Tables):
        self.opts = opts
        self.tables = tables
        self.denoter = semantics._Denoter(opts.eval_opts, tables)
        self.clamp_magnitude = 0.0

    def transform(self, ctx: VarContext, c: Command, post: CMatrix, liberal: bool) -> CMatrix:
        if isinstance(c, Skip):
            return post
        if isinstance(c, Seq):
            mid_ctx = _ctx_after(ctx, c.first)
            inner = self.transform(mid_ctx, c.second, post, liberal)
            return self.transform(ctx, c.first, inner, liberal)
        if isinstance(c, MeasureCase):
            ms = semantics._measurement_ops(ctx, c.meas, c.vars, self.tables)
            out = np.zeros((ctx.dim, ctx.dim), dtype=np.complex128)
            for m, branch in zip(ms, c.branches):
                m = np.asarray(m)
                out += m.conj().T @ self.transform(ctx, branch, post, liberal) @ m
            return linalg.as_cmatrix(out)
        if isinstance(c, (IfBit, MeasureIf)):
            i = ctx.index(c.var)
            p0 = np.asarray(linalg.embed_at(linalg.projector(0), [i], ctx.dims))
            p1 = np.asarray(linalg.embed_at(linalg.projector(1), [i], ctx.dims))
            t = self.transform(ctx, c.then, post, liberal)
            e = self.transform(ctx, c.otherwise, post, liberal)
            return linalg.as_cmatrix(p0 @ t @ p0 + p1 @ e @ p1)
        if isinstance(c, While):
            return self._fix_while(ctx, c, post, liberal)
        # Atomic commands: the dual of their Kraus denotation.  All of them
        # (init, bit assignment, unitary, allocation, discard) are
        # admissible, so the liberal and strict transformers agree here.
        ops, _, _ = self.denoter.denote(ctx, c)
        return dual_apply_raw(ops, post)

    def _fix_while(self, ctx: VarContext, c: While, post: CMatrix, liberal: bool) -> CMatrix:
        dim = ctx.dim
        m0, m1 = (
            np.asarray(m)
            for m in semantics._measurement_ops(ctx, c.meas, c.vars, self.tables)
        )
        exit_term = m0.conj().T @ np.asarray(post) @ m0
        x = np.eye(dim, dtype=np.complex128) if liberal else np.zeros((dim, dim), dtype=np.complex128)
        residual = np.inf
        for _ in range(self.opts.fix_max_iters):
            inner = self.transform(ctx, c.body, x, liberal)
            x_new = exit_term + m1.conj().T @ np.asarray(inner) @ m1
            residual = float(np.max(np.abs(x_new - x)))
            x = x_new
            if residual < self.opts.fix_eps:
                return linalg.as_cmatrix(x)
        raise FixpointError(residual, self.opts.fix_max_iters)

    def finalize(self, m: CMatrix, tol: float) -> QuantumPredicate:
        """Symmetrize and clamp eigenvalues into [0, 1]; the clamp magnitude
        is recorded and logged when it exceeds the tolerance."""
        sym = (np.asarray(m) + np.asarray(m).conj().T) / 2
        evals, evecs = np.linalg.eigh(sym)
        clamp = max(0.0, float(-evals[0]), float(evals[-1] - 1.0))
        self.clamp_magnitude = max(self.clamp_magnitude, clamp)
        if evals[0] < 0 or evals[-1] > 1:
            if clamp > tol:
                log.warning("predicate clamped into [0, 1] by %.3e", clamp)
            clipped = np.clip(evals, 0.0, 1.0)
            sym = (evecs * clipped) @ evecs.conj().T
            sym = (sym + sym.conj().T) / 2
        return QuantumPredicate(linalg.as_cmatrix(sym), tol=tol)


def wp(
    ctx: VarContext,
    c: Command,
    post: QuantumPredicate,
    opts: HoareOptions | None = None,
    tables: Tables | None = None,
) -> QuantumPredicate:
    """Weakest precondition: the largest predicate P with
    tr(P rho) <= tr(post . c(rho)) for every rho (equality at the result)."""
    opts = opts or HoareOptions()
    tr = _Transformer(opts, tables or Tables.builtin())
    out = tr.transform(ctx, c, np.asarray(post.mat), liberal=False)
    return tr.finalize(out, max(opts.tol, post.tol))


def wlp(
    ctx: VarContext,
    c: Command,
    post: QuantumPredicate,
    opts: HoareOptions | None = None,
    tables: Tables | None = None,
) -> QuantumPredicate:
    """Weakest liberal precondition: as wp, but nonterminating mass counts
    toward the postcondition."""
    opts = opts or HoareOptions()
    tr = _Transformer(opts, tables or Tables.builtin())
    out = tr.transform(ctx, c, np.asarray(post.mat), liberal=True)
    return tr.finalize(out, max(opts.tol, post.tol))


# ---------------------------------------------------------------------------
# Triples


@dataclass(frozen=True)
class HoareTriple:
    ctx: VarContext
    pre: QuantumPredicate
    prog: Command
    post: QuantumPredicate
    mode: str = TOTAL

    def __post_init__(self):
        object.__setattr__(self, "mode", normalize_mode(self.mode))
        if self.pre.dim != self.ctx.dim:
            raise ValueError(
                f"precondition dimension {self.pre.dim} != program input dimension {self.ctx.dim}"
            )
        out_dim = _ctx_after(self.ctx, self.prog).dim
        if self.post.dim != out_dim:
            raise ValueError(
                f"postcondition dimension {self.post.dim} != program output dimension {out_dim}"
            )


@dataclass
class TripleVerdict:
    status: str  # 'valid' | 'invalid' | 'inconclusive'
    transformed: QuantumPredicate | None = None
    witness: DensityMatrix | None = None
    violation: float = 0.0  # tr(pre w) - tr(transformed w) for the witness
    residual: float | None = None  # fixpoint residual when inconclusive

    @property
    def valid(self) -> bool:
        return self.status == "valid"


def check_triple(
    t: HoareTriple,
    opts: HoareOptions | None = None,
    tables: Tables | None = None,
) -> TripleVerdict:
    """Decide a triple by one Loewner comparison against the transformer.

    Invalid triples come with a witness: the pure state of the most
    negative eigendirection of (transformer - pre), for which the defining
    trace inequality fails by `violation`.
    """
    opts = opts or HoareOptions()
    transformer = wp if t.mode == TOTAL else wlp
    try:
        bound = transformer(t.ctx, t.prog, t.post, opts, tables)
    except FixpointError as exc:
        return TripleVerdict(status="inconclusive", residual=exc.residual)
    diff = np.asarray(bound.mat) - np.asarray(t.pre.mat)
    diff = (diff + diff.conj().T) / 2
    evals, evecs = np.linalg.eigh(diff)
    if evals[0] >= -opts.tol * max(1.0, float(np.max(np.abs(diff)))):
        return TripleVerdict(status="valid", transformed=bound)
    v = evecs[:, 0:1]
    witness = DensityMatrix(linalg.as_cmatrix(v @ v.conj().T), tol=opts.tol)
    return TripleVerdict(
        status="invalid",
        transformed=bound,
        witness=witness,
        violation=float(-evals[0]),
    )


# ---------------------------------------------------------------------------
# Proof outlines


OUTLINE_RULES = ("Skip", "AsgnB", "AsgnN", "Unit", "Seq", "Measure", "While", "Cons")


@dataclass(frozen=True)
class OutlineStep:
    rule: str
    pre: CMatrix
    post: CMatrix
    premises: tuple = ()

    def __post_init__(self):
        if self.rule not in OUTLINE_RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        object.__setattr__(self, "pre", linalg.as_cmatrix(self.pre))
        object.__setattr__(self, "post", linalg.as_cmatrix(self.post))
        object.__setattr__(
            self, "premises", tuple(linalg.as_cmatrix(p) for p in self.premises)
        )


@dataclass(frozen=True)
class ProofOutline:
    """A linearized partial-correctness derivation: steps walk the
    program's statement spine in order, with Cons steps rewriting the
    running predicate in between."""

    ctx: VarContext
    prog: Command
    pre: CMatrix
    post: CMatrix
    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "pre", linalg.as_cmatrix(self.pre))
        object.__setattr__(self, "post", linalg.as_cmatrix(self.post))
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass
class StepVerdict:
    index: int
    rule: str
    ok: bool
    detail: str = ""


@dataclass
class OutlineReport:
    steps: list
    ok: bool
    detail: str = ""


def _eq(a: CMatrix, b: CMatrix, tol: float) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    return a.shape == b.shape and float(np.max(np.abs(a - b))) <= tol


def _loewner_ok(a: CMatrix, b: CMatrix, tol: float) -> bool:
    try:
        return linalg.loewner_leq(a, b, tol)
    except ValueError:
        return False


def _init_schema(ctx: VarContext, var: str, post: CMatrix) -> CMatrix:
    d = ctx.lookup(var).dim
    i = ctx.index(var)
    out = np.zeros((ctx.dim, ctx.dim), dtype=np.complex128)
    post = np.asarray(post)
    for n in range(d):
        back = np.asarray(linalg.embed_at(linalg.basis_op(n, 0, d), [i], ctx.dims))
        out += back @ post @ back.conj().T
    return linalg.as_cmatrix(out)


def check_outline(
    o: ProofOutline,
    opts: HoareOptions | None = None,
    tables: Tables | None = None,
) -> OutlineReport:
    """Validate every step of an outline against its rule schema and check
    that consecutive steps chain; Measure/While premise triples are decided
    semantically in partial-correctness mode."""
    opts = opts or HoareOptions()
    tables = tables or Tables.builtin()
    tol = opts.tol
    ctx = o.ctx
    stmts = seq_items(lang.normalize(o.prog))
    verdicts: list[StepVerdict] = []
    current = np.asarray(o.pre)
    pos = 0

    def premise_triple(pre_m, prog, post_m) -> TripleVerdict:
        t = HoareTriple(
            ctx,
            QuantumPredicate(pre_m, tol=tol),
            prog,
            QuantumPredicate(post_m, tol=tol),
            mode=PARTIAL,
        )
        return check_triple(t, opts, tables)

    for idx, s in enumerate(o.steps):
        v = StepVerdict(index=idx, rule=s.rule, ok=True)
        verdicts.append(v)
        if not _eq(s.pre, current, tol):
            v.ok = False
            v.detail = "step precondition does not chain with the previous step"
            current = np.asarray(s.post)
            continue
        if s.rule == "Cons":
            if not _loewner_ok(s.pre, s.post, tol):
                v.ok = False
                v.detail = "consequence step is not a Loewner weakening"
            current = np.asarray(s.post)
            continue
        # Every other rule consumes the next program statement.
        if pos >= len(stmts):
            v.ok = False
            v.detail = "no program statement left for this step"
            current = np.asarray(s.post)
            continue
        stmt = stmts[pos]
        pos += 1
        if s.rule == "Skip":
            if not isinstance(stmt, Skip):
                v.ok = False
                v.detail = f"rule Skip applied to {type(stmt).__name__}"
            elif not _eq(s.pre, s.post, tol):
                v.ok = False
                v.detail = "skip must leave the predicate unchanged"
        elif s.rule in ("AsgnB", "AsgnN"):
            if not isinstance(stmt, InitZero):
                v.ok = False
                v.detail = f"rule {s.rule} applied to {type(stmt).__name__}"
            else:
                d = ctx.lookup(stmt.var).dim
                want_rule = "AsgnB" if d == 2 else "AsgnN"
                if s.rule != want_rule:
                    v.ok = False
                    v.detail = f"variable {stmt.var} (dimension {d}) needs rule {want_rule}"
                else:
                    schema = _init_schema(ctx, stmt.var, s.post)
                    if not _eq(s.pre, schema, tol):
                        v.ok = False
                        v.detail = "precondition differs from the assignment schema"
        elif s.rule == "Unit":
            if not isinstance(stmt, ApplyU):
                v.ok = False
                v.detail = f"rule Unit applied to {type(stmt).__name__}"
            else:
                u = np.asarray(semantics._embed_gate(ctx, stmt.vars, tables.gates.get(stmt.gate)))
                schema = u.conj().T @ np.asarray(s.post) @ u
                if not _eq(s.pre, schema, tol):
                    v.ok = False
                    v.detail = "precondition differs from the unitary schema"
        elif s.rule == "Seq":
            # Splits the derivation at the midpoint: {pre} stmt {mid} and
            # {mid} rest-of-program {post}, consuming the remaining spine.
            rest = stmts[pos:]
            pos = len(stmts)
            if not rest:
                v.ok = False
                v.detail = "Seq needs at least two remaining statements"
            elif len(s.premises) != 1:
                v.ok = False
                v.detail = "Seq needs exactly one midpoint premise"
            else:
                mid = s.premises[0]
                first = premise_triple(s.pre, stmt, mid)
                second = premise_triple(mid, lang.seq_of(*rest), s.post)
                if first.status == "inconclusive" or second.status == "inconclusive":
                    v.ok = False
                    v.detail = "a Seq premise triple is inconclusive"
                elif not (first.valid and second.valid):
                    v.ok = False
                    v.detail = "a Seq premise triple is not valid"
        elif s.rule == "Measure":
            if not isinstance(stmt, MeasureCase):
                v.ok = False
                v.detail = f"rule Measure applied to {type(stmt).__name__}"
            elif len(s.premises) != len(stmt.branches):
                v.ok = False
                v.detail = (
                    f"Measure needs one premise per outcome "
                    f"({len(stmt.branches)}), got {len(s.premises)}"
                )
            else:
                ms = semantics._measurement_ops(ctx, stmt.meas, stmt.vars, tables)
                schema = np.zeros((ctx.dim, ctx.dim), dtype=np.complex128)
                for m, p in zip(ms, s.premises):
                    m = np.asarray(m)
                    schema += m.conj().T @ np.asarray(p) @ m
                if not _eq(s.pre, schema, tol):
                    v.ok = False
                    v.detail = "precondition differs from the measurement schema"
                else:
                    for out_idx, (p, branch) in enumerate(zip(s.premises, stmt.branches)):
                        pv = premise_triple(p, branch, s.post)
                        if pv.status == "inconclusive":
                            v.ok = False
                            v.detail = f"premise for outcome {out_idx} is inconclusive"
                            break
                        if not pv.valid:
                            v.ok = False
                            v.detail = f"premise triple for outcome {out_idx} is not valid"
                            break
        elif s.rule == "While":
            if not isinstance(stmt, While):
                v.ok = False
                v.detail = f"rule While applied to {type(stmt).__name__}"
            elif len(s.premises) != 2:
                v.ok = False
                v.detail = "While needs the exit/invariant predicate split (P, Q)"
            else:
                p_mat, q_mat = (np.asarray(p) for p in s.premises)
                m0, m1 = (
                    np.asarray(m)
                    for m in semantics._measurement_ops(ctx, stmt.meas, stmt.vars, tables)
                )
                mixed = m0.conj().T @ p_mat @ m0 + m1.conj().T @ q_mat @ m1
                if not _eq(s.pre, mixed, tol):
                    v.ok = False
                    v.detail = "precondition differs from the loop schema"
                elif not _eq(s.post, p_mat, tol):
                    v.ok = False
                    v.detail = "postcondition must be the exit part of the split"
                else:
                    pv = premise_triple(q_mat, stmt.body, mixed)
                    if pv.status == "inconclusive":
                        v.ok = False
                        v.detail = "loop body premise is inconclusive"
                    elif not pv.valid:
                        v.ok = False
                        v.detail = "loop body premise triple is not valid"
        current = np.asarray(s.post)

    ok = all(v.ok for v in verdicts)
    detail = ""
    for stmt in stmts[pos:]:
        if not isinstance(stmt, Skip):
            ok = False
            detail = f"outline does not cover the {type(stmt).__name__} statement"
            break
    if ok and not _eq(current, o.post, tol):
        ok = False
        detail = "final predicate differs from the outline postcondition"
    return OutlineReport(steps=verdicts, ok=ok, detail=detail)


# ---------------------------------------------------------------------------
# Probability assertions


@dataclass(frozen=True)
class ProbAssertion:
    """Pr(v1 = x1 and v2 = x2 and ...) <relation> bound."""

    conjuncts: tuple  # ((var, value), ...)
    relation: str  # '=' | '<=' | '>='
    bound: float

    def __post_init__(self):
        if self.relation not in ("=", "<=", ">="):
            raise ValueError(f"unknown relation {self.relation!r}")
        if not self.conjuncts:
            raise ValueError("assertion needs at least one conjunct")


_ASSERT_RE = re.compile(
    r"^\s*Pr\s*\(\s*(?P<body>[^)]*)\)\s*(?P<rel><=|>=|=)\s*(?P<bound>[-+0-9.eE]+)\s*$"
)


def parse_assertion(text: str) -> ProbAssertion:
    """Parse e.g. 'Pr(q1 = 0 & q2 = 0) = 1' ('and' also separates)."""
    m = _ASSERT_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse assertion {text!r}")
    conjuncts = []
    for part in re.split(r"&|\band\b", m.group("body")):
        part = part.strip()
        eq = re.match(r"^(?P<var>[A-Za-z_]\w*)\s*=\s*(?P<val>\d+)$", part)
        if not eq:
            raise ValueError(f"cannot parse conjunct {part!r}")
        conjuncts.append((eq.group("var"), int(eq.group("val"))))
    return ProbAssertion(tuple(conjuncts), m.group("rel"), float(m.group("bound")))


@dataclass
class AssertionResult:
    holds: bool
    probability: float
    state_trace: float


def eval_assertion(
    a: ProbAssertion,
    ctx: VarContext,
    rho: DensityMatrix,
    tol: float = DEFAULT_TOL,
) -> AssertionResult:
    """Probability = tr(Pi rho) for the product Pi of the embedded basis
    projectors of the conjunction; the comparison is decided at tol."""
    proj = np.eye(ctx.dim, dtype=np.complex128)
    for var, value in a.conjuncts:
        if var not in ctx:
            raise ValueError(f"unknown variable {var!r} in assertion")
        decl = ctx.lookup(var)
        if not 0 <= value < decl.dim:
            raise ValueError(f"value {value} out of range for {var} (dimension {decl.dim})")
        i = ctx.index(var)
        proj = proj @ np.asarray(linalg.embed_at(linalg.projector(value, decl.dim), [i], ctx.dims))
    p = float(np.trace(proj @ np.asarray(rho.mat)).real)
    if a.relation == "=":
        holds = abs(p - a.bound) <= tol
    elif a.relation == "<=":
        holds = p <= a.bound + tol
    else:
        holds = p >= a.bound - tol
    return AssertionResult(holds=holds, probability=p, state_trace=rho.trace)
